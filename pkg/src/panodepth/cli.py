"""Command-line surface tying the pipeline together.

Subcommands: encode-rel, encode-hha, rotate, sga-eval, slice-debug,
gate-report, ha-profile, synth. All outputs are deterministic given flags
and inputs. Failures print a one-line JSON error to stderr and exit 1;
usage errors exit 2 (argparse). Relative output paths are resolved under
$PANODEPTH_OUTPUT_DIR when that variable is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .cloud import NormalField
from .config import RunConfig
from .coords import GridSpec
from .encoders import EgviaParams, encode_hha, encode_rel, ha_profile
from .router import GatePattern, gate_usage_report, recombine, slice_regions, valid_patterns
from .sga import (
    RotationSpec,
    rotate_depth,
    rotate_erp,
    seg_eval_from_confusion,
    sga_grid,
    sga_run,
    sga_stats,
)
from .synth import synth_scene

OUTPUT_DIR_ENV = "PANODEPTH_OUTPUT_DIR"

DEFAULTS = RunConfig()  # flag defaults all come from the run configuration


def _out_path(p) -> Path:
    p = Path(p)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _add_depth_codec_flags(p: argparse.ArgumentParser):
    p.add_argument("--depth-scale", type=float, default=DEFAULTS.depth_scale,
                   help="meters per raw depth unit (default 1/512)")
    p.add_argument("--sentinel", type=int, default=DEFAULTS.invalid_depth_sentinel,
                   help="raw value marking invalid depth (default 65535)")


def _load_normals_npz(path) -> NormalField:
    data = np.load(path)
    return NormalField(normals=data["normals"], mask=data["mask"])


def cmd_encode_rel(args) -> int:
    depth = dataio.load_depth(args.depth, args.depth_scale, args.sentinel)
    normals = _load_normals_npz(args.normals) if args.normals else None
    rel = encode_rel(
        depth,
        EgviaParams(lam=args.lam, alpha_deg=args.alpha),
        normals=normals,
        window=args.window,
        estimate_gravity_axis=args.estimate_gravity,
    )
    dataio.save_encoding(_out_path(args.out), rel, _out_path(args.mask_out) if args.mask_out else None)
    return 0


def cmd_encode_hha(args) -> int:
    depth = dataio.load_depth(args.depth, args.depth_scale, args.sentinel)
    normals = _load_normals_npz(args.normals) if args.normals else None
    hha = encode_hha(
        depth,
        normals=normals,
        window=args.window,
        estimate_gravity_axis=args.estimate_gravity,
    )
    dataio.save_encoding(_out_path(args.out), hha, _out_path(args.mask_out) if args.mask_out else None)
    return 0


def cmd_rotate(args) -> int:
    rotation = RotationSpec(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    out = _out_path(args.out)
    if args.kind == "depth":
        depth = dataio.load_depth(args.input, args.depth_scale, args.sentinel)
        dataio.save_depth(out, rotate_depth(depth, rotation, args.sampling),
                          args.depth_scale, args.sentinel)
    elif args.kind == "label":
        labels = dataio.load_label(args.input)
        dataio.save_label(out, rotate_erp(labels, rotation, args.sampling, label=True))
    else:
        rgb = dataio.load_rgb(args.input)
        dataio.save_rgb(out, rotate_erp(rgb, rotation, args.sampling))
    return 0


def cmd_ha_profile(args) -> int:
    depth = dataio.load_depth(args.depth, args.depth_scale, args.sentinel)
    normals = _load_normals_npz(args.normals) if args.normals else None
    hha = encode_hha(depth, normals=normals, window=args.window)
    profile = ha_profile(hha.h2, hha.a1, hha.mask)

    def _clean(x: float):
        return None if math.isnan(x) else x

    report = {
        "pearson_r": profile.pearson_r,
        "rows": [
            {"phi_deg": p, "height_mean": _clean(h), "angle_mean": _clean(a)}
            for p, h, a in zip(profile.phi_deg, profile.height_mean, profile.angle_mean)
        ],
    }
    _out_path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    if args.csv:
        with open(_out_path(args.csv), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["phi_deg", "height_mean", "angle_mean"])
            for row in report["rows"]:
                w.writerow([row["phi_deg"], row["height_mean"], row["angle_mean"]])
    return 0


def cmd_sga_eval(args) -> int:
    manifest = dataio.load_manifest(args.manifest, args.depth_scale, args.sentinel)
    grid = sga_grid()
    confusions = [np.zeros((args.classes, args.classes), dtype=np.int64) for _ in grid]

    for entry in manifest.entries:
        gt = dataio.load_label(entry.label_path)
        if entry.predictions:
            if len(entry.predictions) != len(grid):
                raise ValueError(
                    f"{entry.label_path}: expected {len(grid)} prediction paths, "
                    f"got {len(entry.predictions)}"
                )
            index = {id(rot): i for i, rot in enumerate(grid)}
            preds = [dataio.load_label(p) for p in entry.predictions]

            def predict(rgb, depth, rotation):
                return preds[index[id(rotation)]]

        elif args.oracle:

            def predict(rgb, depth, rotation):
                return rotate_erp(gt, rotation, "nearest", label=True)

        else:
            raise ValueError(
                f"{entry.label_path}: no per-rotation predictions in the manifest "
                "(add \"predictions\" or pass --oracle)"
            )

        results = sga_run(
            predict, None, None, gt, grid,
            num_classes=args.classes, ignore_index=args.ignore_index,
        )
        for conf, res in zip(confusions, results):
            conf += res.confusion

    per_rotation = [seg_eval_from_confusion(c) for c in confusions]
    stats = sga_stats(per_rotation)

    report = {
        "num_classes": args.classes,
        "ignore_index": args.ignore_index,
        "rotations": [
            {
                "alpha": rot.alpha, "beta": rot.beta, "gamma": rot.gamma,
                "miou": 100.0 * res.miou, "pacc": 100.0 * res.pacc,
            }
            for rot, res in zip(grid, per_rotation)
        ],
        "stats": {
            "miou": {"mean": stats.miou_mean, "variance": stats.miou_variance,
                     "range": stats.miou_range},
            "pacc": {"mean": stats.pacc_mean, "variance": stats.pacc_variance,
                     "range": stats.pacc_range},
        },
    }
    _out_path(args.report).write_text(json.dumps(report, indent=2) + "\n")

    if args.csv:
        with open(_out_path(args.csv), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["alpha", "beta", "gamma", "miou", "pacc"])
            for row in report["rotations"]:
                w.writerow([row["alpha"], row["beta"], row["gamma"], row["miou"], row["pacc"]])
            for name in ("mean", "variance", "range"):
                w.writerow([name, "", "", report["stats"]["miou"][name], report["stats"]["pacc"][name]])
    return 0


def cmd_slice_debug(args) -> int:
    grid = GridSpec(width=args.width, height=args.height)
    rg = slice_regions(grid, args.rows, args.cols, args.size, args.stride)
    payload = {
        "width": grid.width,
        "height": grid.height,
        "rows": rg.m,
        "cols": rg.n,
        "region_size": rg.region_size,
        "stride": rg.stride,
        "regions": [
            {
                "row": r.row, "col": r.col, "u_start": r.u_start, "v_start": r.v_start,
                "wraps": r.u_start + rg.region_size > grid.width,
            }
            for r in rg.regions
        ],
    }
    _out_path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    if args.coverage_png:
        ones = np.ones((rg.region_size, rg.region_size))
        _, coverage = recombine(((r, ones) for r in rg.regions), grid, rg.region_size)
        dataio.save_gray(_out_path(args.coverage_png), coverage)
    return 0


def cmd_gate_report(args) -> int:
    records = []
    for line in Path(args.records).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        region = rec["region"]
        region_id = tuple(region) if isinstance(region, list) else region
        records.append((region_id, GatePattern(tuple(rec["pattern"]))))
    report = gate_usage_report(records)

    num_cells = len(records[0][1].decisions)
    columns = [p.as_string() for p in valid_patterns(num_cells)]
    with open(_out_path(args.out), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["region"] + columns)
        for region_id in sorted(report, key=str):
            row = report[region_id]
            w.writerow([region_id] + [f"{row[c]:.3f}" for c in columns])
    return 0


def cmd_synth(args) -> int:
    grid = GridSpec(width=2 * args.height_px, height=args.height_px)
    dims = {}
    if args.kind == "floor_plane":
        dims["floor_z"] = args.floor_z
    elif args.kind == "cylinder_wall":
        dims["radius"] = args.radius
    else:
        dims.update(size_x=args.size_x, size_y=args.size_y, height=args.room_height)
    scene = synth_scene(args.kind, grid, **dims)

    out_dir = _out_path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataio.save_depth(out_dir / "depth.png", scene.depth, args.depth_scale, args.sentinel)
    dataio.save_label(out_dir / "labels.png", scene.labels)
    np.savez_compressed(
        out_dir / "normals.npz", normals=scene.normals.normals, mask=scene.normals.mask
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panodepth",
        description="Panoramic depth encodings, rotation-robustness evaluation, and region routing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def encoder_flags(p):
        p.add_argument("--depth", required=True, help="16-bit depth PNG")
        p.add_argument("--out", required=True, help="output 3-channel PNG")
        p.add_argument("--mask-out", help="optional validity-mask PNG")
        p.add_argument("--normals", help="optional .npz with analytic normals/mask")
        p.add_argument("--window", type=int, default=None, help="plane-fit window (odd)")
        p.add_argument("--estimate-gravity", action="store_true",
                       help="estimate and correct the gravity axis (default: identity)")
        _add_depth_codec_flags(p)

    p = sub.add_parser("encode-rel", help="encode depth into the cylindrical 3-channel image")
    encoder_flags(p)
    p.add_argument("--lam", type=float, default=DEFAULTS.egvia.lam,
                   help="blend weight (default 0.5)")
    p.add_argument("--alpha", type=float, default=DEFAULTS.egvia.alpha_deg,
                   help="blend branch threshold, degrees (default 45)")
    p.set_defaults(func=cmd_encode_rel)

    p = sub.add_parser("encode-hha", help="encode the HHA baseline image")
    encoder_flags(p)
    p.set_defaults(func=cmd_encode_hha)

    p = sub.add_parser("rotate", help="rotate an ERP image by yaw/pitch/roll")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=("rgb", "depth", "label"), default="rgb")
    p.add_argument("--alpha", type=float, default=0.0, help="yaw, degrees")
    p.add_argument("--beta", type=float, default=0.0, help="pitch, degrees")
    p.add_argument("--gamma", type=float, default=0.0, help="roll, degrees")
    p.add_argument("--sampling", choices=("nearest", "bilinear"), default="bilinear")
    _add_depth_codec_flags(p)
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("ha-profile", help="per-latitude height/angle curves and correlation")
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True, help="output JSON")
    p.add_argument("--csv", help="optional CSV of the curves")
    p.add_argument("--normals", help="optional .npz with analytic normals/mask")
    p.add_argument("--window", type=int, default=None)
    _add_depth_codec_flags(p)
    p.set_defaults(func=cmd_ha_profile)

    p = sub.add_parser("sga-eval", help="rotation-disturbance evaluation over a manifest")
    p.add_argument("--manifest", required=True, help="JSONL manifest")
    p.add_argument("--report", required=True, help="output JSON report")
    p.add_argument("--csv", help="optional CSV report")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--ignore-index", type=int, default=255)
    p.add_argument("--oracle", action="store_true",
                   help="use rotated ground truth as the prediction (pipeline check)")
    _add_depth_codec_flags(p)
    p.set_defaults(func=cmd_sga_eval)

    p = sub.add_parser("slice-debug", help="emit region rectangles and a coverage map")
    p.add_argument("--width", type=int, default=DEFAULTS.width)
    p.add_argument("--height", type=int, default=DEFAULTS.height)
    p.add_argument("--rows", type=int, default=DEFAULTS.region_rows)
    p.add_argument("--cols", type=int, default=DEFAULTS.region_cols)
    p.add_argument("--size", type=int, default=DEFAULTS.region_size)
    p.add_argument("--stride", type=int, default=DEFAULTS.region_stride)
    p.add_argument("--out", required=True, help="output JSON")
    p.add_argument("--coverage-png", help="optional coverage-map PNG")
    p.set_defaults(func=cmd_slice_debug)

    p = sub.add_parser("gate-report", help="per-region gate-pattern frequency table")
    p.add_argument("--records", required=True, help="JSONL of region/pattern records")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_gate_report)

    p = sub.add_parser("synth", help="generate an analytic test scene")
    p.add_argument("--kind", choices=("floor_plane", "cylinder_wall", "box_room", "furnished_room"),
                   default="box_room")
    p.add_argument("--height-px", type=int, default=512, help="rows; width is twice this")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--floor-z", type=float, default=-1.6)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--size-x", type=float, default=4.0)
    p.add_argument("--size-y", type=float, default=6.0)
    p.add_argument("--room-height", type=float, default=3.0)
    _add_depth_codec_flags(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a machine-readable failure
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
