"""PNG codecs and dataset manifest loading.

Depth follows the common panoramic RGB-D convention: 16-bit single-channel
PNG, meters = raw * depth_scale (default 1/512), with a sentinel raw value
(default 65535) marking invalid pixels. Raw 0 is also treated as invalid
since valid depths must be positive. Both knobs are configurable because
capture pipelines differ.

Manifests are JSON lines, one entry per panorama:
  {"rgb": "...", "depth": "...", "label": "...", "area": "...",
   "predictions": ["...", 16 paths ...]}   # predictions optional
Paths are resolved relative to the manifest file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .cloud import DepthImage

DEFAULT_DEPTH_SCALE = 1.0 / 512.0
DEFAULT_SENTINEL = 65535


def load_depth(
    path, depth_scale: float = DEFAULT_DEPTH_SCALE, sentinel: int = DEFAULT_SENTINEL
) -> DepthImage:
    """Read a 16-bit single-channel depth PNG into meters."""
    with Image.open(path) as im:
        if im.mode not in ("I", "I;16", "I;16B"):
            raise ValueError(f"{path}: expected 16-bit single-channel depth PNG, got mode {im.mode!r}")
        raw = np.asarray(im, dtype=np.int64)
    if raw.ndim != 2:
        raise ValueError(f"{path}: depth must have exactly one channel")
    mask = (raw != sentinel) & (raw > 0)
    return DepthImage(values=np.where(mask, raw, 0).astype(np.float64) * depth_scale, mask=mask)


def save_depth(
    path,
    depth: DepthImage,
    depth_scale: float = DEFAULT_DEPTH_SCALE,
    sentinel: int = DEFAULT_SENTINEL,
):
    """Quantize back to 16-bit raw units; invalid pixels get the sentinel."""
    raw = np.floor(depth.values / depth_scale + 0.5)
    raw = np.clip(raw, 1, sentinel - 1)
    raw = np.where(depth.mask, raw, sentinel).astype(np.uint16)
    Image.fromarray(raw).save(path, format="PNG")  # uint16 -> mode I;16


def load_label(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8).copy()


def save_label(path, labels: np.ndarray):
    Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="L").save(path, format="PNG")


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save_rgb(path, rgb: np.ndarray):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path, format="PNG")


def save_encoding(path, encoded, mask_path=None):
    """Write a 3-channel encoded image (and optionally its mask) as PNG."""
    save_rgb(path, encoded.channels)
    if mask_path is not None:
        save_mask(mask_path, encoded.mask)


def save_mask(path, mask: np.ndarray):
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    return load_label(path) > 127


def save_gray(path, values: np.ndarray):
    """Write an integer map as 8-bit grayscale: value * 255 // max (0 if flat)."""
    v = np.asarray(values, dtype=np.int64)
    top = int(v.max())
    out = (v * 255 // top).astype(np.uint8) if top > 0 else np.zeros(v.shape, dtype=np.uint8)
    Image.fromarray(out, mode="L").save(path, format="PNG")


@dataclass
class ManifestEntry:
    rgb_path: Path
    depth_path: Path
    label_path: Path
    area: str | None = None
    predictions: list[Path] = field(default_factory=list)


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    depth_scale: float = DEFAULT_DEPTH_SCALE
    invalid_depth_sentinel: int = DEFAULT_SENTINEL


def _image_size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        return im.size  # (width, height)


def load_manifest(
    path,
    depth_scale: float = DEFAULT_DEPTH_SCALE,
    sentinel: int = DEFAULT_SENTINEL,
) -> DatasetManifest:
    """Parse a JSONL manifest, checking files exist and dimensions agree."""
    if depth_scale <= 0:
        raise ValueError("depth_scale must be positive")
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        entry = ManifestEntry(
            rgb_path=base / rec["rgb"],
            depth_path=base / rec["depth"],
            label_path=base / rec["label"],
            area=rec.get("area"),
            predictions=[base / p for p in rec.get("predictions", [])],
        )
        paths = [entry.rgb_path, entry.depth_path, entry.label_path, *entry.predictions]
        missing = [str(p) for p in paths if not p.is_file()]
        if missing:
            raise ValueError(f"{path}:{lineno}: missing files: {', '.join(missing)}")
        sizes = {_image_size(p) for p in (entry.rgb_path, entry.depth_path, entry.label_path)}
        if len(sizes) != 1:
            raise ValueError(f"{path}:{lineno}: modalities disagree on image size: {sizes}")
        entries.append(entry)
    if not entries:
        raise ValueError(f"{path}: manifest has no entries")
    return DatasetManifest(entries=entries, depth_scale=depth_scale, invalid_depth_sentinel=sentinel)
