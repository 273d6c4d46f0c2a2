"""ERP panorama rotation and rotation-disturbance evaluation.

A disturbance is yaw/pitch/roll (alpha, beta, gamma) composed in the fixed
order Rz(alpha) @ Rx(beta) @ Ry(gamma), so a pure yaw that is a multiple of
the column angle is an exact circular column shift. Resampling is inverse
warping on the sphere: every output pixel looks up the source direction
R^T * d and samples the input there (nearest or bilinear, wrapping
horizontally). Radial depth is carried unchanged per ray.

The evaluation protocol runs a 4 x 2 x 2 grid of disturbances
(yaw 0/90/180/270, pitch 0/5, roll 0/5), scores each with confusion-matrix
segmentation metrics, and summarizes mean / sample variance / range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .cloud import DepthImage
from .coords import GridSpec, grid_dirs

YAW_ANGLES = (0.0, 90.0, 180.0, 270.0)
PITCH_ANGLES = (0.0, 5.0)
ROLL_ANGLES = (0.0, 5.0)


def rotation_matrix_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_matrix_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class RotationSpec:
    """Yaw/pitch/roll disturbance in degrees with its rotation matrix."""

    alpha: float  # yaw, about +z
    beta: float  # pitch, about +x
    gamma: float  # roll, about +y
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = rotation_matrix_z(self.alpha) @ rotation_matrix_x(self.beta) @ rotation_matrix_y(self.gamma)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RotationSpec":
        """Recover (alpha, beta, gamma) from a rotation matrix in the fixed
        z-x-y composition. Degenerate at |pitch| = 90 (roll folded into yaw)."""
        m = np.asarray(m, dtype=np.float64)
        if abs(np.linalg.det(m) - 1.0) > 1e-9:
            raise ValueError("matrix is not a proper rotation")
        sb = np.clip(m[2, 1], -1.0, 1.0)
        beta = np.degrees(np.arcsin(sb))
        if abs(sb) > 1.0 - 1e-12:
            alpha = np.degrees(np.arctan2(m[1, 0], m[0, 0]))
            gamma = 0.0
        else:
            alpha = np.degrees(np.arctan2(-m[0, 1], m[1, 1]))
            gamma = np.degrees(np.arctan2(-m[2, 0], m[2, 2]))
        return cls(alpha=float(alpha), beta=float(beta), gamma=float(gamma))

    def inverse(self) -> "RotationSpec":
        return RotationSpec.from_matrix(self.matrix.T)

    def compose(self, other: "RotationSpec") -> "RotationSpec":
        """Rotation equivalent to applying other first, then self."""
        return RotationSpec.from_matrix(self.matrix @ other.matrix)


def sga_grid() -> list[RotationSpec]:
    """The 16 evaluation disturbances, yaw-major then pitch then roll."""
    return [
        RotationSpec(alpha=a, beta=b, gamma=g)
        for a in YAW_ANGLES
        for b in PITCH_ANGLES
        for g in ROLL_ANGLES
    ]


@lru_cache(maxsize=2)
def _source_pixels_cached(width: int, height: int, matrix_bytes: bytes):
    grid = GridSpec(width=width, height=height)
    matrix = np.frombuffer(matrix_bytes, dtype=np.float64).reshape(3, 3)
    d_out = grid_dirs(grid).reshape(-1, 3)
    d_in = d_out @ matrix  # row-vector form of R^T @ d
    x, y, z = d_in[:, 0], d_in[:, 1], d_in[:, 2]
    # angles kept in radians; the pixel map folds the degree conversion in
    u = ((np.arctan2(x, y) + np.pi) * (width / (2.0 * np.pi)) - 0.5) % width
    v = (np.pi / 2.0 - np.arcsin(np.clip(z, -1.0, 1.0))) * (height / np.pi) - 0.5
    u = u.reshape(grid.shape)
    v = v.reshape(grid.shape)
    u.flags.writeable = False
    v.flags.writeable = False
    return u, v


def _source_pixels(grid: GridSpec, rotation: RotationSpec):
    """Continuous source (u, v) for every output pixel under inverse warp.

    Cached on (grid, rotation matrix): evaluation rotates several
    modalities with the same disturbance back to back.
    """
    return _source_pixels_cached(grid.width, grid.height, rotation.matrix.tobytes())


def _gather(values: np.ndarray, vi: np.ndarray, ui: np.ndarray) -> np.ndarray:
    return values[vi, ui]


def rotate_erp(
    values: np.ndarray,
    rotation: RotationSpec,
    sampling: str = "bilinear",
    *,
    label: bool = False,
    mask: np.ndarray | None = None,
):
    """Resample an ERP image under a 3D rotation disturbance.

    values: (H, W) or (H, W, C) with W == 2H. Sampling is "nearest" or
    "bilinear"; label images must use nearest. With a validity mask,
    bilinear renormalizes over valid neighbors and returns
    (rotated_values, rotated_mask).
    """
    values = np.asarray(values)
    if values.ndim not in (2, 3):
        raise ValueError("expected (H, W) or (H, W, C) image")
    grid = GridSpec(width=values.shape[1], height=values.shape[0])
    if sampling not in ("nearest", "bilinear"):
        raise ValueError(f"unknown sampling mode: {sampling!r}")
    if label and sampling != "nearest":
        raise ValueError("label images must be rotated with nearest sampling")

    u, v = _source_pixels(grid, rotation)
    h, w = grid.shape

    if sampling == "nearest":
        ui = (np.floor(u + 0.5).astype(np.int64)) % w
        vi = np.clip(np.floor(v + 0.5).astype(np.int64), 0, h - 1)
        out = _gather(values, vi, ui)
        if mask is None:
            return out
        return out, _gather(np.asarray(mask, dtype=bool), vi, ui)

    u0 = np.floor(u)
    v0 = np.floor(v)
    fu = u - u0
    fv = v - v0
    u0i = u0.astype(np.int64) % w
    u1i = (u0.astype(np.int64) + 1) % w
    v0i = np.clip(v0.astype(np.int64), 0, h - 1)
    v1i = np.clip(v0.astype(np.int64) + 1, 0, h - 1)

    weights = (
        ((1.0 - fu) * (1.0 - fv), v0i, u0i),
        (fu * (1.0 - fv), v0i, u1i),
        ((1.0 - fu) * fv, v1i, u0i),
        (fu * fv, v1i, u1i),
    )
    vals = values.astype(np.float64)
    expand = (lambda a: a[..., None]) if values.ndim == 3 else (lambda a: a)

    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        acc = np.zeros(vals.shape, dtype=np.float64)
        wsum = np.zeros(grid.shape, dtype=np.float64)
        for wgt, vi, ui in weights:
            wv = wgt * _gather(m, vi, ui)
            acc += expand(wv) * _gather(vals, vi, ui)
            wsum += wv
        out_mask = wsum > 1e-9
        safe = np.where(out_mask, wsum, 1.0)
        out = acc / expand(safe)
        out = np.where(expand(out_mask), out, 0.0)
        return _restore_dtype(out, values.dtype), out_mask

    acc = np.zeros(vals.shape, dtype=np.float64)
    for wgt, vi, ui in weights:
        acc += expand(wgt) * _gather(vals, vi, ui)
    return _restore_dtype(acc, values.dtype)


def _restore_dtype(out: np.ndarray, dtype: np.dtype) -> np.ndarray:
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        return np.clip(np.floor(out + 0.5), info.min, info.max).astype(dtype)
    return out.astype(dtype, copy=False)


def rotate_depth(depth: DepthImage, rotation: RotationSpec, sampling: str = "nearest") -> DepthImage:
    """Rotate a depth panorama; radial distances are rotation-invariant, so
    values are resampled as-is and the mask is carried along."""
    values, mask = rotate_erp(depth.values, rotation, sampling, mask=depth.mask)
    return DepthImage(values=values, mask=mask)


@dataclass
class SegEval:
    """Confusion matrix and the metrics derived from it."""

    confusion: np.ndarray  # (C, C) int64, rows = ground truth
    miou: float
    pacc: float
    per_class_iou: np.ndarray  # (C,) float, NaN for classes absent everywhere


def seg_eval_from_confusion(confusion: np.ndarray, all_classes: bool = False) -> SegEval:
    """Metrics from an accumulated confusion matrix (rows = ground truth)."""
    confusion = np.asarray(confusion, dtype=np.int64)
    total = confusion.sum()
    if total == 0:
        raise ValueError("confusion matrix has no counted pixels")
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    denom = tp + fp + fn
    present = denom > 0
    iou = np.full(confusion.shape[0], np.nan)
    iou[present] = tp[present] / denom[present]
    miou = float(np.mean(np.where(present, iou, 0.0))) if all_classes else float(
        np.mean(iou[present])
    )
    return SegEval(
        confusion=confusion,
        miou=miou,
        pacc=float(tp.sum() / total),
        per_class_iou=iou,
    )


def seg_eval(
    pred: np.ndarray,
    gt: np.ndarray,
    num_classes: int,
    ignore_index: int | None = None,
    all_classes: bool = False,
) -> SegEval:
    """Pixel-accuracy and IoU metrics for a predicted label image.

    Pixels whose ground truth or prediction equals ignore_index are
    excluded everywhere. mIoU averages classes present in GT or Pred
    (all_classes=True forces the mean over every class index).
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    valid = np.ones(gt.shape, dtype=bool)
    if ignore_index is not None:
        valid = (gt != ignore_index) & (pred != ignore_index)
    p = pred[valid].astype(np.int64)
    g = gt[valid].astype(np.int64)
    if p.size and (p.min() < 0 or p.max() >= num_classes or g.min() < 0 or g.max() >= num_classes):
        raise ValueError("labels must be in [0, num_classes) or ignore_index")
    confusion = np.bincount(g * num_classes + p, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )
    return seg_eval_from_confusion(confusion, all_classes=all_classes)


class SgaPredictionError(RuntimeError):
    """Prediction callback failed; carries the offending rotation."""

    def __init__(self, rotation: RotationSpec, cause: BaseException):
        super().__init__(
            f"prediction failed at rotation (alpha={rotation.alpha}, "
            f"beta={rotation.beta}, gamma={rotation.gamma}): {cause}"
        )
        self.rotation = rotation


PredictFn = Callable[[np.ndarray | None, DepthImage | None, RotationSpec], np.ndarray]


def sga_run(
    predict_fn: PredictFn,
    rgb: np.ndarray | None,
    depth: DepthImage | None,
    gt: np.ndarray,
    grid: Sequence[RotationSpec] | None = None,
    *,
    num_classes: int,
    ignore_index: int | None = None,
    all_classes: bool = False,
    rgb_sampling: str = "bilinear",
    depth_sampling: str = "bilinear",
) -> list[SegEval]:
    """Evaluate a labeler across the disturbance grid.

    For each rotation the inputs and ground truth are rotated identically
    (labels nearest), predict_fn(rgb, depth, rotation) supplies labels on
    the rotated frame, and the result is scored. Results follow grid order.
    """
    if grid is None:
        grid = sga_grid()
    results = []
    for rotation in grid:
        rgb_r = rotate_erp(rgb, rotation, rgb_sampling) if rgb is not None else None
        depth_r = rotate_depth(depth, rotation, depth_sampling) if depth is not None else None
        gt_r = rotate_erp(gt, rotation, "nearest", label=True)
        try:
            pred = predict_fn(rgb_r, depth_r, rotation)
        except Exception as exc:
            raise SgaPredictionError(rotation, exc) from exc
        results.append(
            seg_eval(pred, gt_r, num_classes, ignore_index=ignore_index, all_classes=all_classes)
        )
    return results


@dataclass
class SgaStats:
    """Mean / sample variance / range of the metric series, in percent."""

    miou_mean: float
    miou_variance: float
    miou_range: float
    pacc_mean: float
    pacc_variance: float
    pacc_range: float


def summarize(values: Sequence[float]) -> tuple[float, float, float]:
    """(mean, sample variance, max - min) of a series; needs >= 2 values."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        raise ValueError("need at least two results to summarize")
    return float(arr.mean()), float(arr.var(ddof=1)), float(arr.max() - arr.min())


def sga_stats(results) -> SgaStats:
    """Summary statistics over evaluation results.

    Accepts a sequence of SegEval (metrics as fractions, reported in
    percent) or of (miou_percent, pacc_percent) pairs.
    """
    if len(results) < 2:
        raise ValueError("need at least two results (variance is undefined)")
    if hasattr(results[0], "miou"):
        miou = [100.0 * r.miou for r in results]
        pacc = [100.0 * r.pacc for r in results]
    else:
        miou = [float(r[0]) for r in results]
        pacc = [float(r[1]) for r in results]
    mm, mv, mr = summarize(miou)
    pm, pv, pr = summarize(pacc)
    return SgaStats(
        miou_mean=mm,
        miou_variance=mv,
        miou_range=mr,
        pacc_mean=pm,
        pacc_variance=pv,
        pacc_range=pr,
    )
