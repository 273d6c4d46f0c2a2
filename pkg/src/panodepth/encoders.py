"""Three-channel depth encodings for ERP panoramas.

Two encoders share the same geometric intermediates:

  - the cylindrical encoding: planar distance to the vertical camera axis
    (rectified depth), a piecewise blend of normalized height and vertical
    normal angle, and the lateral orientation angle of the normal against
    the latitude-circle direction at the pixel's azimuth;
  - the classic HHA baseline: inverse-depth disparity surrogate, height
    above the lowest point, and the normal's angle with gravity.

Channel normalization: angle channels use the fixed physical map
[0, 180] deg -> [0, 255] so values are comparable across images; distance
and height channels use per-image min/max over valid pixels (explicit
bounds can be passed for dataset-global ablations). Quantization to 8 bits
rounds half away from zero, documented so golden tests can be bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cloud import (
    DepthImage,
    NormalField,
    PointCloud,
    depth_to_cloud,
    estimate_gravity,
    estimate_normals,
    gravity_correct,
)
from .coords import grid_angles


@dataclass(frozen=True)
class EgviaParams:
    """Blend weight and branch threshold for the height/angle channel.

    lam is the weight on the normalized vertical angle inside the blended
    branch; alpha_deg bounds the near-horizontal angle ranges that blend.
    """

    lam: float = 0.5
    alpha_deg: float = 45.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if not 0.0 < self.alpha_deg < 90.0:
            raise ValueError("alpha_deg must be in (0, 90) degrees")


def _encoded_image_checks(channels: np.ndarray, mask: np.ndarray):
    if channels.ndim != 3 or channels.shape[-1] != 3 or channels.dtype != np.uint8:
        raise ValueError("encoded image must be (H, W, 3) uint8")
    if mask.shape != channels.shape[:2]:
        raise ValueError("mask shape does not match channels")
    if channels[~mask].any():
        raise ValueError("invalid pixels must encode 0 in all channels")


@dataclass
class RelImage:
    """Encoded cylindrical-representation image: ReD, EGVIA, LOA channels."""

    channels: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.channels = np.asarray(self.channels)
        self.mask = np.asarray(self.mask, dtype=bool)
        _encoded_image_checks(self.channels, self.mask)

    @property
    def red(self) -> np.ndarray:
        return self.channels[..., 0]

    @property
    def egvia(self) -> np.ndarray:
        return self.channels[..., 1]

    @property
    def loa(self) -> np.ndarray:
        return self.channels[..., 2]


@dataclass
class HhaImage:
    """Encoded HHA baseline image: disparity, height, gravity-angle channels."""

    channels: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.channels = np.asarray(self.channels)
        self.mask = np.asarray(self.mask, dtype=bool)
        _encoded_image_checks(self.channels, self.mask)

    @property
    def h1(self) -> np.ndarray:
        return self.channels[..., 0]

    @property
    def h2(self) -> np.ndarray:
        return self.channels[..., 1]

    @property
    def a1(self) -> np.ndarray:
        return self.channels[..., 2]


def rectified_depth(d, phi_deg):
    """Planar (cylindrical) distance rho = d * cos(phi)."""
    return np.asarray(d, dtype=np.float64) * np.cos(np.radians(phi_deg))


def height(p_z, cloud: PointCloud):
    """Height above the lowest valid point of the cloud: p_z - min(P_z)."""
    return np.asarray(p_z, dtype=np.float64) - cloud.min_valid_z()


def vertical_angle(n):
    """Angle in degrees between normal(s) (..., 3) and straight up: arccos(N_z)."""
    nz = np.asarray(n, dtype=np.float64)[..., 2]
    return np.degrees(np.arccos(np.clip(nz, -1.0, 1.0)))


def lateral_angle(n, theta_deg):
    """Angle in degrees between normal(s) and the horizontal reference
    direction (cos(theta), sin(theta), 0) at azimuth theta."""
    n = np.asarray(n, dtype=np.float64)
    t = np.radians(np.asarray(theta_deg, dtype=np.float64))
    dot = n[..., 0] * np.cos(t) + n[..., 1] * np.sin(t)
    return np.degrees(np.arccos(np.clip(dot, -1.0, 1.0)))


def normalize_channel(values, kind: str, mask=None, bounds=None):
    """Scale a channel to [0, 255] as float.

    kind="angle": fixed map [0, 180] degrees -> [0, 255].
    kind="linear": per-image min/max over valid pixels (or explicit
    (lo, hi) bounds); a constant channel maps to all zeros.
    Invalid pixels are zeroed. Raises if no pixel is valid.
    """
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(values)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("cannot normalize a channel with no valid pixels")

    if kind == "angle":
        out = np.clip(values / 180.0 * 255.0, 0.0, 255.0)
    elif kind == "linear":
        if bounds is not None:
            lo, hi = float(bounds[0]), float(bounds[1])
        else:
            valid = values[mask]
            lo, hi = float(valid.min()), float(valid.max())
        if hi <= lo:
            out = np.zeros_like(values)
        else:
            out = np.clip((values - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    else:
        raise ValueError(f"unknown normalization kind: {kind!r}")
    return np.where(mask, out, 0.0)


def egvia(a_deg, a_norm, h_norm, params: EgviaParams):
    """Piecewise blend of normalized vertical angle and height.

    Near-horizontal surfaces (vertical angle in [0, alpha) or
    (180 - alpha, 180]) get lam * a_norm + (1 - lam) * h_norm; the closed
    middle band [alpha, 180 - alpha] keeps a_norm alone.
    """
    a_deg = np.asarray(a_deg, dtype=np.float64)
    blend = (a_deg < params.alpha_deg) | (a_deg > 180.0 - params.alpha_deg)
    mixed = params.lam * np.asarray(a_norm, dtype=np.float64) + (1.0 - params.lam) * np.asarray(
        h_norm, dtype=np.float64
    )
    return np.where(blend, mixed, a_norm)


def loa(n, theta_deg):
    """Lateral orientation channel: lateral_angle scaled to [0, 255]."""
    return normalize_channel(lateral_angle(n, theta_deg), "angle")


def quantize_u8(values, mask=None) -> np.ndarray:
    """Round half away from zero into uint8; invalid pixels become 0."""
    values = np.asarray(values, dtype=np.float64)
    if mask is not None:
        values = np.where(mask, values, 0.0)
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def _prepare(
    depth: DepthImage,
    normals: NormalField | None,
    window: int | None,
    estimate_gravity_axis: bool,
):
    cloud = depth_to_cloud(depth)
    if normals is None:
        normals = estimate_normals(cloud, window)
    elif normals.normals.shape[:2] != depth.values.shape:
        raise ValueError("normal field does not match the depth grid")
    if estimate_gravity_axis:
        g = estimate_gravity(normals)
        cloud, normals = gravity_correct(cloud, normals, g)
    return cloud, normals


def encode_rel(
    depth: DepthImage,
    params: EgviaParams = EgviaParams(),
    *,
    normals: NormalField | None = None,
    window: int | None = None,
    estimate_gravity_axis: bool = False,
    red_bounds=None,
    height_bounds=None,
) -> RelImage:
    """Encode a depth panorama into the cylindrical 3-channel image.

    normals defaults to a windowed plane fit; pass an analytic or
    precomputed field to bypass estimation. Gravity correction is opt-in
    (conventional ERP captures are already gravity-aligned).
    """
    cloud, normals = _prepare(depth, normals, window, estimate_gravity_axis)
    theta, phi = grid_angles(depth.grid)
    mask = depth.mask & normals.mask
    if not mask.any():
        return RelImage(channels=np.zeros(mask.shape + (3,), dtype=np.uint8), mask=mask)

    rho = rectified_depth(depth.values, phi)
    red = normalize_channel(rho, "linear", mask, bounds=red_bounds)

    a_deg = vertical_angle(normals.normals)
    a_norm = normalize_channel(a_deg, "angle", mask)
    h = height(cloud.points[..., 2], cloud)
    h_norm = normalize_channel(h, "linear", mask, bounds=height_bounds)
    e = egvia(a_deg, a_norm, h_norm, params)

    la = np.where(mask, loa(normals.normals, theta), 0.0)

    channels = np.stack(
        [quantize_u8(red, mask), quantize_u8(e, mask), quantize_u8(la, mask)], axis=-1
    )
    return RelImage(channels=channels, mask=mask)


def encode_hha(
    depth: DepthImage,
    *,
    normals: NormalField | None = None,
    window: int | None = None,
    estimate_gravity_axis: bool = False,
    disparity_bounds=None,
    height_bounds=None,
) -> HhaImage:
    """Encode the HHA baseline.

    The classic horizontal-disparity channel needs a stereo baseline and
    intrinsics; for panoramas we use normalized inverse radial depth, the
    standard intrinsics-free surrogate (baseline-only, for comparisons).
    """
    cloud, normals = _prepare(depth, normals, window, estimate_gravity_axis)
    mask = depth.mask & normals.mask
    if not mask.any():
        return HhaImage(channels=np.zeros(mask.shape + (3,), dtype=np.uint8), mask=mask)

    disparity = np.where(depth.mask, 1.0 / np.where(depth.mask, depth.values, 1.0), 0.0)
    h1 = normalize_channel(disparity, "linear", mask, bounds=disparity_bounds)
    h = height(cloud.points[..., 2], cloud)
    h2 = normalize_channel(h, "linear", mask, bounds=height_bounds)
    a1 = normalize_channel(vertical_angle(normals.normals), "angle", mask)

    channels = np.stack(
        [quantize_u8(h1, mask), quantize_u8(h2, mask), quantize_u8(a1, mask)], axis=-1
    )
    return HhaImage(channels=channels, mask=mask)


@dataclass
class HaProfile:
    """Per-latitude mean curves of the height and gravity-angle channels."""

    phi_deg: np.ndarray  # (H,) row latitudes
    height_mean: np.ndarray  # (H,) NaN where a row has no valid pixel
    angle_mean: np.ndarray  # (H,)
    pearson_r: float


def _pearson_exactish(h_sums, a_sums, counts) -> float:
    """Pearson r of the row-mean curves.

    For integer-valued channels (the 8-bit contract) the means are exact
    rationals, so exactly collinear curves -- identical or inverted
    channels -- give exactly +-1.0. Constant curves have undefined r (NaN).
    """
    integral = all(float(s).is_integer() for s in (*h_sums, *a_sums))
    if integral:
        a = [Fraction(int(s), int(n)) for s, n in zip(h_sums, counts)]
        b = [Fraction(int(s), int(n)) for s, n in zip(a_sums, counts)]
    else:
        a = [s / n for s, n in zip(h_sums, counts)]
        b = [s / n for s, n in zip(a_sums, counts)]
    count = len(a)
    am = sum(a) / count
    bm = sum(b) / count
    da = [x - am for x in a]
    db = [x - bm for x in b]
    num = sum(x * y for x, y in zip(da, db))
    aa = sum(x * x for x in da)
    bb = sum(y * y for y in db)
    if aa == 0 or bb == 0:
        return float("nan")
    if num * num == aa * bb:
        return 1.0 if num > 0 else -1.0
    return float(num) / math.sqrt(float(aa) * float(bb))


def ha_profile(h2, a1, mask=None) -> HaProfile:
    """Row-wise mean curves of two channels and their Pearson correlation.

    Rows without valid pixels are NaN in the curves and excluded from r.
    """
    h2 = np.asarray(h2, dtype=np.float64)
    a1 = np.asarray(a1, dtype=np.float64)
    if h2.shape != a1.shape or h2.ndim != 2:
        raise ValueError("channels must be two equal-shaped (H, W) arrays")
    if mask is None:
        mask = np.ones(h2.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)

    counts = mask.sum(axis=1)
    h_sums = np.where(mask, h2, 0.0).sum(axis=1)
    a_sums = np.where(mask, a1, 0.0).sum(axis=1)
    h_mean = np.where(counts > 0, h_sums / np.maximum(counts, 1), np.nan)
    a_mean = np.where(counts > 0, a_sums / np.maximum(counts, 1), np.nan)

    rows = counts > 0
    if rows.sum() < 2:
        raise ValueError("need at least two rows with valid pixels")
    r = _pearson_exactish(h_sums[rows], a_sums[rows], counts[rows])

    height_px = h2.shape[0]
    phi = 90.0 - (np.arange(height_px, dtype=np.float64) + 0.5) / height_px * 180.0
    return HaProfile(phi_deg=phi, height_mean=h_mean, angle_mean=a_mean, pearson_r=r)
