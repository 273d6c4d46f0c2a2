"""Depth panoramas to gravity-corrected point clouds and normal fields.

The lift needs no camera intrinsics: each pixel's view direction comes
straight from its ERP angles, and the 3D point is that direction scaled by
the radial depth. Normals come from a windowed least-squares plane fit on
the grid (horizontal wrap, no vertical wrap), oriented toward the camera.

Most ERP datasets are captured with the panorama axis already parallel to
gravity, so gravity estimation is opt-in: the default correction is the
identity rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .coords import GridSpec, grid_dirs, unit_vector

# Rows closer to the poles than this are excluded from normal fitting;
# ERP stretching makes window fits degenerate there.
POLE_EXCLUSION_DEG = 88.0

DOWN = np.array([0.0, 0.0, -1.0])


def _validate_image_pair(values: np.ndarray, mask: np.ndarray, depth3: int | None):
    expect = values.shape[:2] if depth3 is None else values.shape[:-1]
    if mask.shape != expect:
        raise ValueError(f"mask shape {mask.shape} does not match values {values.shape}")
    if depth3 is not None and (values.ndim != 3 or values.shape[-1] != depth3):
        raise ValueError(f"expected (H, W, {depth3}) array, got {values.shape}")


@dataclass
class DepthImage:
    """Per-pixel radial distance in meters on an ERP grid, with validity mask."""

    values: np.ndarray  # (H, W) float64, meters
    mask: np.ndarray | None = None  # (H, W) bool, True = valid; default: finite and > 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("depth must be a single-channel (H, W) image")
        if self.mask is None:
            self.mask = np.isfinite(self.values) & (self.values > 0)
        self.mask = np.asarray(self.mask, dtype=bool)
        _validate_image_pair(self.values, self.mask, None)
        valid = self.values[self.mask]
        if valid.size and (not np.all(np.isfinite(valid)) or np.any(valid <= 0)):
            raise ValueError("valid depths must be finite and > 0")

    @property
    def grid(self) -> GridSpec:
        return GridSpec.of(self.values)


@dataclass
class PointCloud:
    """Grid-aligned 3D points in gravity-corrected camera coordinates."""

    points: np.ndarray  # (H, W, 3) float64, meters
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        _validate_image_pair(self.points, self.mask, 3)

    @property
    def grid(self) -> GridSpec:
        return GridSpec.of(self.points)

    def min_valid_z(self) -> float:
        z = self.points[..., 2][self.mask]
        if z.size == 0:
            raise ValueError("point cloud has no valid points")
        return float(z.min())


@dataclass
class NormalField:
    """Grid-aligned unit surface normals, oriented toward the camera."""

    normals: np.ndarray  # (H, W, 3) float64
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        _validate_image_pair(self.normals, self.mask, 3)

    @property
    def grid(self) -> GridSpec:
        return GridSpec.of(self.normals)


@dataclass
class GravityEstimate:
    """Estimated gravity axis and the rotation aligning it to (0, 0, -1).

    score in [0, 1] reports how well the normal field separates into
    gravity-parallel and gravity-orthogonal sets; values below ~0.9 mean
    the estimate is low-confidence (e.g. unstructured scenes).
    """

    g_hat: np.ndarray  # (3,) unit vector
    rotation: np.ndarray  # (3, 3) orthonormal, det +1
    score: float = 1.0

    def __post_init__(self):
        self.g_hat = unit_vector(np.asarray(self.g_hat, dtype=np.float64).reshape(3))
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-9:
            raise ValueError("rotation must have det +1")
        if np.linalg.norm(self.rotation @ self.g_hat - DOWN) > 1e-9:
            raise ValueError("rotation must map g_hat to (0, 0, -1)")

    @classmethod
    def identity(cls) -> "GravityEstimate":
        return cls(g_hat=DOWN.copy(), rotation=np.eye(3))


def depth_to_cloud(depth: DepthImage) -> PointCloud:
    """Lift radial depth to 3D points along per-pixel view directions.

    Invalid depth pixels yield zero points flagged invalid in the mask.
    """
    dirs = grid_dirs(depth.grid)
    d = np.where(depth.mask, depth.values, 0.0)
    return PointCloud(points=d[..., None] * dirs, mask=depth.mask.copy())


def default_normal_window(grid: GridSpec) -> int:
    """Fit window in pixels: 7 at 2048 rows, scaled proportionally, odd, >= 3."""
    w = int(round(7.0 * grid.height / 2048.0))
    if w % 2 == 0:
        w += 1
    return max(w, 3)


def _window_sums(arr: np.ndarray, mask: np.ndarray, window: int) -> np.ndarray:
    """Box sums of arr*mask over window x window, wrapping left/right only."""
    a = np.where(mask[..., None] if arr.ndim == 3 else mask, arr, 0.0)
    mode = ("constant", "wrap")
    if a.ndim == 3:
        out = np.empty_like(a)
        for c in range(a.shape[-1]):
            out[..., c] = ndimage.uniform_filter(a[..., c], size=window, mode=mode, cval=0.0)
        return out * (window * window)
    return ndimage.uniform_filter(a, size=window, mode=mode, cval=0.0) * (window * window)


def estimate_normals(cloud: PointCloud, window: int | None = None) -> NormalField:
    """Per-pixel unit normals via windowed least-squares plane fit.

    The neighborhood wraps horizontally and clamps vertically. A pixel gets
    a valid normal only if it is itself valid, has >= 3 valid neighbors,
    the neighborhood is not collinear, and it is not in a pole row
    (|phi| > POLE_EXCLUSION_DEG). Normals are flipped so N . p <= 0.
    """
    grid = cloud.grid
    if window is None:
        window = default_normal_window(grid)
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")

    pts = cloud.points
    maskf = cloud.mask.astype(np.float64)
    n = _window_sums(maskf, cloud.mask, window)
    s = _window_sums(pts, cloud.mask, window)  # (H, W, 3) sums of p

    # Second moments, 6 unique entries of sum(p p^T).
    prods = np.stack(
        [
            pts[..., 0] * pts[..., 0],
            pts[..., 1] * pts[..., 1],
            pts[..., 2] * pts[..., 2],
            pts[..., 0] * pts[..., 1],
            pts[..., 0] * pts[..., 2],
            pts[..., 1] * pts[..., 2],
        ],
        axis=-1,
    )
    q = _window_sums(prods, cloud.mask, window)

    n_safe = np.maximum(n, 1.0)
    mean = s / n_safe[..., None]
    cov = np.empty(pts.shape[:2] + (3, 3), dtype=np.float64)
    cov[..., 0, 0] = q[..., 0] / n_safe - mean[..., 0] * mean[..., 0]
    cov[..., 1, 1] = q[..., 1] / n_safe - mean[..., 1] * mean[..., 1]
    cov[..., 2, 2] = q[..., 2] / n_safe - mean[..., 2] * mean[..., 2]
    cov[..., 0, 1] = cov[..., 1, 0] = q[..., 3] / n_safe - mean[..., 0] * mean[..., 1]
    cov[..., 0, 2] = cov[..., 2, 0] = q[..., 4] / n_safe - mean[..., 0] * mean[..., 2]
    cov[..., 1, 2] = cov[..., 2, 1] = q[..., 5] / n_safe - mean[..., 1] * mean[..., 2]

    # Round-off can leave tiny negative counts; valid fits need >= 3 points.
    enough = n > 2.5
    usable = cloud.mask & enough
    phi_abs = np.abs(90.0 - (np.arange(grid.height, dtype=np.float64) + 0.5) / grid.height * 180.0)
    usable &= (phi_abs <= POLE_EXCLUSION_DEG)[:, None]

    cov[~usable] = np.eye(3)
    w, v = np.linalg.eigh(cov)
    normals = v[..., :, 0]  # eigenvector of smallest eigenvalue

    # Collinear neighborhoods: second eigenvalue vanishes relative to largest.
    degenerate = w[..., 1] <= 1e-12 * np.maximum(w[..., 2], 1e-300)
    valid = usable & ~degenerate

    # Orient toward the camera (camera at origin, so against the point ray).
    flip = np.sum(normals * pts, axis=-1) > 0
    normals = np.where(flip[..., None], -normals, normals)
    normals = np.where(valid[..., None], normals, 0.0)
    return NormalField(normals=normals, mask=valid)


def _rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation matrix taking unit vector a to unit vector b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    k = np.cross(a, b)
    s = np.linalg.norm(k)
    c = float(np.dot(a, b))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # 180 degrees: rotate about any axis perpendicular to a.
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp /= np.linalg.norm(perp)
        return 2.0 * np.outer(perp, perp) - np.eye(3)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + kx + kx @ kx * ((1.0 - c) / (s * s))


def estimate_gravity(normals: NormalField, iterations: int = 10) -> GravityEstimate:
    """Iteratively refine the gravity axis from a normal field.

    Starting from straight down, each pass splits normals into
    near-parallel (< 45 degrees to the axis, modulo sign) and
    near-orthogonal sets, then re-solves for the axis that keeps parallel
    normals aligned and orthogonal normals perpendicular (smallest
    eigenvector of the contrast of scatter matrices).
    """
    nrm = normals.normals[normals.mask]
    if nrm.shape[0] < max(1, int(0.01 * normals.mask.size)):
        raise ValueError("insufficient valid normals for gravity estimation")

    g = DOWN.copy()
    for _ in range(iterations):
        cos = nrm @ g
        par = cos * cos > 0.5  # within 45 degrees of the axis (either sign)
        scatter_par = nrm[par].T @ nrm[par]
        scatter_orth = nrm[~par].T @ nrm[~par]
        _, v = np.linalg.eigh(scatter_orth - scatter_par)
        g_new = v[:, 0]
        if np.dot(g_new, g) < 0:
            g_new = -g_new
        g = g_new

    cos = nrm @ g
    par = cos * cos > 0.5
    score = float((np.sum(cos[par] ** 2) + np.sum(1.0 - cos[~par] ** 2)) / nrm.shape[0])
    return GravityEstimate(g_hat=g, rotation=_rotation_between(g, DOWN), score=score)


def gravity_correct(
    cloud: PointCloud, normals: NormalField, g: GravityEstimate
) -> tuple[PointCloud, NormalField]:
    """Rotate points and normals so gravity points along -z. Masks unchanged."""
    r = g.rotation
    if np.array_equal(r, np.eye(3)):
        return (
            PointCloud(points=cloud.points.copy(), mask=cloud.mask.copy()),
            NormalField(normals=normals.normals.copy(), mask=normals.mask.copy()),
        )
    return (
        PointCloud(points=cloud.points @ r.T, mask=cloud.mask.copy()),
        NormalField(normals=normals.normals @ r.T, mask=normals.mask.copy()),
    )
