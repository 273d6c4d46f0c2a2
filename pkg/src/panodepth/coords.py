"""Intrinsics-free coordinate transforms for equirectangular panoramas.

Conventions (fixed throughout the package):
  - Image: u = pixel column (positive right), v = pixel row (positive down),
    origin at the upper-left corner. Pixel centers sit at integer (u, v);
    the continuous image extent is [-0.5, W-0.5] x [-0.5, H-0.5].
  - Camera cartesian xyz: right-handed, camera at the origin, +y from the
    camera toward the pixel at (theta=0, phi=0), +z up (gravity points -z).
  - Spherical: theta = azimuth in degrees in [-180, 180), measured so that
    theta=0 is +y and theta=90 is +x; phi = elevation in degrees in
    [-90, 90], phi=+90 at the zenith.
  - Cylindrical: rho = horizontal distance to the vertical axis through the
    camera, same theta as spherical, z = height.

All public angles are degrees. The ERP pixel map is the plain linear
scaling of (theta, phi) onto the grid with half-pixel centering, so the
grid is symmetric about the equator row.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Pixel dimensions of a full 360x180 equirectangular raster."""

    width: int
    height: int

    def __post_init__(self):
        if self.height < 1 or self.width < 2:
            raise ValueError(f"grid too small: {self.width}x{self.height}")
        if self.width != 2 * self.height:
            raise ValueError(
                f"equirectangular grid needs width == 2*height, got {self.width}x{self.height}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width), the numpy array shape."""
        return (self.height, self.width)

    @classmethod
    def of(cls, array: np.ndarray) -> "GridSpec":
        """GridSpec matching the first two axes of an image array."""
        return cls(width=array.shape[1], height=array.shape[0])


def wrap_theta(theta):
    """Wrap azimuth(s) in degrees into [-180, 180)."""
    return (np.asarray(theta, dtype=np.float64) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class SphericalDir:
    """A direction (or grid of directions) as azimuth/elevation in degrees.

    theta wraps modulo 360 into [-180, 180); phi outside [-90, 90] is a
    construction error. Fields may be scalars or equal-shaped arrays.
    """

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = wrap_theta(self.theta)
        phi = np.asarray(self.phi, dtype=np.float64)
        if np.any(phi < -90.0) or np.any(phi > 90.0):
            raise ValueError("elevation phi outside [-90, 90] degrees")
        object.__setattr__(self, "theta", theta if theta.ndim else float(theta))
        object.__setattr__(self, "phi", phi if phi.ndim else float(phi))


def unit_vector(v, tol: float = 1e-9) -> np.ndarray:
    """Validate that v (shape (..., 3)) has unit norm within tol."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise ValueError("vector is not unit-norm within tolerance")
    return v


def pixel_to_sph(u, v, grid: GridSpec) -> SphericalDir:
    """Map (sub)pixel coordinates to spherical direction.

    u wraps horizontally; v outside the vertical image extent
    [-0.5, H-0.5] is an error. The top row maps near phi=+90 and the
    left column near theta=-180.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < -0.5) or np.any(v > grid.height - 0.5):
        raise ValueError("pixel row v outside the vertical image extent")
    theta = (u + 0.5) / grid.width * 360.0 - 180.0
    phi = 90.0 - (v + 0.5) / grid.height * 180.0
    return SphericalDir(theta=theta, phi=phi)


def sph_to_pixel(d: SphericalDir, grid: GridSpec):
    """Inverse of pixel_to_sph; u canonicalized into [0, W) by wrap."""
    u = ((np.asarray(d.theta) + 180.0) / 360.0 * grid.width - 0.5) % grid.width
    v = (90.0 - np.asarray(d.phi)) / 180.0 * grid.height - 0.5
    return u, v


def sph_to_dir(d: SphericalDir) -> np.ndarray:
    """Unit direction vector(s) (..., 3) for spherical direction(s).

    (x, y, z) = (sin(theta)cos(phi), cos(theta)cos(phi), sin(phi)), so
    theta=0, phi=0 gives +y and phi=90 gives +z.
    """
    t = np.radians(np.asarray(d.theta, dtype=np.float64))
    p = np.radians(np.asarray(d.phi, dtype=np.float64))
    cp = np.cos(p)
    return np.stack([np.sin(t) * cp, np.cos(t) * cp, np.sin(p)], axis=-1)


def dir_to_sph(v) -> SphericalDir:
    """Spherical direction of unit vector(s) v (..., 3).

    At the exact poles (x = y = 0) theta is 0 by convention.
    """
    v = np.asarray(v, dtype=np.float64)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    phi = np.degrees(np.arcsin(np.clip(z, -1.0, 1.0)))
    theta = np.degrees(np.arctan2(x, y))
    theta = np.where((x == 0.0) & (y == 0.0), 0.0, theta)
    return SphericalDir(theta=theta, phi=phi)


def cart_to_cyl(p):
    """Cartesian point(s) (..., 3) to cylindrical (rho, theta_deg, z).

    On the vertical axis (rho = 0) theta is 0 by convention.
    """
    p = np.asarray(p, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    rho = np.hypot(x, y)
    theta = np.degrees(np.arctan2(x, y))
    theta = np.where(rho == 0.0, 0.0, theta)
    if rho.ndim == 0:
        return float(rho), float(theta), float(z)
    return rho, theta, z


def cyl_to_cart(rho, theta_deg, z) -> np.ndarray:
    """Cylindrical coordinates back to cartesian point(s) (..., 3)."""
    rho = np.asarray(rho, dtype=np.float64)
    t = np.radians(np.asarray(theta_deg, dtype=np.float64))
    z = np.asarray(z, dtype=np.float64)
    return np.stack(
        [rho * np.sin(t), rho * np.cos(t), np.broadcast_to(z, rho.shape)], axis=-1
    )


@lru_cache(maxsize=8)
def _grid_angles_cached(width: int, height: int):
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    theta = (u + 0.5) / width * 360.0 - 180.0
    phi = 90.0 - (v + 0.5) / height * 180.0
    theta_g = np.broadcast_to(theta, (height, width)).copy()
    phi_g = np.broadcast_to(phi[:, None], (height, width)).copy()
    theta_g.flags.writeable = False
    phi_g.flags.writeable = False
    return theta_g, phi_g


def grid_angles(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) in degrees at every pixel center, each (H, W), read-only."""
    return _grid_angles_cached(grid.width, grid.height)


@lru_cache(maxsize=8)
def _grid_dirs_cached(width: int, height: int) -> np.ndarray:
    theta, phi = _grid_angles_cached(width, height)
    dirs = sph_to_dir(SphericalDir(theta=theta, phi=phi))
    dirs.flags.writeable = False
    return dirs


def grid_dirs(grid: GridSpec) -> np.ndarray:
    """Unit view directions at every pixel center, (H, W, 3), read-only."""
    return _grid_dirs_cached(grid.width, grid.height)
