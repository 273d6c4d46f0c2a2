"""Analytic test scenes rendered as ERP depth panoramas.

Each scene is ray-cast exactly from the camera at the origin, so depth,
normals, and labels are closed-form ground truth (no estimation anywhere).
Useful as oracles: encoder outputs can be checked against per-pixel scalar
math on the same geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import DepthImage, NormalField
from .coords import GridSpec, grid_dirs

LABEL_FLOOR = 0
LABEL_CEILING = 1
LABEL_WALL = 2
LABEL_NONE = 255  # no surface along the ray; use as ignore_index


@dataclass
class SynthScene:
    depth: DepthImage
    normals: NormalField  # analytic, valid wherever depth is valid
    labels: np.ndarray  # (H, W) uint8


def floor_plane(grid: GridSpec, floor_z: float = -1.6) -> SynthScene:
    """Infinite horizontal plane below the camera; rays at or above the
    horizon never hit and are invalid."""
    if floor_z >= 0:
        raise ValueError("floor must be below the camera (floor_z < 0)")
    dirs = grid_dirs(grid)
    dz = dirs[..., 2]
    hit = dz < 0
    with np.errstate(divide="ignore"):
        t = np.where(hit, floor_z / np.where(hit, dz, -1.0), 0.0)

    normals = np.zeros(grid.shape + (3,))
    normals[..., 2] = np.where(hit, 1.0, 0.0)
    labels = np.where(hit, LABEL_FLOOR, LABEL_NONE).astype(np.uint8)
    return SynthScene(
        depth=DepthImage(values=t, mask=hit),
        normals=NormalField(normals=normals, mask=hit.copy()),
        labels=labels,
    )


def cylinder_wall(grid: GridSpec, radius: float = 3.0) -> SynthScene:
    """Infinite vertical cylinder around the camera axis; normals point
    radially inward. Only exact pole rays (none at pixel centers) miss."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    dirs = grid_dirs(grid)
    rho_dir = np.hypot(dirs[..., 0], dirs[..., 1])
    hit = rho_dir > 0
    t = np.where(hit, radius / np.where(hit, rho_dir, 1.0), 0.0)

    normals = np.zeros(grid.shape + (3,))
    safe = np.where(hit, rho_dir, 1.0)
    normals[..., 0] = np.where(hit, -dirs[..., 0] / safe, 0.0)
    normals[..., 1] = np.where(hit, -dirs[..., 1] / safe, 0.0)
    labels = np.where(hit, LABEL_WALL, LABEL_NONE).astype(np.uint8)
    return SynthScene(
        depth=DepthImage(values=t, mask=hit),
        normals=NormalField(normals=normals, mask=hit.copy()),
        labels=labels,
    )


def _room_exit(dirs: np.ndarray, hx: float, hy: float, z_lo: float, z_hi: float):
    """Exit distance and face index (0:x, 1:y, 2:z) for rays leaving an
    axis-aligned box that contains the origin."""
    with np.errstate(divide="ignore"):
        tx = np.where(dirs[..., 0] != 0, hx / np.abs(dirs[..., 0]), np.inf)
        ty = np.where(dirs[..., 1] != 0, hy / np.abs(dirs[..., 1]), np.inf)
        zb = np.where(dirs[..., 2] > 0, z_hi, z_lo)
        tz = np.where(dirs[..., 2] != 0, zb / dirs[..., 2], np.inf)
    t_all = np.stack([tx, ty, tz], axis=-1)
    face = np.argmin(t_all, axis=-1)
    t = np.take_along_axis(t_all, face[..., None], axis=-1)[..., 0]
    return t, face


def box_room(
    grid: GridSpec,
    size_x: float = 4.0,
    size_y: float = 6.0,
    height: float = 3.0,
    floor_z: float | None = None,
    obstacles: list[tuple[float, float, float, float, float, float]] | None = None,
) -> SynthScene:
    """Axis-aligned room around the camera, optionally with solid boxes.

    floor_z defaults to -height/2 (camera mid-height). Obstacles are
    (x0, x1, y0, y1, z0, z1) boxes that must not contain the origin; their
    camera-facing faces occlude the room walls.
    """
    if size_x <= 0 or size_y <= 0 or height <= 0:
        raise ValueError("degenerate room dimensions")
    if floor_z is None:
        floor_z = -height / 2.0
    z_hi = floor_z + height
    if not (floor_z < 0 < z_hi):
        raise ValueError("camera must be inside the room (floor_z < 0 < floor_z + height)")

    dirs = grid_dirs(grid)
    t, face = _room_exit(dirs, size_x / 2.0, size_y / 2.0, floor_z, z_hi)

    normals = np.zeros(grid.shape + (3,))
    labels = np.full(grid.shape, LABEL_WALL, dtype=np.uint8)
    for axis in (0, 1):
        on = face == axis
        normals[..., axis] = np.where(on, -np.sign(dirs[..., axis]), normals[..., axis])
    on_z = face == 2
    going_up = dirs[..., 2] > 0
    normals[..., 2] = np.where(on_z, np.where(going_up, -1.0, 1.0), normals[..., 2])
    labels[on_z & going_up] = LABEL_CEILING
    labels[on_z & ~going_up] = LABEL_FLOOR

    for box in obstacles or []:
        t_obs, n_obs = _box_entry(dirs, box)
        closer = np.isfinite(t_obs) & (t_obs < t)
        t = np.where(closer, t_obs, t)
        normals = np.where(closer[..., None], n_obs, normals)
        nz = n_obs[..., 2]
        labels = np.where(
            closer, np.where(nz > 0.5, LABEL_FLOOR, np.where(nz < -0.5, LABEL_CEILING, LABEL_WALL)), labels
        ).astype(np.uint8)

    mask = np.isfinite(t) & (t > 0)
    return SynthScene(
        depth=DepthImage(values=np.where(mask, t, 0.0), mask=mask),
        normals=NormalField(normals=np.where(mask[..., None], normals, 0.0), mask=mask.copy()),
        labels=np.where(mask, labels, LABEL_NONE).astype(np.uint8),
    )


def _box_entry(dirs: np.ndarray, box):
    """Entry distance and camera-facing normal for rays from the origin
    hitting a solid axis-aligned box (origin outside), inf where missed."""
    x0, x1, y0, y1, z0, z1 = box
    if not (x0 < x1 and y0 < y1 and z0 < z1):
        raise ValueError("degenerate obstacle box")
    if x0 <= 0 <= x1 and y0 <= 0 <= y1 and z0 <= 0 <= z1:
        raise ValueError("obstacle must not contain the camera")

    lo = np.array([x0, y0, z0])
    hi = np.array([x1, y1, z1])
    t_near = np.full(dirs.shape[:-1], -np.inf)
    t_far = np.full(dirs.shape[:-1], np.inf)
    near_axis = np.zeros(dirs.shape[:-1], dtype=np.int64)
    for axis in range(3):
        d = dirs[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(d != 0, lo[axis] / d, -np.inf)
            t2 = np.where(d != 0, hi[axis] / d, np.inf)
        parallel_miss = (d == 0) & ((lo[axis] > 0) | (hi[axis] < 0))
        t_enter = np.minimum(t1, t2)
        t_exit = np.maximum(t1, t2)
        take = t_enter > t_near
        near_axis = np.where(take, axis, near_axis)
        t_near = np.maximum(t_near, t_enter)
        t_far = np.minimum(t_far, t_exit)
        t_far = np.where(parallel_miss, -np.inf, t_far)

    hit = (t_near <= t_far) & (t_near > 0)
    t = np.where(hit, t_near, np.inf)

    normals = np.zeros(dirs.shape)
    for axis in range(3):
        on = hit & (near_axis == axis)
        normals[..., axis] = np.where(on, -np.sign(dirs[..., axis]), normals[..., axis])
    return t, normals


DEFAULT_FURNITURE = [
    (0.5, 1.5, 0.8, 2.2, None, 0.75),  # table block on the floor
    (-1.8, -1.2, -2.6, -1.4, None, 1.8),  # cabinet against the wall
]


def furnished_room(
    grid: GridSpec,
    size_x: float = 4.0,
    size_y: float = 6.0,
    height: float = 3.0,
    floor_z: float | None = None,
) -> SynthScene:
    """Box room with a few solid blocks standing on the floor."""
    if floor_z is None:
        floor_z = -height / 2.0
    obstacles = [
        (x0, x1, y0, y1, floor_z, floor_z + h) for (x0, x1, y0, y1, _, h) in DEFAULT_FURNITURE
    ]
    return box_room(grid, size_x, size_y, height, floor_z=floor_z, obstacles=obstacles)


SCENE_KINDS = {
    "floor_plane": floor_plane,
    "cylinder_wall": cylinder_wall,
    "box_room": box_room,
    "furnished_room": furnished_room,
}


def synth_scene(kind: str, grid: GridSpec, **dims) -> SynthScene:
    """Build a named analytic scene; dims are kind-specific keyword args."""
    try:
        builder = SCENE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown scene kind {kind!r}; choose from {sorted(SCENE_KINDS)}")
    return builder(grid, **dims)
