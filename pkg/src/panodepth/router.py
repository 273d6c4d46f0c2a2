"""Region slicing and gated fusion routing on the ERP cylinder surface.

Regions are square windows sampled on the cylinder side surface: rows grow
outward from the equator so the layout is symmetric about it (clamped flush
at the top/bottom edges, never wrapped vertically), columns march around
the circumference and may wrap across the left/right image seam.

Each region picks a fusion strategy per cell through a gate: soft
(tempered softmax) during warm-up, hard one-hot afterwards, with an
early-stop constraint that forces all cells after the first "no fusion"
decision to "no fusion" as well. Region outputs are summed back onto the
full canvas over their (possibly wrapping) footprints.

Fusion operations are pluggable callables on feature maps; no networks are
trained here.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .coords import GridSpec


@dataclass(frozen=True)
class Region:
    """One square window: grid position (row, col) and pixel start corner.

    u_start may place the region across the right edge, in which case it
    wraps to the left side; v_start never wraps.
    """

    row: int
    col: int
    u_start: int
    v_start: int


@dataclass(frozen=True)
class RegionGrid:
    """An m x n layout of overlapping square regions on an ERP grid."""

    grid: GridSpec
    m: int
    n: int
    region_size: int
    stride: int
    regions: tuple[Region, ...]


def slice_regions(grid: GridSpec, m: int, n: int, region_size: int, stride: int) -> RegionGrid:
    """Place m x n overlapping square regions, equator-out and seam-wrapping.

    Row starts are generated outward from the equator-centered row with the
    given stride (paired symmetrically for even m) and clamped into
    [0, H - size]; the returned order is row-major from the top. Column
    starts are j * stride modulo W for j = 0..n-1.
    """
    if stride <= 0:
        raise ValueError("stride must be positive")
    if region_size <= 0 or region_size > grid.height:
        raise ValueError("region_size must be in [1, image height]")
    if m < 1 or n < 1:
        raise ValueError("need at least one row and one column of regions")

    center = (grid.height - region_size) / 2.0
    offsets = []
    if m % 2 == 1:
        offsets.append(0.0)
        pair_shifts = [(k + 1) * stride for k in range((m - 1) // 2)]
    else:
        pair_shifts = [stride / 2.0 + k * stride for k in range(m // 2)]
    for shift in pair_shifts:
        offsets.extend([-shift, shift])

    v_starts = sorted(
        int(np.clip(round(center + off), 0, grid.height - region_size)) for off in offsets
    )
    u_starts = [(j * stride) % grid.width for j in range(n)]

    regions = tuple(
        Region(row=ri, col=ci, u_start=u, v_start=v)
        for ri, v in enumerate(v_starts)
        for ci, u in enumerate(u_starts)
    )
    return RegionGrid(grid=grid, m=m, n=n, region_size=region_size, stride=stride, regions=regions)


def gate_soft(logits, temperature: float, gumbel_rng: np.random.Generator | None = None) -> np.ndarray:
    """Tempered softmax over fusion-option logits.

    Optionally injects seeded Gumbel noise into the logits (off by
    default); entries are strictly positive and sum to 1.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if gumbel_rng is not None:
        logits = logits + gumbel_rng.gumbel(size=logits.shape)
    scaled = logits / temperature
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=-1, keepdims=True)


def gate_hard(logits) -> np.ndarray:
    """One-hot selection at the argmax; ties break toward the lower index."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ValueError("gate_hard expects a single logit vector")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    out = np.zeros_like(logits)
    out[np.argmax(logits)] = 1.0
    return out


@dataclass(frozen=True)
class GatePattern:
    """Per-cell binary fusion decisions, monotone non-increasing.

    1 = fuse both modalities in that cell, 0 = single-modality only; once a
    cell decides 0 every later cell must be 0 (early stop).
    """

    decisions: tuple[int, ...]

    def __post_init__(self):
        d = tuple(int(x) for x in self.decisions)
        if len(d) < 1:
            raise ValueError("need at least one fusion cell")
        if any(x not in (0, 1) for x in d):
            raise ValueError("decisions must be binary")
        if any(earlier < later for earlier, later in zip(d, d[1:])):
            raise ValueError("pattern violates early stop (must be monotone non-increasing)")
        object.__setattr__(self, "decisions", d)

    @property
    def num_fused(self) -> int:
        return sum(self.decisions)

    def as_string(self) -> str:
        return "".join(str(x) for x in self.decisions)


def valid_patterns(num_cells: int) -> list[GatePattern]:
    """All num_cells + 1 early-stop-consistent patterns, fewest-fused first."""
    return [
        GatePattern(tuple([1] * k + [0] * (num_cells - k))) for k in range(num_cells + 1)
    ]


def apply_early_stop(raw: Sequence[int]) -> GatePattern:
    """Force every decision after the first 0 to 0 (prefix conjunction)."""
    raw = [int(x) for x in raw]
    if len(raw) < 1:
        raise ValueError("need at least one decision")
    if any(x not in (0, 1) for x in raw):
        raise ValueError("raw decisions must be binary")
    out = []
    alive = 1
    for x in raw:
        alive &= x
        out.append(alive)
    return GatePattern(tuple(out))


FusionOp = Callable[[np.ndarray, np.ndarray], np.ndarray]


def fuse_cell(
    x_rgb: np.ndarray,
    x_d: np.ndarray,
    prob: Sequence[float],
    ops: Sequence[FusionOp],
) -> np.ndarray:
    """Probability-weighted mixture of fusion operations on two feature maps.

    Ops with exactly zero probability are never evaluated, so a one-hot
    prob returns the selected op's output unchanged.
    """
    x_rgb = np.asarray(x_rgb)
    x_d = np.asarray(x_d)
    if x_rgb.shape != x_d.shape:
        raise ValueError("modality feature maps must share a grid")
    prob = np.asarray(prob, dtype=np.float64)
    if len(ops) != prob.shape[-1]:
        raise ValueError("need one fusion op per probability entry")
    if np.any(prob < 0) or abs(prob.sum() - 1.0) > 1e-9:
        raise ValueError("prob must be a probability vector summing to 1")

    active = [(p, op) for p, op in zip(prob, ops) if p != 0.0]
    if len(active) == 1 and active[0][0] == 1.0:
        out = np.asarray(active[0][1](x_rgb, x_d))
        if out.shape != x_rgb.shape:
            raise ValueError("fusion op output grid mismatch")
        return out
    acc = np.zeros(x_rgb.shape, dtype=np.float64)
    for p, op in active:
        out = np.asarray(op(x_rgb, x_d))
        if out.shape != x_rgb.shape:
            raise ValueError("fusion op output grid mismatch")
        acc += p * out
    return acc


def recombine(
    region_outputs: Iterable[tuple[Region, np.ndarray]],
    grid: GridSpec,
    region_size: int,
    normalize: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Sum region feature maps back onto the full canvas.

    Wrapping regions contribute to both horizontal ends. Returns
    (canvas, coverage) where coverage counts contributing regions per
    pixel; normalize=True divides the canvas by coverage where > 0
    (the default is the plain overlap sum).
    """
    if region_size > grid.width:
        raise ValueError("region wider than the canvas")
    region_outputs = list(region_outputs)
    channels = None
    for _, out in region_outputs:
        expect2 = (region_size, region_size)
        if out.shape[:2] != expect2 or out.ndim not in (2, 3):
            raise ValueError(f"region map shape {out.shape} != region size {region_size}")
        c = out.shape[2] if out.ndim == 3 else None
        if channels is None:
            channels = c
        elif channels != c:
            raise ValueError("region maps disagree on channel count")

    shape = grid.shape if channels is None else grid.shape + (channels,)
    canvas = np.zeros(shape, dtype=np.float64)
    coverage = np.zeros(grid.shape, dtype=np.int64)

    for region, out in region_outputs:
        v0, v1 = region.v_start, region.v_start + region_size
        if v0 < 0 or v1 > grid.height:
            raise ValueError("region extends past the top/bottom edge")
        u0 = region.u_start % grid.width
        first = min(region_size, grid.width - u0)
        canvas[v0:v1, u0 : u0 + first] += out[:, :first]
        coverage[v0:v1, u0 : u0 + first] += 1
        if first < region_size:
            rest = region_size - first
            canvas[v0:v1, :rest] += out[:, first:]
            coverage[v0:v1, :rest] += 1

    if normalize:
        cov = np.maximum(coverage, 1)
        canvas = canvas / (cov[..., None] if channels is not None else cov)
    return canvas, coverage


def temperature_schedule(epoch: int, total_soft_epochs: int) -> float:
    """Exponential decay from 1.0 at epoch 0 to 0.1 at the last soft epoch."""
    if total_soft_epochs < 2:
        raise ValueError("need at least two soft epochs to pin both endpoints")
    if not 0 <= epoch < total_soft_epochs:
        raise ValueError("epoch out of range")
    return float(0.1 ** (epoch / (total_soft_epochs - 1)))


def gate_usage_report(
    records: Iterable[tuple[object, GatePattern | Sequence[int]]],
) -> dict[object, dict[str, float]]:
    """Per-region selection frequency of each valid gate pattern.

    records: (region_id, pattern) observations, patterns all the same
    length; invalid (non-monotone) patterns raise. Returns, per region, the
    percentage of observations for every valid pattern (rows sum to 100).
    """
    counts: dict[object, Counter] = {}
    num_cells = None
    total_records = 0
    for region_id, pattern in records:
        if not isinstance(pattern, GatePattern):
            pattern = GatePattern(tuple(pattern))
        if num_cells is None:
            num_cells = len(pattern.decisions)
        elif len(pattern.decisions) != num_cells:
            raise ValueError("gate records disagree on the number of cells")
        counts.setdefault(region_id, Counter())[pattern.as_string()] += 1
        total_records += 1
    if total_records == 0:
        raise ValueError("no gate records")

    columns = [p.as_string() for p in valid_patterns(num_cells)]
    report: dict[object, dict[str, float]] = {}
    for region_id, counter in counts.items():
        n = sum(counter.values())
        report[region_id] = {c: 100.0 * counter.get(c, 0) / n for c in columns}
    return report
