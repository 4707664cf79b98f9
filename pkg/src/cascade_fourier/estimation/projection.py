"""
Projections of curve measures onto lines.

The level-n curve measure is pushed forward under x -> x . theta onto a
dyadic grid of 2^out_levels bins spanning the projected range. Each cell's
mass is spread over midpoint sub-samples of its parameter interval, dense
enough that consecutive samples land at most 1/16 of a bin apart.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from eliot import start_action

from cascade_fourier.cascade import CascadeRealization, is_extinct
from cascade_fourier.curves import CurveSpec
from cascade_fourier.errors import AllMassZero, DimensionMismatch, InvalidParams
from cascade_fourier.estimation.fitting import DecayFit, fit_linear

MAX_OUT_LEVELS = 24
SAMPLES_PER_BIN = 16
CHUNK_ELEMENTS = 2**22


@dataclass(frozen=True, eq=False)
class ProjectedMeasure:
    """Bin masses of a projection on [lo, hi], finest level out_levels."""

    theta: Tuple[float, float]
    lo: float
    hi: float
    out_levels: int
    masses: np.ndarray

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.masses.size

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))

    def coarsen(self, level: int) -> np.ndarray:
        """Masses of the 2^level dyadic bins."""
        if not 0 <= level <= self.out_levels:
            raise InvalidParams(f"level {level} outside [0, {self.out_levels}]")
        return self.masses.reshape(2**level, -1).sum(axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": list(self.theta),
            "lo": self.lo,
            "hi": self.hi,
            "out_levels": self.out_levels,
            "total": self.total,
        }


def _unit(theta: Sequence[float]) -> np.ndarray:
    direction = np.asarray(theta, dtype=np.float64).reshape(-1)
    if direction.shape != (2,):
        raise DimensionMismatch(f"projection direction must be planar, got shape {direction.shape}")
    norm = float(np.hypot(direction[0], direction[1]))
    if not norm > 0:
        raise InvalidParams("projection direction is zero")
    return direction / norm


def _projected_chunks(r: CascadeRealization, c: CurveSpec, direction: np.ndarray, per_cell: int):
    """Yield (projected coordinates, weights) for runs of cells."""
    h = float(r.b) ** -r.depth
    offsets = (np.arange(per_cell) + 0.5) / per_cell * h
    cells = max(1, CHUNK_ELEMENTS // per_cell)
    for first in range(0, r.cell_count, cells):
        idx = np.arange(first, min(first + cells, r.cell_count))
        ts = (idx[:, None] * h + offsets[None, :]).reshape(-1)
        pts = c.position(ts)
        coords = pts[:, 0] * direction[0] + pts[:, 1] * direction[1]
        weights = np.repeat(r.masses[idx] / per_cell, per_cell)
        yield coords, weights


def project_measure(
    r: CascadeRealization,
    c: CurveSpec,
    theta: Sequence[float],
    out_levels: int = 16,
) -> ProjectedMeasure:
    """
    Pushforward of mu_n under x -> x . theta, binned dyadically.

    Raises:
        DimensionMismatch: r is not a d = 1 cascade
        InvalidParams: out_levels outside [1, 24]
    """
    if r.d != 1:
        raise DimensionMismatch(f"projections need a curve measure (d = 1), got d = {r.d}")
    if not 1 <= out_levels <= MAX_OUT_LEVELS:
        raise InvalidParams(f"out_levels must lie in [1, {MAX_OUT_LEVELS}], got {out_levels}")
    direction = _unit(theta)
    bins = 2**out_levels
    h = float(r.b) ** -r.depth

    with start_action(
        action_type="project_measure",
        curve=c.family,
        theta=direction.tolist(),
        depth=r.depth,
        out_levels=out_levels,
    ) as action:
        # the curve has unit speed, so the projected span of one cell is at most h
        coarse = np.linspace(0.0, 1.0, 4097)
        span = c.position(coarse) @ direction
        lo, hi = float(np.min(span)), float(np.max(span))
        pad = (1.0 / 4096) ** 2 * c.kappa_max + 1e-12
        lo, hi = lo - pad, hi + pad
        width = (hi - lo) / bins
        per_cell = max(1, math.ceil(SAMPLES_PER_BIN * h / width))

        masses = np.zeros(bins, dtype=np.float64)
        for coords, weights in _projected_chunks(r, c, direction, per_cell):
            slots = np.clip(np.floor((coords - lo) / width).astype(np.int64), 0, bins - 1)
            masses += np.bincount(slots, weights=weights, minlength=bins)
        action.log(message_type="projection_binned", per_cell=per_cell, lo=lo, hi=hi, total=float(np.sum(masses)))
        return ProjectedMeasure(
            theta=(float(direction[0]), float(direction[1])), lo=lo, hi=hi, out_levels=out_levels, masses=masses
        )


def projected_dim2(pm: ProjectedMeasure, fit_levels: Tuple[int, int] = (8, 14)) -> DecayFit:
    """
    Correlation-dimension slope of a projection: least squares of
    -log2 sum m^2 (normalized masses) against bin level.
    """
    first, last = fit_levels
    if not 0 <= first < last <= pm.out_levels:
        raise InvalidParams(f"fit levels {fit_levels} must satisfy 0 <= first < last <= {pm.out_levels}")
    total = pm.total
    if not total > 0:
        raise AllMassZero("projection carries no mass")
    levels = np.arange(first, last + 1, dtype=np.float64)
    sums = np.array([-math.log2(float(np.sum((pm.coarsen(int(lv)) / total) ** 2))) for lv in levels])
    return fit_linear(levels, sums)


def projection_dim2(
    r: CascadeRealization,
    c: CurveSpec,
    theta: Sequence[float],
    out_levels: int = 16,
    fit_levels: Tuple[int, int] = (8, 14),
) -> DecayFit:
    """project_measure followed by projected_dim2."""
    if is_extinct(r):
        raise AllMassZero("projection of an extinct realization")
    return projected_dim2(project_measure(r, c, theta, out_levels), fit_levels)
