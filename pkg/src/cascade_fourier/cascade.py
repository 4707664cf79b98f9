"""
Seeded finite-depth cascade realizations and their scale statistics.

Masses are stored flat in address order: the children of cell i at level j
are cells i * b^d + c, c in [0, b^d), at level j + 1. Weights for those
children are drawn from the counter keyed by the parent (seed, j, i), so a
realization can be refined to any depth without resampling.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from eliot import start_action

from cascade_fourier.config import thread_count
from cascade_fourier.errors import AllMassZero, BadLevel, DepthTooLarge, InvalidParams
from cascade_fourier.estimation.fitting import DecayFit, fit_linear
from cascade_fourier.structure import tau, tau_tilde_ratio
from cascade_fourier.weights import WeightModel, log_marginal_moment, weight_block

MAX_CELLS = 2**28
PARENT_CHUNK = 2**16


@dataclass(frozen=True)
class BadicAddress:
    """A cell Q of the b-adic grid: level and index in address order."""

    level: int
    index: int

    def parent(self, branch_count: int) -> "BadicAddress":
        if self.level == 0:
            raise BadLevel("the root cell has no parent")
        return BadicAddress(self.level - 1, self.index // branch_count)

    def children(self, branch_count: int) -> List["BadicAddress"]:
        first = self.index * branch_count
        return [BadicAddress(self.level + 1, first + c) for c in range(branch_count)]


@dataclass(frozen=True, eq=False)
class CascadeRealization:
    """One realization of nu_n: masses of the b^(d n) level-n cells."""

    model: WeightModel
    depth: int
    seed: int
    masses: np.ndarray

    def __post_init__(self) -> None:
        if self.masses.shape != (self.model.branch_count**self.depth,):
            raise InvalidParams(
                f"expected {self.model.branch_count**self.depth} masses for depth {self.depth}, "
                f"got shape {self.masses.shape}"
            )
        self.masses.setflags(write=False)

    @property
    def b(self) -> int:
        return self.model.b

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def cell_count(self) -> int:
        return int(self.masses.size)

    def summary(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "depth": self.depth,
            "seed": self.seed,
            "cells": self.cell_count,
            "total_mass": total_mass(self),
        }


def _check_depth(model: WeightModel, n: int) -> None:
    if n < 0:
        raise InvalidParams(f"depth must be >= 0, got {n}")
    if model.branch_count**n > MAX_CELLS:
        raise DepthTooLarge(
            f"depth {n} needs {model.branch_count**n} cells, above the guard of {MAX_CELLS}"
        )


def _grow_level(
    model: WeightModel,
    seed: int,
    level: int,
    offset: int,
    parents: np.ndarray,
    threads: int,
) -> np.ndarray:
    """Masses of the children of a contiguous run of cells at `level`."""
    branch = model.branch_count
    out = np.empty(parents.size * branch, dtype=np.float64)

    def fill(start: int) -> None:
        stop = min(start + PARENT_CHUNK, parents.size)
        indices = np.arange(offset + start, offset + stop, dtype=np.uint64)
        weights = weight_block(model, seed, level, indices)
        out[start * branch : stop * branch] = (parents[start:stop, None] * (weights / branch)).reshape(-1)

    starts = range(0, parents.size, PARENT_CHUNK)
    if threads > 1 and parents.size > PARENT_CHUNK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return out


def grow_masses(
    model: WeightModel,
    seed: int,
    masses: np.ndarray,
    start_level: int,
    levels: int,
    offset: int = 0,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Continue a run of cells at `start_level` for `levels` more generations.

    The run is cells offset .. offset + len(masses) - 1 at start_level; the
    result is its level start_level + levels descendants in address order.
    Passing a seed other than the one that produced `masses` gives an
    independent continuation of a frozen prefix.
    """
    workers = thread_count(threads)
    current = np.asarray(masses, dtype=np.float64)
    for k in range(levels):
        current = _grow_level(model, seed, start_level + k, offset, current, workers)
        offset *= model.branch_count
    return current


def generate(model: WeightModel, n: int, seed: int, threads: Optional[int] = None) -> CascadeRealization:
    """
    Build nu_n by level-order traversal from a unit root.

    Raises:
        DepthTooLarge: b^(d n) above the memory guard
    """
    _check_depth(model, n)
    with start_action(action_type="generate_cascade", family=model.family.value, depth=n, seed=seed) as action:
        masses = grow_masses(model, seed, np.ones(1), 0, n, threads=threads)
        action.log(message_type="cascade_generated", cells=int(masses.size), total_mass=float(np.sum(masses)))
        return CascadeRealization(model=model, depth=n, seed=seed, masses=masses)


def refine(r: CascadeRealization, n_new: int, threads: Optional[int] = None) -> CascadeRealization:
    """Deepen a realization; bit-identical to generate(model, n_new, seed)."""
    if n_new <= r.depth:
        raise InvalidParams(f"refine needs n_new > {r.depth}, got {n_new}")
    _check_depth(r.model, n_new)
    with start_action(action_type="refine_cascade", seed=r.seed, depth=r.depth, new_depth=n_new):
        masses = grow_masses(r.model, r.seed, r.masses, r.depth, n_new - r.depth, threads=threads)
        return CascadeRealization(model=r.model, depth=n_new, seed=r.seed, masses=masses)


def total_mass(r: CascadeRealization) -> float:
    return float(np.sum(r.masses))


def is_extinct(r: CascadeRealization) -> bool:
    return not total_mass(r) > 0.0


def _check_level(r: CascadeRealization, j: int) -> None:
    if not 0 <= j <= r.depth:
        raise BadLevel(f"level {j} outside [0, {r.depth}]")


def _blocks(r: CascadeRealization, j: int) -> np.ndarray:
    """Masses as a (cells at level j, descendants per cell) view."""
    return r.masses.reshape(r.model.branch_count**j, -1)


def level_masses(r: CascadeRealization, j: int) -> np.ndarray:
    """nu_n aggregated to the level-j cells."""
    _check_level(r, j)
    return _blocks(r, j).sum(axis=1)


def prefix_masses(r: CascadeRealization, j: int) -> np.ndarray:
    """The generation-j masses nu_j of the same realization."""
    _check_level(r, j)
    if j == r.depth:
        return np.array(r.masses)
    return grow_masses(r.model, r.seed, np.ones(1), 0, j)


def _lp_norm(values: np.ndarray, p: float, axis: Optional[int] = None) -> np.ndarray:
    if math.isinf(p):
        return np.max(values, axis=axis)
    return np.sum(values**p, axis=axis) ** (1.0 / p)


def moment_sum_S(r: CascadeRealization, p: float, q: float, j: int) -> float:
    """
    Nested norm S(p, q, j, n): l^p over level-j cells I of the l^q norm of
    the level-n masses inside I.

    Either exponent may be math.inf; S(inf, inf, j, n) is the largest mass.
    """
    _check_level(r, j)
    if p < 1 or q < 1:
        raise InvalidParams(f"S needs p, q >= 1, got p={p}, q={q}")
    scale = float(np.max(r.masses))
    if scale == 0.0:
        return 0.0
    if math.isinf(p) and math.isinf(q):
        return scale
    inner = _lp_norm(_blocks(r, j) / scale, q, axis=1)
    return float(_lp_norm(inner, p) * scale)


def cell_moment_sum(r: CascadeRealization, q: float, j: int, cell_index: int) -> float:
    """S(q, I, n) = (sum of nu_n(J)^q over level-n J inside I)^(1/q)."""
    _check_level(r, j)
    if not 0 <= cell_index < r.model.branch_count**j:
        raise BadLevel(f"cell {cell_index} outside level {j}")
    block = _blocks(r, j)[cell_index]
    scale = float(np.max(block))
    if scale == 0.0:
        return 0.0
    return float(_lp_norm(block / scale, q) * scale)


def y_statistic(r: CascadeRealization, q: float, j: int, cell_index: int) -> float:
    """
    Normalized subtree mass Y_{j,n}(q, I).

    The weights strictly below level j inside I are regrown from a unit root,
    giving m(J) = b^(-(n-j) d) * prod W; then
    Y = b^((n-j) d q) (b^d E W^q)^(-(n-j)) sum_J m(J)^q, which is 1 for the
    deterministic model and has unit mean in general.
    """
    _check_level(r, j)
    if q < 1:
        raise InvalidParams(f"Y needs q >= 1, got {q}")
    branch = r.model.branch_count
    if not 0 <= cell_index < branch**j:
        raise BadLevel(f"cell {cell_index} outside level {j}")
    levels = r.depth - j
    sub = grow_masses(r.model, r.seed, np.ones(1), j, levels, offset=cell_index)
    scale = float(np.max(sub))
    log_sum = q * math.log(scale) + math.log(float(np.sum((sub / scale) ** q)))
    ln_branch = math.log(branch)
    log_y = log_sum + levels * (q * ln_branch - ln_branch - log_marginal_moment(r.model, q))
    return math.exp(log_y)


def epsilon(r: CascadeRealization, p: float, q: float) -> float:
    """
    eps_{p,q,n} = (1/n) sup_j [log_b S(p,q,j,n) + j tau~(p)/p + (n-j) tau~(q)/q].

    Raises:
        BadLevel: depth 0
        AllMassZero: extinct realization
    """
    n = r.depth
    if n < 1:
        raise BadLevel("epsilon needs depth >= 1")
    if is_extinct(r):
        raise AllMassZero("epsilon of an extinct realization")
    rho_p = tau_tilde_ratio(r.model, p)
    rho_q = tau_tilde_ratio(r.model, q)
    ln_b = math.log(r.b)
    best = -math.inf
    for j in range(n + 1):
        value = math.log(moment_sum_S(r, p, q, j)) / ln_b + j * rho_p + (n - j) * rho_q
        best = max(best, value)
    return best / n


def correlation_sum(r: CascadeRealization) -> float:
    """-log_b of sum nu_n(I)^2."""
    if is_extinct(r):
        raise AllMassZero("correlation sum of an extinct realization")
    return -math.log(float(np.sum(r.masses**2))) / math.log(r.b)


def dim2_estimate(
    model: WeightModel,
    seed: int,
    n_min: int,
    n_max: int,
    threads: Optional[int] = None,
) -> DecayFit:
    """
    Correlation-dimension slope: least squares of -log_b sum nu_n^2 against n
    over n_min..n_max, refining one realization across depths.
    """
    if not 2 <= n_min < n_max:
        raise InvalidParams(f"need 2 <= n_min < n_max, got {n_min}, {n_max}")
    _check_depth(model, n_max)
    with start_action(action_type="dim2_estimate", seed=seed, n_min=n_min, n_max=n_max) as action:
        r = generate(model, n_min, seed, threads=threads)
        depths: List[float] = []
        sums: List[float] = []
        for n in range(n_min, n_max + 1):
            if n > r.depth:
                r = refine(r, n, threads=threads)
            depths.append(float(n))
            sums.append(correlation_sum(r))
        fit = fit_linear(np.array(depths), np.array(sums))
        action.log(message_type="dim2_fit", slope=fit.slope, stderr=fit.stderr)
        return fit


def min_pointwise_dim(r: CascadeRealization) -> float:
    """min over positive-mass cells of log_b nu_n(I) / (-n)."""
    if r.depth < 1:
        raise BadLevel("pointwise dimension needs depth >= 1")
    heaviest = float(np.max(r.masses))
    if heaviest <= 0.0:
        raise AllMassZero("every cell has zero mass")
    return -math.log(heaviest) / (r.depth * math.log(r.b))


def moment_bound_exponent(model: WeightModel, p: float, q: float, j: int, n: int) -> float:
    """log_b of the expected-S scale b^(-j tau~(p)/p - (n-j) tau~(q)/q)."""
    return -j * tau_tilde_ratio(model, p) - (n - j) * tau_tilde_ratio(model, q)


def scale_statistics(r: CascadeRealization, orders: List[float]) -> Dict[str, Any]:
    """S for every (p, q, j) over the given exponents, plus eps per (p, q)."""
    with start_action(action_type="scale_statistics", depth=r.depth, orders=[str(o) for o in orders]):
        values: Dict[str, float] = {}
        eps: Dict[str, float] = {}
        for p in orders:
            for q in orders:
                for j in range(r.depth + 1):
                    values[f"{p}|{q}|{j}"] = moment_sum_S(r, p, q, j)
                if r.depth >= 1:
                    eps[f"{p}|{q}"] = epsilon(r, p, q)
        return {"S": values, "epsilon": eps}


def s_identity_rhs(r: CascadeRealization, q: float, j: int, cell_index: int) -> float:
    """b^(-(n-j) tau(q)/q) nu_j(I) Y^(1/q), the factorized form of S(q, I, n)."""
    nu_j = float(prefix_masses(r, j)[cell_index])
    return r.b ** (-(r.depth - j) * tau(r.model, q) / q) * nu_j * y_statistic(r, q, j, cell_index) ** (1.0 / q)
