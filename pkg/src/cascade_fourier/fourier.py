"""
Fourier transforms of finite-depth cascade measures.

Flat measures (piecewise-constant densities on b-adic cubes) are transformed
exactly, cell by cell. Curve measures are integrated with Gauss-Legendre
panels short enough that the phase turns by at most a quarter period on
each. Every reduction runs along contiguous numpy rows (pairwise summation)
in a fixed order, so results do not depend on the thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import polars as pl
from eliot import start_action

from cascade_fourier.cascade import CascadeRealization, refine
from cascade_fourier.config import thread_count
from cascade_fourier.curves import CurveSpec
from cascade_fourier.errors import DimensionMismatch, InvalidFrequency, InvalidParams, ToleranceUnachievable
from cascade_fourier.estimation.fitting import DecayFit, fit_power_law
from cascade_fourier.structure import order_label

GAUSS_ORDER = 12
GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)
PANELS_PER_WAVELENGTH = 4.0
MAX_DOUBLINGS = 3
CHUNK_ELEMENTS = 2**22
DEFAULT_TOLERANCE = 1e-9
NORMAL_LEVEL = 8
MIN_DIRECTIONS = 16


@dataclass(frozen=True)
class FrequencySample:
    """The transform value at one frequency."""

    xi: Tuple[float, ...]
    value: complex

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {"xi": list(self.xi), "re": self.value.real, "im": self.value.imag, "magnitude": self.magnitude}


@dataclass
class DecaySampleSet:
    """Per-radius sup and spherical L^p magnitudes with run metadata."""

    radii: np.ndarray
    directions: int
    sup: np.ndarray
    averages: Dict[str, np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pl.DataFrame:
        columns: Dict[str, Any] = {"r": self.radii, "sup": self.sup}
        for label, values in self.averages.items():
            columns[f"sigma_{label}"] = values
        columns["n_theta"] = np.full(self.radii.shape, self.directions, dtype=np.int64)
        return pl.DataFrame(columns)

    def column(self, name: str) -> np.ndarray:
        if name == "sup":
            return self.sup
        return self.averages[name.removeprefix("sigma_")]


def _as_frequencies(xi: Any, dim: int) -> np.ndarray:
    """Coerce a frequency (scalar for d = 1) or a batch to shape (K, dim)."""
    arr = np.asarray(xi, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size == dim else arr.reshape(-1, 1)
    if arr.shape[1] != dim:
        raise DimensionMismatch(f"frequency of dimension {arr.shape[1]} for a {dim}-dimensional measure")
    return arr


def cell_corners(b: int, d: int, n: int, indices: Optional[np.ndarray] = None) -> np.ndarray:
    """Integer lower corners (in units of b^-n) of level-n cells, shape (N, d)."""
    branch = b**d
    idx = np.arange(branch**n, dtype=np.int64) if indices is None else np.asarray(indices, dtype=np.int64)
    coords = np.zeros((idx.size, d), dtype=np.int64)
    for k in range(n):
        slot = (idx // branch ** (n - 1 - k)) % branch
        for m in range(d):
            coords[:, m] = coords[:, m] * b + (slot // b**m) % b
    return coords


def cell_transform_flat(b: int, d: int, n: int, address: int, xi: Any) -> complex:
    """
    Exact integral of exp(-2 pi i x . xi) over the level-n cell `address`:
    prod_j h e^(-2 pi i xi_j (x_j + h/2)) sinc(xi_j h), h = b^-n.
    """
    if not 0 <= address < (b**d) ** n:
        raise InvalidParams(f"address {address} outside level {n}")
    freq = _as_frequencies(xi, d)[0]
    h = float(b) ** -n
    centers = (cell_corners(b, d, n, np.array([address]))[0] + 0.5) * h
    factors = h * np.exp(-2j * np.pi * freq * centers) * np.sinc(freq * h)
    return complex(np.prod(factors))


def _evaluate(points: np.ndarray, weights: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """sum_k weights_k exp(-2 pi i xi . points_k) for every row of xis."""
    rows = max(1, CHUNK_ELEMENTS // max(1, points.shape[0]))
    out = np.empty(xis.shape[0], dtype=np.complex128)
    for start in range(0, xis.shape[0], rows):
        block = xis[start : start + rows]
        phase = block[:, 0, None] * points[None, :, 0]
        for m in range(1, points.shape[1]):
            phase = phase + block[:, m, None] * points[None, :, m]
        angle = 2.0 * np.pi * (phase - np.round(phase))
        re = np.sum(np.cos(angle) * weights[None, :], axis=1)
        im = np.sum(np.sin(angle) * weights[None, :], axis=1)
        out[start : start + rows] = re - 1j * im
    return out


def _parallel_evaluate(points: np.ndarray, weights: np.ndarray, xis: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1 or xis.shape[0] < 2 * threads:
        return _evaluate(points, weights, xis)
    parts = np.array_split(np.arange(xis.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda idx: _evaluate(points, weights, xis[idx]), parts))
    return np.concatenate(results)


def transform_flat_many(r: CascadeRealization, xis: Any, threads: Optional[int] = 1) -> np.ndarray:
    """nu_n^(xi) for a batch of frequencies of shape (K, d)."""
    freqs = _as_frequencies(xis, r.d)
    h = float(r.b) ** -r.depth
    centers = (cell_corners(r.b, r.d, r.depth) + 0.5) * h
    values = _parallel_evaluate(centers, r.masses, freqs, thread_count(threads))
    return values * np.prod(np.sinc(freqs * h), axis=1)


def transform_flat(r: CascadeRealization, xi: Any) -> FrequencySample:
    """Exact transform of the piecewise-constant density of nu_n at one frequency."""
    freqs = _as_frequencies(xi, r.d)
    return FrequencySample(xi=tuple(float(v) for v in freqs[0]), value=complex(transform_flat_many(r, freqs)[0]))


def panel_count(xi_norm: float, length: float) -> int:
    """Panels per interval so that each spans at most 1/(4|xi|)."""
    return max(1, math.ceil(PANELS_PER_WAVELENGTH * xi_norm * length))


def _curve_nodes(starts: np.ndarray, h: float, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre parameters (N, panels * order) and per-node weights."""
    width = h / panels
    offsets = (np.arange(panels)[:, None] + (GAUSS_NODES[None, :] + 1.0) / 2.0).reshape(-1) * width
    ts = starts[:, None] + offsets[None, :]
    weights = np.tile(GAUSS_WEIGHTS, panels) * (width / 2.0)
    return ts, weights


def _cell_integrals(c: CurveSpec, starts: np.ndarray, h: float, xi: np.ndarray, panels: int) -> np.ndarray:
    """Integral of exp(-2 pi i gamma(t) . xi) over [s, s + h] for every start s."""
    per_cell = panels * GAUSS_ORDER
    cells = max(1, CHUNK_ELEMENTS // per_cell)
    out = np.empty(starts.size, dtype=np.complex128)
    for first in range(0, starts.size, cells):
        ts, weights = _curve_nodes(starts[first : first + cells], h, panels)
        pts = c.position(ts.reshape(-1))
        phase = (pts[:, 0] * xi[0] + pts[:, 1] * xi[1]).reshape(ts.shape)
        angle = 2.0 * np.pi * (phase - np.round(phase))
        re = np.sum(np.cos(angle) * weights[None, :], axis=1)
        im = np.sum(np.sin(angle) * weights[None, :], axis=1)
        out[first : first + cells] = re - 1j * im
    return out


def _validated_integrals(
    c: CurveSpec, starts: np.ndarray, h: float, xi: np.ndarray, tol: float
) -> np.ndarray:
    """Cell integrals accepted once doubling the panels moves none by more than tol * h."""
    if tol < 1e-12:
        raise InvalidParams(f"tolerance must be >= 1e-12, got {tol}")
    panels = panel_count(float(np.hypot(xi[0], xi[1])), h)
    coarse = _cell_integrals(c, starts, h, xi, panels)
    for _ in range(MAX_DOUBLINGS):
        panels *= 2
        fine = _cell_integrals(c, starts, h, xi, panels)
        if float(np.max(np.abs(fine - coarse))) <= tol * h:
            return fine
        coarse = fine
    raise ToleranceUnachievable(f"panel doubling still moves results by more than {tol * h:.3g} at xi={xi}")


def cell_transform_curve(
    c: CurveSpec, t_interval: Tuple[float, float], xi: Any, tol: float = DEFAULT_TOLERANCE
) -> complex:
    """Integral of exp(-2 pi i gamma(t) . xi) dt over t_interval."""
    t0, t1 = float(t_interval[0]), float(t_interval[1])
    if not 0.0 <= t0 <= t1 <= 1.0:
        raise InvalidParams(f"parameter interval {t_interval} not inside [0, 1]")
    freq = _as_frequencies(xi, 2)[0]
    if t1 == t0:
        return 0j
    if not np.any(freq):
        return complex(t1 - t0)
    return complex(_validated_integrals(c, np.array([t0]), t1 - t0, freq, tol)[0])


def _require_line(r: CascadeRealization) -> None:
    if r.d != 1:
        raise DimensionMismatch(f"curve measures need d = 1, got d = {r.d}")


def transform_curve(
    r: CascadeRealization, c: CurveSpec, xi: Any, tol: float = DEFAULT_TOLERANCE
) -> FrequencySample:
    """
    mu_n^(xi) = sum over level-n cells of density * cell integral, with every
    cell validated by panel doubling.
    """
    _require_line(r)
    freq = _as_frequencies(xi, 2)[0]
    xi_tuple = (float(freq[0]), float(freq[1]))
    if not np.any(freq):
        return FrequencySample(xi=xi_tuple, value=complex(np.sum(r.masses)))
    h = float(r.b) ** -r.depth
    starts = np.arange(r.cell_count, dtype=np.float64) * h
    integrals = _validated_integrals(c, starts, h, freq, tol)
    densities = r.masses / h
    value = np.sum(densities * integrals.real) + 1j * np.sum(densities * integrals.imag)
    return FrequencySample(xi=xi_tuple, value=complex(value))


def _curve_layout(r: CascadeRealization, c: CurveSpec, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """All quadrature points of the curve measure and their mass-weighted weights."""
    h = float(r.b) ** -r.depth
    starts = np.arange(r.cell_count, dtype=np.float64) * h
    ts, weights = _curve_nodes(starts, h, panels)
    node_weights = ((r.masses / h)[:, None] * weights[None, :]).reshape(-1)
    return c.position(ts.reshape(-1)), node_weights


class CurveEvaluator:
    """
    Batched mu_n^ on circles |xi| = radius, sharing one validated quadrature
    layout per panel count.
    """

    def __init__(self, r: CascadeRealization, c: CurveSpec, tol: float = DEFAULT_TOLERANCE) -> None:
        _require_line(r)
        self.r = r
        self.c = c
        self.tol = tol
        self._layouts: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        self._mass = float(np.sum(r.masses))

    def layout(self, panels: int) -> Tuple[np.ndarray, np.ndarray]:
        if panels not in self._layouts:
            self._layouts[panels] = _curve_layout(self.r, self.c, panels)
        return self._layouts[panels]

    def validated_panels(self, radius: float) -> int:
        """Panel count that survives one doubling at xi = (radius, 0)."""
        h = float(self.r.b) ** -self.r.depth
        panels = panel_count(radius, h)
        on_axis = np.array([[radius, 0.0]])
        coarse = _evaluate(*self.layout(panels), on_axis)[0]
        for _ in range(MAX_DOUBLINGS):
            fine = _evaluate(*self.layout(2 * panels), on_axis)[0]
            if abs(fine - coarse) <= self.tol * max(1.0, self._mass):
                return 2 * panels
            panels *= 2
            coarse = fine
        raise ToleranceUnachievable(f"curve quadrature did not settle at radius {radius}")

    def values(self, radius: float, directions: np.ndarray) -> np.ndarray:
        panels = self.validated_panels(radius)
        points, weights = self.layout(panels)
        return _evaluate(points, weights, radius * directions)


def uniform_directions(n_theta: int) -> np.ndarray:
    """n_theta equally spaced unit vectors, shape (n_theta, 2)."""
    if n_theta < MIN_DIRECTIONS:
        raise InvalidParams(f"need at least {MIN_DIRECTIONS} directions, got {n_theta}")
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def normal_directions(c: CurveSpec, b: int, level: int = NORMAL_LEVEL) -> np.ndarray:
    """Unit normals of the curve at the b-adic parameters m b^-level."""
    ts = np.arange(b**level + 1, dtype=np.float64) / b**level
    tangents = c.derivative(ts)
    return np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)


def _power_mean(magnitudes: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(np.max(magnitudes))
    return float(np.mean(magnitudes**p) ** (1.0 / p))


def _magnitudes_on_circle(
    r: CascadeRealization,
    c: Optional[CurveSpec],
    radius: float,
    directions: np.ndarray,
    tol: float,
    evaluator: Optional[CurveEvaluator] = None,
) -> np.ndarray:
    if c is None:
        if r.d == 1:
            return np.abs(transform_flat_many(r, np.array([[radius]])))
        return np.abs(transform_flat_many(r, radius * directions))
    evaluator = evaluator or CurveEvaluator(r, c, tol)
    return np.abs(evaluator.values(radius, directions))


def spherical_average(
    r: CascadeRealization,
    c: Optional[CurveSpec],
    radius: float,
    p: float,
    n_theta: int = 256,
    tol: float = DEFAULT_TOLERANCE,
) -> float:
    """
    (mean over n_theta uniform angles of |mu^(radius theta)|^p)^(1/p); the
    max at p = inf. Flat d = 1 measures have the two-point sphere {+1, -1},
    where both magnitudes agree.
    """
    if not radius > 0:
        raise InvalidParams(f"radius must be positive, got {radius}")
    if p < 1:
        raise InvalidParams(f"need p >= 1, got {p}")
    if c is not None:
        _require_line(r)
    directions = uniform_directions(n_theta)
    return _power_mean(_magnitudes_on_circle(r, c, radius, directions, tol), p)


def dyadic_radii(b: int, k0: int, k1: int) -> np.ndarray:
    """b^k for k = k0..k1."""
    if k1 <= k0:
        raise InvalidParams(f"need k0 < k1, got {k0}, {k1}")
    return float(b) ** np.arange(k0, k1 + 1)


def regime_depth(b: int, max_radius: float) -> float:
    """Depth at which |xi| = b^(2n) reaches the largest radius."""
    return 2.0 * math.log(max_radius) / math.log(b)


def decay_profile(
    r: CascadeRealization,
    c: Optional[CurveSpec],
    k0: int,
    k1: int,
    n_theta: int = 256,
    p_list: Sequence[float] = (1.0, 2.0, 4.0),
    enrich_normals: bool = True,
    n_shell: int = 4,
    tol: float = DEFAULT_TOLERANCE,
    threads: Optional[int] = 1,
    normal_level: int = NORMAL_LEVEL,
) -> DecaySampleSet:
    """
    Sup and spherical L^p magnitudes at the radii b^k0 .. b^k1.

    Each reported radius stands for the shell r b^(s/n_shell), s < n_shell,
    and reports maxima over it. The sup also ranges over the curve normals
    at t = m b^-normal_level when enrich_normals is set; the L^p averages use
    the uniform directions only.
    """
    if c is not None:
        _require_line(r)
    radii = dyadic_radii(r.b, k0, k1)
    flat_line = c is None and r.d == 1
    shell = n_theta if flat_line else n_shell
    uniform = uniform_directions(n_theta)
    normals = normal_directions(c, r.b, normal_level) if (c is not None and enrich_normals) else None
    orders = list(p_list)
    workers = thread_count(threads)

    with start_action(
        action_type="decay_profile",
        depth=r.depth,
        seed=r.seed,
        support=c.family if c is not None else "flat",
        k0=k0,
        k1=k1,
        n_theta=n_theta,
        shell=shell,
    ) as action:
        if r.depth < regime_depth(r.b, float(radii[-1])):
            action.log(
                message_type="depth_below_regime_split",
                depth=r.depth,
                needed=regime_depth(r.b, float(radii[-1])),
            )
        shell_radii = (radii[:, None] * float(r.b) ** (np.arange(shell)[None, :] / shell)).reshape(-1)
        evaluator = CurveEvaluator(r, c, tol) if c is not None else None

        if flat_line:
            mags = np.abs(transform_flat_many(r, shell_radii[:, None], threads=workers)).reshape(radii.size, shell)
            sup = mags.max(axis=1)
            averages = {order_label(p): sup.copy() for p in orders}
        else:

            def one_radius(rho: float) -> Tuple[float, List[float]]:
                mags = _magnitudes_on_circle(r, c, rho, uniform, tol, evaluator)
                top = float(np.max(mags))
                if normals is not None:
                    top = max(top, float(np.max(np.abs(evaluator.values(rho, normals)))))
                return top, [_power_mean(mags, p) for p in orders]

            if workers > 1:
                if evaluator is not None:
                    # build shared layouts up front so threads only read them
                    for rho in shell_radii:
                        evaluator.validated_panels(float(rho))
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    rows = list(pool.map(one_radius, [float(rho) for rho in shell_radii]))
            else:
                rows = [one_radius(float(rho)) for rho in shell_radii]
            sup = np.array([row[0] for row in rows]).reshape(radii.size, shell).max(axis=1)
            table = np.array([row[1] for row in rows]).reshape(radii.size, shell, len(orders)).max(axis=1)
            averages = {order_label(p): table[:, i] for i, p in enumerate(orders)}

        action.log(message_type="decay_profile_done", sup_first=float(sup[0]), sup_last=float(sup[-1]))
        return DecaySampleSet(
            radii=radii,
            directions=n_theta,
            sup=sup,
            averages=averages,
            metadata={
                "model": r.model.to_dict(),
                "curve": c.descriptor() if c is not None else {"family": "flat"},
                "depth": r.depth,
                "seed": r.seed,
                "tol": tol,
                "n_shell": shell,
                "enrich_normals": bool(enrich_normals and c is not None),
            },
        )


def fit_decay(profile: DecaySampleSet, column: str = "sup", base: float = 2.0) -> DecayFit:
    """Power-law fit of one profile column against radius."""
    values = profile.column(column)
    return fit_power_law(list(zip(profile.radii.tolist(), values.tolist())), base=base)


def increment_transform(
    r: CascadeRealization, c: Optional[CurveSpec], xi: Any, tol: float = DEFAULT_TOLERANCE
) -> complex:
    """mu_{n+1}^(xi) - mu_n^(xi) for the same realization."""
    deeper = refine(r, r.depth + 1, threads=1)
    if c is None:
        return transform_flat(deeper, xi).value - transform_flat(r, xi).value
    return transform_curve(deeper, c, xi, tol).value - transform_curve(r, c, xi, tol).value


def dyadic_frequency_grid(k_max: int, per_octave: int = 4, n_angles: int = 4) -> np.ndarray:
    """Frequencies of norm 2^(j/per_octave), 0 <= j <= k_max per_octave, in n_angles directions."""
    norms = 2.0 ** (np.arange(k_max * per_octave + 1) / per_octave)
    theta = np.pi * np.arange(n_angles) / n_angles
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return (norms[:, None, None] * dirs[None, :, :]).reshape(-1, 2)


def vdc_statistic(c: CurveSpec, xi_set: Any, tol: float = DEFAULT_TOLERANCE) -> float:
    """
    max over the set of |integral over the curve of exp(-2 pi i x . xi)| |xi|^(1/2).

    Raises:
        InvalidFrequency: some |xi| < 1
    """
    freqs = _as_frequencies(xi_set, 2)
    norms = np.hypot(freqs[:, 0], freqs[:, 1])
    if np.any(norms < 1.0):
        raise InvalidFrequency(f"van der Corput statistic needs |xi| >= 1, got min {float(np.min(norms)):.3g}")
    with start_action(action_type="vdc_statistic", curve=c.family, frequencies=int(freqs.shape[0])) as action:
        best = 0.0
        for xi, norm in zip(freqs, norms):
            value = abs(cell_transform_curve(c, (0.0, 1.0), xi, tol)) * math.sqrt(norm)
            best = max(best, value)
        action.log(message_type="vdc_result", statistic=best)
        return best
