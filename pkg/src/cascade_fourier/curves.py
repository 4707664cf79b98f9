"""
Unit-speed planar C^2 curves with nonvanishing curvature.

Oracles are vectorized: they take an array of parameters t in [0, 1] and
return an array of shape (len(t), 2).
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np
from eliot import start_action
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from cascade_fourier.errors import CurvatureVanishes, DegenerateSpeed, InvalidParams

Oracle = Callable[[np.ndarray], np.ndarray]

GRID_POINTS = 10_000
SPEED_TOLERANCE = 1e-10
DERIVATIVE_TOLERANCE = 1e-6
FD_STEP = 1e-5
CURVATURE_SAFETY = 0.9
MIN_SPEED = 1e-8
MIN_CURVATURE = 1e-8
INVERSE_TOLERANCE = 1e-10
INITIAL_KNOTS = 4096
MAX_KNOTS = 2**16


@dataclass(frozen=True, eq=False)
class CurveSpec:
    """A validated unit-speed curve gamma: [0, 1] -> R^2."""

    family: str
    params: Dict[str, float]
    position: Oracle
    derivative: Oracle
    second_derivative: Oracle
    kappa_min: float
    kappa_max: float
    length: float = 1.0
    signature: Dict[str, Any] = field(default_factory=dict)

    def descriptor(self) -> Dict[str, Any]:
        """JSON-ready {family, params}."""
        return {"family": self.family, "params": dict(self.params)}

    def curvature(self, t: np.ndarray) -> np.ndarray:
        return _det(self.derivative(np.atleast_1d(t)), self.second_derivative(np.atleast_1d(t)))


@dataclass(frozen=True, eq=False)
class RawCurve:
    """Any regular C^2 parametrization r: [0, 1] -> R^2 with its derivatives."""

    name: str
    position: Oracle
    derivative: Oracle
    second_derivative: Oracle


def _det(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    return a[..., 0] * c[..., 1] - a[..., 1] * c[..., 0]


def _check_curve(
    family: str,
    params: Dict[str, float],
    position: Oracle,
    derivative: Oracle,
    second_derivative: Oracle,
    length: float = 1.0,
) -> CurveSpec:
    """Grid-check unit speed, curvature sign and derivative consistency."""
    t = np.linspace(0.0, 1.0, GRID_POINTS)
    d1 = derivative(t)
    d2 = second_derivative(t)
    speed_error = float(np.max(np.abs(np.hypot(d1[:, 0], d1[:, 1]) - 1.0)))
    if speed_error > SPEED_TOLERANCE:
        raise InvalidParams(f"{family} curve is not unit speed (max deviation {speed_error:.3g})")

    det = _det(d1, d2)
    if np.min(np.abs(det)) <= 0.0 or (np.min(det) < 0.0 < np.max(det)):
        raise CurvatureVanishes(f"{family} curve has vanishing curvature on the grid")

    inner = np.linspace(FD_STEP, 1.0 - FD_STEP, GRID_POINTS)
    fd1 = (position(inner + FD_STEP) - position(inner - FD_STEP)) / (2.0 * FD_STEP)
    fd2 = (derivative(inner + FD_STEP) - derivative(inner - FD_STEP)) / (2.0 * FD_STEP)
    err1 = float(np.max(np.abs(fd1 - derivative(inner))))
    err2 = float(np.max(np.abs(fd2 - second_derivative(inner))))
    if err1 > DERIVATIVE_TOLERANCE or err2 > DERIVATIVE_TOLERANCE * max(1.0, float(np.max(np.abs(det)))):
        raise InvalidParams(
            f"{family} derivative oracles disagree with finite differences ({err1:.3g}, {err2:.3g})"
        )

    return CurveSpec(
        family=family,
        params=params,
        position=position,
        derivative=derivative,
        second_derivative=second_derivative,
        kappa_min=CURVATURE_SAFETY * float(np.min(np.abs(det))),
        kappa_max=float(np.max(np.abs(det))),
        length=length,
        signature={"speed_error": speed_error, "fd_error": max(err1, err2)},
    )


def make_circle_arc(curvature: float = 2.0 * math.pi) -> CurveSpec:
    """
    gamma(t) = (sin(k t), 1 - cos(k t)) / k; k = 2 pi closes into a circle
    of radius 1/(2 pi).
    """
    if not curvature > 0 or not math.isfinite(curvature):
        raise InvalidParams(f"curvature must be positive, got {curvature}")
    k = float(curvature)

    def position(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.stack([np.sin(k * t) / k, (1.0 - np.cos(k * t)) / k], axis=-1)

    def derivative(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.stack([np.cos(k * t), np.sin(k * t)], axis=-1)

    def second_derivative(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.stack([-k * np.sin(k * t), k * np.cos(k * t)], axis=-1)

    return _check_curve("circle", {"curvature": k}, position, derivative, second_derivative)


def parabola_arclength(u: np.ndarray | float) -> np.ndarray | float:
    """Arclength of u -> (u, u^2) from 0 to u."""
    w = np.sqrt(1.0 + 4.0 * np.square(u))
    return u * w / 2.0 + np.arcsinh(2.0 * u) / 4.0


def make_parabola_arc() -> CurveSpec:
    """The parabola u -> (u, u^2), u in [0, T], cut at arclength 1 and run at unit speed."""
    end = float(brentq(lambda u: parabola_arclength(u) - 1.0, 0.0, 1.0, xtol=1e-14))

    def invert(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        u = t * end
        for _ in range(50):
            step = (parabola_arclength(u) - t) / np.sqrt(1.0 + 4.0 * u * u)
            u = u - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return u

    def position(t: np.ndarray) -> np.ndarray:
        u = invert(t)
        return np.stack([u, u * u], axis=-1)

    def derivative(t: np.ndarray) -> np.ndarray:
        u = invert(t)
        w = np.sqrt(1.0 + 4.0 * u * u)
        return np.stack([1.0 / w, 2.0 * u / w], axis=-1)

    def second_derivative(t: np.ndarray) -> np.ndarray:
        u = invert(t)
        w4 = np.square(1.0 + 4.0 * u * u)
        return np.stack([-4.0 * u / w4, 2.0 / w4], axis=-1)

    return _check_curve("parabola", {"end": end}, position, derivative, second_derivative)


def _segment_lengths(speed: Callable[[np.ndarray], np.ndarray], knots: np.ndarray) -> np.ndarray:
    """Gauss-Legendre (order 12) arclength of each knot interval."""
    nodes, weights = np.polynomial.legendre.leggauss(12)
    left, right = knots[:-1, None], knots[1:, None]
    half = (right - left) / 2.0
    u = left + half * (nodes[None, :] + 1.0)
    return np.sum(speed(u.reshape(-1)).reshape(u.shape) * weights[None, :], axis=1) * half[:, 0]


def reparametrize_arclength(raw: RawCurve) -> CurveSpec:
    """
    Unit-speed reparametrization of a raw curve, rescaled to length 1.

    u(s) is a monotone cubic Hermite interpolant through (s_k, u_k) with slopes
    1/|r'(u_k)|, doubled from 4096 knots until the midpoint residual is at
    most 1e-10. The original length is kept in `CurveSpec.length`.

    Raises:
        DegenerateSpeed: |r'| < 1e-8 somewhere on the check grid
        CurvatureVanishes: curvature (numerically) zero or changing sign
    """
    with start_action(action_type="reparametrize_arclength", curve=raw.name) as action:
        grid = np.linspace(0.0, 1.0, GRID_POINTS + 1)
        d1 = raw.derivative(grid)
        speed_grid = np.hypot(d1[:, 0], d1[:, 1])
        if float(np.min(speed_grid)) < MIN_SPEED:
            raise DegenerateSpeed(f"{raw.name}: speed {np.min(speed_grid):.3g} below {MIN_SPEED}")
        kappa = _det(d1, raw.second_derivative(grid)) / speed_grid**3
        if float(np.min(np.abs(kappa))) < MIN_CURVATURE or (np.min(kappa) < 0.0 < np.max(kappa)):
            raise CurvatureVanishes(f"{raw.name}: curvature vanishes or changes sign")

        def speed(u: np.ndarray) -> np.ndarray:
            d = raw.derivative(np.asarray(u, dtype=np.float64))
            return np.hypot(d[..., 0], d[..., 1])

        length, _ = quad(lambda u: float(speed(np.array([u]))[0]), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=500)

        knots_count = INITIAL_KNOTS
        while True:
            knots = np.linspace(0.0, 1.0, knots_count + 1)
            arc = np.concatenate([[0.0], np.cumsum(_segment_lengths(speed, knots))])
            inverse = CubicHermiteSpline(arc, knots, 1.0 / speed(knots))
            mids = (knots[:-1] + knots[1:]) / 2.0
            mid_arc = arc[:-1] + _segment_lengths(speed, np.stack([knots[:-1], mids], axis=1).reshape(-1))[::2]
            residual = float(np.max(np.abs(inverse(mid_arc) - mids)))
            if residual <= INVERSE_TOLERANCE or knots_count >= MAX_KNOTS:
                break
            knots_count *= 2
        action.log(message_type="arclength_table", knots=knots_count, residual=residual, length=length)
        if residual > INVERSE_TOLERANCE:
            raise InvalidParams(f"{raw.name}: inverse arclength residual {residual:.3g} after {knots_count} knots")

        total = float(arc[-1])

        def to_u(t: np.ndarray) -> np.ndarray:
            return np.clip(inverse(np.asarray(t, dtype=np.float64) * total), 0.0, 1.0)

        def position(t: np.ndarray) -> np.ndarray:
            return raw.position(to_u(t)) / total

        def derivative(t: np.ndarray) -> np.ndarray:
            d = raw.derivative(to_u(t))
            return d / np.hypot(d[..., 0], d[..., 1])[..., None]

        def second_derivative(t: np.ndarray) -> np.ndarray:
            u = to_u(t)
            d = raw.derivative(u)
            dd = raw.second_derivative(u)
            s = np.hypot(d[..., 0], d[..., 1])[..., None]
            tangent = d / s
            along = np.sum(tangent * dd, axis=-1, keepdims=True)
            return total * (dd - tangent * along) / s**2

        return _check_curve("generic", {"length": length}, position, derivative, second_derivative, length=length)


def frame(c: CurveSpec, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """(point, unit tangent, unit normal, signed curvature) at parameter t."""
    if not 0.0 <= t <= 1.0:
        raise InvalidParams(f"t must lie in [0, 1], got {t}")
    ts = np.array([t], dtype=np.float64)
    point = c.position(ts)[0]
    tangent = c.derivative(ts)[0]
    normal = np.array([-tangent[1], tangent[0]])
    curvature = float(_det(tangent, c.second_derivative(ts)[0]))
    return point, tangent, normal, curvature


def curve_from_descriptor(descriptor: Mapping[str, Any]) -> CurveSpec:
    """Rebuild a built-in curve from its {family, params} JSON form."""
    family = descriptor.get("family")
    params = descriptor.get("params") or {}
    if family == "circle":
        return make_circle_arc(float(params.get("curvature", 2.0 * math.pi)))
    if family == "parabola":
        return make_parabola_arc()
    raise InvalidParams(f"curve family {family!r} cannot be rebuilt from a descriptor")
