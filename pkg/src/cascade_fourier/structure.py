"""
Analytic multifractal quantities of a weight model.

Everything here is closed form (or a one-dimensional root find) and cheap, so
nothing logs. Logs are to base b throughout.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np
from scipy.optimize import bisect

from cascade_fourier.errors import InvalidParams, NotSubcritical
from cascade_fourier.weights import WeightFamily, WeightModel, log_marginal_moment

Q_CAP = 512.0
ROOT_TOLERANCE = 1e-9
ROOT_XTOL = 1e-12
DERIVATIVE_TOLERANCE = 1e-8
SPHERICAL_ORDERS = (1.0, 2.0, 4.0, math.inf)


def tau(model: WeightModel, q: float) -> float:
    """tau(q) = d q - log_b(sum_i E(W_i^q)) for q >= 0."""
    if q < 0:
        raise InvalidParams(f"tau is defined for q >= 0, got {q}")
    return model.d * q - model.d - log_marginal_moment(model, q) / math.log(model.b)


def _two_point_ratio(model: WeightModel, q: float) -> float:
    w_plus, w_minus, p = model.params
    return ((1.0 - p) / p) * (w_minus / w_plus) ** q


def tau_prime(model: WeightModel, q: float) -> float:
    """
    Derivative of tau.

    Closed forms: deterministic d; lognormal d - lambda (2q - 1);
    two-point d - E(W^q ln W) / (ln b E(W^q)).
    """
    if not q > 0:
        raise InvalidParams(f"tau' needs q > 0, got {q}")
    if model.family == WeightFamily.DETERMINISTIC:
        return float(model.d)
    if model.family == WeightFamily.LOGNORMAL:
        (lam,) = model.params
        return model.d - lam * (2.0 * q - 1.0)
    if model.family == WeightFamily.TWO_POINT:
        w_plus, w_minus, _ = model.params
        r = _two_point_ratio(model, q)
        return model.d - (math.log(w_plus) + r * math.log(w_minus)) / ((1.0 + r) * math.log(model.b))
    return numeric_tau_prime(model, q)


def numeric_tau_prime(
    model: WeightModel,
    q: float,
    tau_fn: Optional[Callable[[WeightModel, float], float]] = None,
) -> float:
    """
    Richardson-extrapolated central difference of tau at q.

    The step is halved until two successive extrapolations agree to 1e-8.
    """
    fn = tau_fn or tau
    h = min(0.1, q / 2.0)

    def central(step: float) -> float:
        return (fn(model, q + step) - fn(model, q - step)) / (2.0 * step)

    previous = (4.0 * central(h / 2.0) - central(h)) / 3.0
    for _ in range(20):
        h /= 2.0
        current = (4.0 * central(h / 2.0) - central(h)) / 3.0
        if abs(current - previous) <= DERIVATIVE_TOLERANCE:
            return current
        previous = current
    return previous


def legendre_gap(model: WeightModel, q: float) -> float:
    """g(q) = q tau'(q) - tau(q); nonincreasing because tau is concave."""
    if model.family == WeightFamily.LOGNORMAL:
        (lam,) = model.params
        return model.d - lam * q * q
    if model.family == WeightFamily.TWO_POINT:
        # rearranged so that large q does not cancel catastrophically
        w_plus, w_minus, p = model.params
        r = _two_point_ratio(model, q)
        ln_b = math.log(model.b)
        return (
            model.d
            + (math.log(p) + math.log1p(r)) / ln_b
            + q * r * (math.log(w_plus) - math.log(w_minus)) / ((1.0 + r) * ln_b)
        )
    return q * tau_prime(model, q) - tau(model, q)


def check_subcritical(model: WeightModel) -> bool:
    """True iff tau'(1) > 0, i.e. the cascade survives with positive probability."""
    return tau_prime(model, 1.0) > 0.0


def _require_subcritical(model: WeightModel) -> None:
    if not check_subcritical(model):
        raise NotSubcritical(
            f"{model.family.value} model {model.named_params()} has tau'(1) = {tau_prime(model, 1.0):.6g} <= 0"
        )


def q_max(model: WeightModel) -> float:
    """
    The unique q with q tau'(q) = tau(q), or math.inf.

    Infinite when g stays above -1e-9 on [1, 512]; otherwise the root is
    bracketed in (1, 512] and bisected.
    """
    _require_subcritical(model)
    if model.family == WeightFamily.LOGNORMAL:
        root = math.sqrt(model.d / model.params[0])
        return root if root <= Q_CAP else math.inf
    if model.family == WeightFamily.DETERMINISTIC:
        return math.inf
    if legendre_gap(model, Q_CAP) >= -ROOT_TOLERANCE:
        return math.inf
    return float(bisect(lambda q: legendre_gap(model, q), 1.0, Q_CAP, xtol=ROOT_XTOL))


def alpha_min(model: WeightModel) -> float:
    """tau(q_max)/q_max, or lim tau'(q) when q_max is infinite."""
    qm = q_max(model)
    if math.isfinite(qm):
        return tau(model, qm) / qm
    if model.family == WeightFamily.TWO_POINT:
        return model.d - math.log(model.params[0]) / math.log(model.b)
    if model.family == WeightFamily.DETERMINISTIC:
        return float(model.d)
    return tau_prime(model, Q_CAP)


def tau_tilde(model: WeightModel, p: float) -> float:
    """tau(p) up to q_max, linear continuation p * alpha_min beyond."""
    if not p > 0:
        raise InvalidParams(f"tau~ needs p > 0, got {p}")
    qm = q_max(model)
    if p <= qm:
        return tau(model, p)
    return p * alpha_min(model)


def tau_tilde_ratio(model: WeightModel, p: float) -> float:
    """tau~(p)/p with the convention tau~(inf)/inf = alpha_min."""
    if math.isinf(p):
        return alpha_min(model)
    return tau_tilde(model, p) / p


def spherical_exponent(model: WeightModel, p: float) -> float:
    """
    Predicted decay of the spherical L^p average: sigma_p(r) <~ r^(-beta/2)
    for every beta below min{tau~(2), (1 + tau~(p))/p}, and alpha_min at p = inf.
    """
    if math.isinf(p):
        return alpha_min(model)
    if p < 1:
        raise InvalidParams(f"spherical averages need p >= 1, got {p}")
    return min(tau_tilde(model, 2.0), (1.0 + tau_tilde(model, p)) / p)


def y_moment_bound(model: WeightModel, p: float, q: float) -> float:
    """
    Upper bound on E(Y^(p/q)) for the normalized subtree mass Y, valid for
    1 <= q < p < q_max.

    Raises:
        InvalidParams: outside that range, or when the geometric series
            behind the bound diverges
    """
    qm = q_max(model)
    if not (1.0 <= q < p < qm):
        raise InvalidParams(f"need 1 <= q < p < q_max = {qm}, got p={p}, q={q}")
    b = float(model.b)
    ratio = p / q
    if ratio <= 2.0:
        base = 1.0 - b ** (-tau(model, p) + p * tau(model, q) / q)
        if base <= 0:
            raise InvalidParams(f"moment bound diverges for p={p}, q={q}")
        return b ** (-2.0 * tau(model, p / 2.0) + p * tau(model, q) / q) / base
    k = math.ceil(math.log2(ratio)) - 1
    base = 1.0 - b ** (-tau(model, 2.0 * q) + 2.0 * tau(model, q))
    if base <= 0:
        raise InvalidParams(f"moment bound diverges for p={p}, q={q}")
    return base ** (-(2 ** (k + 1)))


@dataclass
class MultifractalProfile:
    """Closed-form predictions for one weight model."""

    model: WeightModel
    q_max: float
    alpha_min: float
    tau_at_2: float
    tau_tilde_at_2: float
    dim2_predicted: float
    dimF_flat_predicted: float
    dimF_curve_predicted: float
    subcritical: bool
    spherical_predicted: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "model": self.model.to_dict(),
            "q_max": self.q_max,
            "alpha_min": self.alpha_min,
            "tau_at_2": self.tau_at_2,
            "tau_tilde_at_2": self.tau_tilde_at_2,
            "dim2_predicted": self.dim2_predicted,
            "dimF_flat_predicted": self.dimF_flat_predicted,
            "dimF_curve_predicted": self.dimF_curve_predicted,
            "subcritical": self.subcritical,
            "spherical_predicted": dict(self.spherical_predicted),
        }


def order_label(p: float) -> str:
    """Column-friendly name of an exponent: 1, 2.5, inf."""
    if math.isinf(p):
        return "inf"
    return f"{p:g}"


def predicted_dims(model: WeightModel) -> MultifractalProfile:
    """Fill a MultifractalProfile for a subcritical model."""
    _require_subcritical(model)
    tt2 = tau_tilde(model, 2.0)
    return MultifractalProfile(
        model=model,
        q_max=q_max(model),
        alpha_min=alpha_min(model),
        tau_at_2=tau(model, 2.0),
        tau_tilde_at_2=tt2,
        dim2_predicted=tt2,
        dimF_flat_predicted=min(2.0, tt2),
        dimF_curve_predicted=alpha_min(model),
        subcritical=True,
        spherical_predicted={order_label(p): spherical_exponent(model, p) for p in SPHERICAL_ORDERS},
    )


def tau_table(model: WeightModel, qs: Iterable[float]) -> Dict[str, np.ndarray]:
    """tau, tau' and tau~ sampled on a q-grid (q > 0), as CSV-ready columns."""
    grid = np.asarray(sorted(float(q) for q in qs), dtype=np.float64)
    if grid.size == 0 or grid[0] <= 0:
        raise InvalidParams("q-grid must be non-empty and strictly positive")
    return {
        "q": grid,
        "tau": np.array([tau(model, q) for q in grid]),
        "tau_prime": np.array([tau_prime(model, q) for q in grid]),
        "tau_tilde": np.array([tau_tilde(model, q) for q in grid]),
    }
