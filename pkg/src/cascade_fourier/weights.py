"""
Random weight models driving the cascade.

A `WeightModel` describes the law of the weight vector W = (W_i), i in Lambda,
with |Lambda| = b^d. Components are i.i.d. with unit mean; sampling is
counter-based, so the weights attached to a node depend only on
(seed, level, index).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Tuple

import numpy as np
from scipy.stats import norm

from cascade_fourier import rng
from cascade_fourier.errors import InvalidParams

MEAN_TOLERANCE = 1e-12


class WeightFamily(str, Enum):
    """Built-in weight distributions."""

    DETERMINISTIC = "deterministic"
    LOGNORMAL = "lognormal"
    TWO_POINT = "two_point"


# parameter names per family, in tuple order
PARAM_NAMES: Dict[WeightFamily, Tuple[str, ...]] = {
    WeightFamily.DETERMINISTIC: (),
    WeightFamily.LOGNORMAL: ("lambda",),
    WeightFamily.TWO_POINT: ("w_plus", "w_minus", "p"),
}


@dataclass(frozen=True)
class NodeKey:
    """Address of a cascade node in a seeded realization."""

    seed: int
    level: int
    index: int


@dataclass(frozen=True)
class WeightModel:
    """Validated weight law on b^d branches (build with `make_model`)."""

    family: WeightFamily
    params: Tuple[float, ...]
    b: int
    d: int
    branch_count: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "branch_count", self.b**self.d)

    @property
    def sigma(self) -> float:
        """Standard deviation of log W for the lognormal family."""
        if self.family != WeightFamily.LOGNORMAL:
            return 0.0
        return math.sqrt(2.0 * self.params[0] * math.log(self.b))

    def named_params(self) -> Dict[str, float]:
        return dict(zip(PARAM_NAMES[self.family], self.params))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "family": self.family.value,
            "params": self.named_params(),
            "b": self.b,
            "d": self.d,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WeightModel":
        family = WeightFamily(data["family"])
        raw = data.get("params") or {}
        if isinstance(raw, Mapping):
            try:
                params = tuple(float(raw[name]) for name in PARAM_NAMES[family])
            except KeyError as e:
                raise InvalidParams(f"missing parameter {e} for family {family.value}") from e
        else:
            params = tuple(float(v) for v in raw)
        return make_model(family, params, int(data["b"]), int(data["d"]))


def make_model(
    family: WeightFamily | str,
    params: Tuple[float, ...] = (),
    b: int = 2,
    d: int = 1,
) -> WeightModel:
    """
    Build and validate a weight model.

    Args:
        family: distribution family
        params: () for deterministic, (lambda,) for lognormal,
            (w_plus, w_minus, p) for two-point
        b: base, at least 2
        d: spatial dimension, at least 1

    Returns:
        Validated WeightModel

    Raises:
        InvalidParams: on any violated precondition
    """
    try:
        family = WeightFamily(family)
    except ValueError as e:
        raise InvalidParams(f"unknown weight family {family!r}") from e
    if int(b) != b or b < 2:
        raise InvalidParams(f"base b must be an integer >= 2, got {b}")
    if int(d) != d or d < 1:
        raise InvalidParams(f"dimension d must be an integer >= 1, got {d}")

    params = tuple(float(v) for v in params)
    expected = len(PARAM_NAMES[family])
    if len(params) != expected:
        raise InvalidParams(
            f"{family.value} takes {expected} parameter(s) {PARAM_NAMES[family]}, got {params}"
        )

    if family == WeightFamily.LOGNORMAL:
        (lam,) = params
        if not lam > 0 or not math.isfinite(lam):
            raise InvalidParams(f"lognormal intermittency must be positive, got {lam}")
    elif family == WeightFamily.TWO_POINT:
        w_plus, w_minus, p = params
        if not w_minus > 0:
            raise InvalidParams(f"w_minus must be positive, got {w_minus}")
        if not (w_plus > 1 > w_minus):
            raise InvalidParams(f"need w_plus > 1 > w_minus, got {w_plus}, {w_minus}")
        if not 0 < p < 1:
            raise InvalidParams(f"probability must lie in (0, 1), got {p}")
        mean = p * w_plus + (1 - p) * w_minus
        if abs(mean - 1.0) > MEAN_TOLERANCE:
            raise InvalidParams(f"two-point mean must be 1, got {mean!r}")

    return WeightModel(family=family, params=params, b=int(b), d=int(d))


def _transform(model: WeightModel, u: np.ndarray) -> np.ndarray:
    """Map uniforms in (0, 1) to weights."""
    if model.family == WeightFamily.DETERMINISTIC:
        return np.ones_like(u)
    if model.family == WeightFamily.LOGNORMAL:
        sigma = model.sigma
        return np.exp(sigma * norm.ppf(u) - 0.5 * sigma * sigma)
    w_plus, w_minus, p = model.params
    return np.where(u < p, w_plus, w_minus)


def weight_block(model: WeightModel, seed: int, level: int, indices: np.ndarray) -> np.ndarray:
    """
    Weight tuples for many nodes of one level.

    Returns:
        Array of shape (len(indices), b^d); row k is the tuple attached to
        node (level, indices[k])
    """
    indices = np.asarray(indices, dtype=np.uint64)
    slots = np.arange(model.branch_count, dtype=np.uint64)
    u = rng.uniforms(seed, level, indices[:, None], slots[None, :], rng.STREAM_WEIGHTS)
    return _transform(model, u)


def sample_weights(model: WeightModel, node_key: NodeKey | Tuple[int, int, int]) -> Tuple[float, ...]:
    """
    The weight tuple attached to one node.

    Deterministic in node_key and bit-identical to the corresponding row of
    `weight_block`, which the cascade generator uses.
    """
    seed, level, index = (
        (node_key.seed, node_key.level, node_key.index)
        if isinstance(node_key, NodeKey)
        else node_key
    )
    if level < 0 or not 0 <= index < model.branch_count**level:
        raise InvalidParams(f"node ({level}, {index}) outside the tree")
    if index >= rng.MAX_INDEX:
        raise InvalidParams(f"node index {index} needs more than {int(rng.INDEX_BITS)} bits")
    return tuple(float(w) for w in weight_block(model, seed, level, np.array([index]))[0])


def sample_marginal(model: WeightModel, seed: int, size: int) -> np.ndarray:
    """Independent draws of one weight component (Monte Carlo stream)."""
    idx = np.arange(size, dtype=np.uint64)
    u = rng.uniforms(seed, 0, idx, 0, rng.STREAM_MONTE_CARLO)
    return _transform(model, u)


def marginal_moment(model: WeightModel, q: float) -> float:
    """
    Exact E(W_i^q) for q >= 0.

    Deterministic: 1; lognormal: b^(lambda q (q-1)); two-point:
    p w_plus^q + (1-p) w_minus^q.
    """
    if q < 0:
        raise InvalidParams(f"moment order must be >= 0, got {q}")
    if model.family == WeightFamily.DETERMINISTIC:
        return 1.0
    if model.family == WeightFamily.LOGNORMAL:
        (lam,) = model.params
        return float(model.b ** (lam * q * (q - 1.0)))
    w_plus, w_minus, p = model.params
    return p * w_plus**q + (1.0 - p) * w_minus**q


def log_marginal_moment(model: WeightModel, q: float) -> float:
    """Natural log of E(W^q), evaluated without overflow for large q."""
    if model.family == WeightFamily.DETERMINISTIC:
        return 0.0
    if model.family == WeightFamily.LOGNORMAL:
        (lam,) = model.params
        return lam * q * (q - 1.0) * math.log(model.b)
    w_plus, w_minus, p = model.params
    ratio = ((1.0 - p) / p) * (w_minus / w_plus) ** q
    return math.log(p) + q * math.log(w_plus) + math.log1p(ratio)


def tail_bound(model: WeightModel, t: float, p_exponent: float = 8.0) -> float:
    """
    Upper bound Phi(t) on P(max_j W_j > t + 1).

    Bounded families return the exact probability (zero beyond the support).
    For the lognormal family each component obeys the Gaussian Chernoff tail
    P(W > t + 1) <= exp(-x^2 / 2), x = (ln(t + 1) + sigma^2 / 2) / sigma; the
    union bound over b^d components, written as c * t^(-p), uses
    c = b^d * sup_t t^p exp(-x^2 / 2) (see `tail_constant`).

    Raises:
        InvalidParams: t <= 0 or p_exponent <= 0
    """
    if not t > 0:
        raise InvalidParams(f"t must be positive, got {t}")
    if not p_exponent > 0:
        raise InvalidParams(f"tail exponent must be positive, got {p_exponent}")
    level = t + 1.0
    if model.family == WeightFamily.DETERMINISTIC:
        return 0.0
    if model.family == WeightFamily.TWO_POINT:
        w_plus, _, p = model.params
        if level >= w_plus:
            return 0.0
        return 1.0 - (1.0 - p) ** model.branch_count
    return tail_constant(model, p_exponent) * t ** (-p_exponent)


def tail_constant(model: WeightModel, p_exponent: float) -> float:
    """
    The constant c of the power-law tail bound c * t^(-p).

    For the lognormal family, with ln(t + 1) >= max(ln t, 0), the supremum of
    t^p exp(-x^2 / 2) over t > 0 is exp(sigma^2 p (p - 1) / 2) = E(W^p) when
    p >= 1/2 (attained at ln t = sigma^2 (p - 1/2)) and exp(-sigma^2 / 8) below.
    """
    if model.family == WeightFamily.LOGNORMAL:
        order = max(p_exponent, 0.5)
        return model.branch_count * math.exp(0.5 * model.sigma**2 * order * (order - 1.0))
    if model.family == WeightFamily.TWO_POINT:
        return model.branch_count * model.params[0] ** p_exponent
    return 0.0


def exact_tail(model: WeightModel, t: float) -> float:
    """Exact P(max_j W_j > t + 1) from the Gaussian CDF (lognormal) or the support."""
    level = t + 1.0
    if model.family == WeightFamily.LOGNORMAL:
        sigma = model.sigma
        single = float(norm.sf((math.log(level) + 0.5 * sigma * sigma) / sigma))
        return -math.expm1(model.branch_count * math.log1p(-single))
    return tail_bound(model, t)
