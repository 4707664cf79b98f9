"""
Exponential-moment concentration bound for weighted sums of independent
zero-mean variables with a polynomial tail, and its Monte Carlo check.

For X_k with P(|X_k| > s) <= c s^(-p), a_k >= 0, M > 1 and t > 0:

    P(sum a_k X_k > t) <= N c M^(-p) + exp(-lam t + K lam^2 sum a_k^2),
    lam = q log M / (M max a_k),

with the second-moment constant K made explicit.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from eliot import start_action
from scipy.special import logsumexp

from cascade_fourier import rng
from cascade_fourier.errors import InvalidParams

DEFAULT_K = 8.0
MIN_TRIALS = 10_000
PROB_TOLERANCE = 1e-12
CHUNK_ELEMENTS = 2**22


@dataclass(frozen=True)
class ConcentrationInput:
    """Everything the bound needs; validated on construction."""

    a: Sequence[float]
    t: float
    c_phi: float = 1.0
    p: float = 8.0
    q: float = 1.0
    M: float = 2.0
    K: float = DEFAULT_K

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if not self.a:
            raise InvalidParams("coefficient list is empty")
        if any(v < 0 or not math.isfinite(v) for v in self.a):
            raise InvalidParams("coefficients must be finite and >= 0")
        if max(self.a) == 0.0:
            raise InvalidParams("all coefficients are zero; the sum is identically 0")
        if not self.p > 4:
            raise InvalidParams(f"tail exponent must exceed 4, got {self.p}")
        if not self.M > 1:
            raise InvalidParams(f"truncation M must exceed 1, got {self.M}")
        if not 0 < self.q <= self.p / 2.0 - 1.0:
            raise InvalidParams(f"need 0 < q <= p/2 - 1 = {self.p / 2 - 1}, got {self.q}")
        if not self.t > 0:
            raise InvalidParams(f"threshold must be positive, got {self.t}")
        if not self.c_phi > 0:
            raise InvalidParams(f"tail constant must be positive, got {self.c_phi}")
        if not self.K > 0:
            raise InvalidParams(f"second-moment constant must be positive, got {self.K}")

    @property
    def N(self) -> int:
        return len(self.a)

    @property
    def lam(self) -> float:
        return self.q * math.log(self.M) / (self.M * max(self.a))


def concentration_log_bound(inp: ConcentrationInput) -> float:
    """Natural log of the bound, evaluated without overflow."""
    lam = inp.lam
    sum_sq = math.fsum(v * v for v in inp.a)
    truncation = math.log(inp.N) + math.log(inp.c_phi) - inp.p * math.log(inp.M)
    exponential = -lam * inp.t + inp.K * lam * lam * sum_sq
    return float(logsumexp([truncation, exponential]))


def concentration_bound(inp: ConcentrationInput) -> float:
    """N c M^(-p) + exp(-lam t + K lam^2 sum a^2); math.inf when it overflows."""
    log_value = concentration_log_bound(inp)
    if log_value > math.log(np.finfo(np.float64).max):
        return math.inf
    return math.exp(log_value)


@dataclass(frozen=True)
class BoundedDistribution:
    """A finite zero-mean law: values with probabilities."""

    values: Sequence[float]
    probs: Sequence[float]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(v) for v in self.probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        if len(values) != len(probs) or not values:
            raise InvalidParams("values and probabilities must be non-empty and of equal length")
        if any(pr <= 0 for pr in probs):
            raise InvalidParams("probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > PROB_TOLERANCE:
            raise InvalidParams(f"probabilities sum to {math.fsum(probs)!r}")
        mean = math.fsum(v * pr for v, pr in zip(values, probs))
        if abs(mean) > PROB_TOLERANCE:
            raise InvalidParams(f"distribution mean must be 0, got {mean!r}")

    def satisfies_tail(self, c_phi: float, p: float) -> bool:
        """P(|X| > s) <= c s^(-p) for every s > 0 (checked just below each |value|)."""
        for level in sorted({abs(v) for v in self.values if v != 0}):
            mass = math.fsum(pr for v, pr in zip(self.values, self.probs) if abs(v) >= level)
            if mass > c_phi * level ** (-p):
                return False
        return True

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF map from uniforms."""
        edges = np.cumsum(self.probs)[:-1]
        return np.asarray(self.values)[np.searchsorted(edges, u, side="right")]

    def exact_tail(self, a: float, t: float) -> float:
        """P(a X > t) for a single variable."""
        return math.fsum(pr for v, pr in zip(self.values, self.probs) if a * v > t)


@dataclass
class ConcentrationCheck:
    """Outcome of one Monte Carlo run against the bound."""

    name: str
    empirical: float
    stderr: float
    bound: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound


def concentration_mc(
    dist: BoundedDistribution,
    inp: ConcentrationInput,
    trials: int = 100_000,
    seed: int = 0,
    name: str = "custom",
) -> ConcentrationCheck:
    """
    Empirical P(sum a_k X_k > t) over independent trials next to the bound.

    Draws come from the Monte Carlo stream: trial i, variable k uses the
    counter (slot k, index i).

    Raises:
        InvalidParams: fewer than 10^4 trials, or dist violating the declared tail
    """
    if trials < MIN_TRIALS:
        raise InvalidParams(f"need at least {MIN_TRIALS} trials, got {trials}")
    if not dist.satisfies_tail(inp.c_phi, inp.p):
        raise InvalidParams(f"distribution does not satisfy P(|X| > s) <= {inp.c_phi} s^-{inp.p}")
    coeffs = np.asarray(inp.a)
    slots = np.arange(inp.N, dtype=np.uint64)
    rows = max(1, CHUNK_ELEMENTS // inp.N)
    with start_action(action_type="concentration_mc", scenario=name, trials=trials, n=inp.N) as action:
        hits = 0
        for start in range(0, trials, rows):
            idx = np.arange(start, min(start + rows, trials), dtype=np.uint64)
            u = rng.uniforms(seed, 0, idx[:, None], slots[None, :], rng.STREAM_MONTE_CARLO)
            sums = np.sum(dist.sample(u) * coeffs[None, :], axis=1)
            hits += int(np.count_nonzero(sums > inp.t))
        empirical = hits / trials
        stderr = math.sqrt(max(empirical * (1.0 - empirical), 0.0) / trials)
        bound = concentration_bound(inp)
        action.log(message_type="concentration_result", empirical=empirical, bound=bound)
        return ConcentrationCheck(name=name, empirical=empirical, stderr=stderr, bound=bound, trials=trials)


@dataclass(frozen=True)
class Scenario:
    name: str
    dist: BoundedDistribution
    inp: ConcentrationInput


RADEMACHER = BoundedDistribution(values=(-1.0, 1.0), probs=(0.5, 0.5))
SKEWED = BoundedDistribution(values=(-1.0, 2.0), probs=(2.0 / 3.0, 1.0 / 3.0))


def builtin_scenarios() -> List[Scenario]:
    """Three settings where the bound holds with margin at K = 8."""
    return [
        Scenario(
            name="rademacher_256",
            dist=RADEMACHER,
            inp=ConcentrationInput(a=[1.0 / 16.0] * 256, t=5.0, c_phi=1.0, p=8.0, q=3.0, M=1000.0),
        ),
        Scenario(
            name="skewed_64",
            dist=SKEWED,
            inp=ConcentrationInput(a=[1.0 / 8.0] * 64, t=4.0, c_phi=2.0**8, p=8.0, q=1.0, M=180.0),
        ),
        Scenario(
            name="single_rademacher",
            dist=RADEMACHER,
            inp=ConcentrationInput(a=[1.0], t=0.5, c_phi=1.0, p=8.0, q=1.0, M=2.0),
        ),
    ]
