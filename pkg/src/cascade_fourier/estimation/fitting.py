"""
Least-squares power-law fits in log-log coordinates.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from cascade_fourier.errors import InvalidParams, NonpositiveMagnitude, TooFewPoints

MIN_POINTS = 3


@dataclass(frozen=True)
class DecayFit:
    """
    Straight-line fit y = slope * x + intercept.

    For decay fits x = log_b r and y = log_b |magnitude|, so a transform
    decaying like r^(-s/2) has slope -s/2 and `fourier_dim_estimate` s.
    """

    xs: Tuple[float, ...]
    ys: Tuple[float, ...]
    slope: float
    intercept: float
    stderr: float

    @property
    def fourier_dim_estimate(self) -> float:
        return -2.0 * self.slope

    @property
    def points(self) -> int:
        return len(self.xs)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            "xs": list(self.xs),
            "ys": list(self.ys),
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "fourier_dim_estimate": self.fourier_dim_estimate,
        }


def fit_linear(xs: np.ndarray, ys: np.ndarray) -> DecayFit:
    """
    Ordinary least squares after sorting by x, so the result does not depend
    on input order.

    Raises:
        TooFewPoints: fewer than three points
        InvalidParams: repeated x values or mismatched lengths
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise InvalidParams(f"x and y lengths differ: {xs.shape} vs {ys.shape}")
    if xs.size < MIN_POINTS:
        raise TooFewPoints(f"need at least {MIN_POINTS} points, got {xs.size}")
    order = np.lexsort((ys, xs))
    xs, ys = xs[order], ys[order]
    if np.any(np.diff(xs) == 0):
        raise InvalidParams("fit abscissae must be distinct")
    result = linregress(xs, ys)
    stderr = float(result.stderr)
    return DecayFit(
        xs=tuple(float(x) for x in xs),
        ys=tuple(float(y) for y in ys),
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=stderr if math.isfinite(stderr) else 0.0,
    )


def fit_power_law(samples: Sequence[Tuple[float, float]], base: float = 2.0) -> DecayFit:
    """
    Fit magnitude ~ C r^slope from (r, magnitude) pairs.

    Raises:
        TooFewPoints: fewer than three samples
        NonpositiveMagnitude: a zero or negative magnitude
    """
    if len(samples) < MIN_POINTS:
        raise TooFewPoints(f"need at least {MIN_POINTS} samples, got {len(samples)}")
    radii = np.array([r for r, _ in samples], dtype=np.float64)
    magnitudes = np.array([m for _, m in samples], dtype=np.float64)
    if np.any(magnitudes <= 0) or not np.all(np.isfinite(magnitudes)):
        raise NonpositiveMagnitude("log-log fit needs finite positive magnitudes")
    if np.any(radii <= 0):
        raise InvalidParams("radii must be positive")
    ln_base = math.log(base)
    return fit_linear(np.log(radii) / ln_base, np.log(magnitudes) / ln_base)
