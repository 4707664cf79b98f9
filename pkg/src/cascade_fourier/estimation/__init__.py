"""
Dimension estimators: log-log power-law fits, ensemble orchestration,
projection diagnostics and the concentration-inequality checker.

Import `ensemble` and `projection` by module path; they depend on the
cascade and Fourier layers, which in turn use the fitting helpers here.
"""

from cascade_fourier.estimation.fitting import DecayFit, fit_linear, fit_power_law
from cascade_fourier.estimation.concentration import (
    BoundedDistribution,
    ConcentrationInput,
    builtin_scenarios,
    concentration_bound,
    concentration_log_bound,
    concentration_mc,
)

__all__ = [
    "DecayFit",
    "fit_linear",
    "fit_power_law",
    "BoundedDistribution",
    "ConcentrationInput",
    "builtin_scenarios",
    "concentration_bound",
    "concentration_log_bound",
    "concentration_mc",
]
