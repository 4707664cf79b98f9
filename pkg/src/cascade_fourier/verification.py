"""
Acceptance suites run by `cascade-fourier verify`.

Each check compares an observed number with a prediction (or a bound) and a
tolerance. Suites:

    trivial      closed forms and deterministic-model identities, under a second
    analytic     numerical oracles (Bessel, quadrature, van der Corput), seconds
    statistical  seeded ensembles against the dimension predictions, minutes
    full         all of the above
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from eliot import start_action
from scipy.integrate import quad
from scipy.special import j0

from cascade_fourier.cascade import (
    cell_moment_sum,
    epsilon,
    generate,
    moment_bound_exponent,
    moment_sum_S,
    refine,
    s_identity_rhs,
    total_mass,
    y_statistic,
)
from cascade_fourier.config import RunConfig
from cascade_fourier.curves import make_circle_arc, make_parabola_arc
from cascade_fourier.errors import CascadeError, InvalidParams
from cascade_fourier.estimation import (
    ConcentrationInput,
    builtin_scenarios,
    concentration_bound,
    concentration_mc,
    fit_power_law,
)
from cascade_fourier.estimation.concentration import RADEMACHER
from cascade_fourier.estimation.ensemble import EnsembleResult, ensemble_dim2, ensemble_fourier_dim
from cascade_fourier.estimation.projection import project_measure, projected_dim2, projection_dim2
from cascade_fourier.fourier import (
    cell_corners,
    cell_transform_flat,
    decay_profile,
    dyadic_frequency_grid,
    fit_decay,
    increment_transform,
    transform_curve,
    transform_flat,
    vdc_statistic,
)
from cascade_fourier.structure import alpha_min, order_label, q_max, tau, tau_tilde
from cascade_fourier.weights import WeightFamily, WeightModel, make_model

SUITE_NAMES = ("trivial", "analytic", "statistical", "full")
DEFAULT_ENSEMBLE = 32
MOMENT_SEEDS = 200
MOMENT_DEPTH = 12
MOMENT_CONSTANT = 10.0
EPSILON_DEPTHS = (8, 16)
EPSILON_RATE = 16 * 0.12
PROJECTION_SEEDS = 8
SPHERICAL_ORDERS = (1.0, 2.0, 4.0, math.inf)


@dataclass
class CheckResult:
    """One row of the verification report."""

    name: str
    predicted: float
    observed: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "predicted": self.predicted,
            "observed": self.observed,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def close(name: str, predicted: float, observed: float, tolerance: float) -> CheckResult:
    """|observed - predicted| <= tolerance; equal infinities pass."""
    if math.isinf(predicted) or math.isinf(observed):
        passed = predicted == observed
    else:
        passed = abs(observed - predicted) <= tolerance
    return CheckResult(name, float(predicted), float(observed), float(tolerance), bool(passed))


def at_most(name: str, bound: float, observed: float, tolerance: float = 0.0) -> CheckResult:
    """observed <= bound + tolerance."""
    return CheckResult(name, float(bound), float(observed), float(tolerance), bool(observed <= bound + tolerance))


@dataclass
class VerificationReport:
    suite: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"suite": self.suite, "passed": self.passed, "checks": [check.to_dict() for check in self.checks]}


def lognormal() -> WeightModel:
    return make_model(WeightFamily.LOGNORMAL, (0.09,))


def two_point() -> WeightModel:
    return make_model(WeightFamily.TWO_POINT, (1.5, 0.5, 0.5))


def deterministic(d: int = 1) -> WeightModel:
    return make_model(WeightFamily.DETERMINISTIC, (), 2, d)


class VerifyContext:
    """Run parameters shared by the checks, plus ensembles computed once per suite."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self._ensembles: Dict[str, EnsembleResult] = {}

    @property
    def threads(self) -> Optional[int]:
        return self.config.threads

    @property
    def seeds(self) -> List[int]:
        seeds = list(self.config.seeds)
        return seeds if len(seeds) >= 2 else list(range(DEFAULT_ENSEMBLE))

    def ensemble(self, support: str) -> EnsembleResult:
        """Lognormal(0.09) ensemble on the flat line or the full circle."""
        if support not in self._ensembles:
            cfg = self.config
            curve = make_circle_arc(2.0 * math.pi) if support == "circle" else None
            columns: tuple = ("sup",)
            if curve is not None:
                columns += tuple(f"sigma_{order_label(p)}" for p in SPHERICAL_ORDERS)
            self._ensembles[support] = ensemble_fourier_dim(
                lognormal(),
                curve,
                cfg.depth,
                self.seeds,
                k0=cfg.k0,
                k1=cfg.k1,
                n_theta=cfg.n_theta,
                n_shell=cfg.n_shell,
                enrich_normals=curve is not None,
                columns=columns,
                p_list=SPHERICAL_ORDERS,
                tol=cfg.tol,
                threads=self.threads,
            )
        return self._ensembles[support]


Check = Callable[[VerifyContext], List[CheckResult]]


# trivial


def check_closed_forms(ctx: VerifyContext) -> List[CheckResult]:
    ln, tp = lognormal(), two_point()
    return [
        close("lognormal_tau_2", 0.82, tau(ln, 2.0), 1e-9),
        close("lognormal_q_max", 10.0 / 3.0, q_max(ln), 1e-9),
        close("lognormal_alpha_min", 0.49, alpha_min(ln), 1e-9),
        close("two_point_alpha_min", 1.0 - math.log2(1.5), alpha_min(tp), 1e-9),
        close("two_point_tau_tilde_2", 1.0 - math.log2(1.25), tau_tilde(tp, 2.0), 1e-9),
    ]


def check_deterministic_structure(ctx: VerifyContext) -> List[CheckResult]:
    det = deterministic()
    qs = np.linspace(0.5, 8.0, 16)
    worst = max(abs(tau(det, float(q)) - (q - 1.0)) for q in qs)
    return [
        close("deterministic_tau_linear", 0.0, worst, 1e-12),
        close("deterministic_alpha_min", 1.0, alpha_min(det), 1e-12),
        close("deterministic_q_max", math.inf, q_max(det), 0.0),
    ]


def check_deterministic_cascade(ctx: VerifyContext) -> List[CheckResult]:
    r = generate(deterministic(), 10, seed=0, threads=1)
    spread = float(np.max(np.abs(r.masses - 2.0**-10)))
    return [
        close("deterministic_total_mass", 1.0, total_mass(r), 1e-12),
        close("deterministic_cell_masses", 0.0, spread, 1e-15),
        close("deterministic_epsilon_inf_1", 0.0, epsilon(r, math.inf, 1.0), 1e-12),
        close("deterministic_y_statistic", 1.0, y_statistic(r, 2.0, 3, 5), 1e-12),
    ]


def check_refinement_identity(ctx: VerifyContext) -> List[CheckResult]:
    model = lognormal()
    direct = generate(model, 8, seed=7, threads=1)
    refined = refine(generate(model, 6, seed=7, threads=1), 8, threads=1)
    return [close("refine_bit_identical", 0.0, float(np.max(np.abs(direct.masses - refined.masses))), 0.0)]


def check_power_law_fit(ctx: VerifyContext) -> List[CheckResult]:
    samples = [(2.0**k, 2.0 ** (-0.25 * k)) for k in range(10)]
    fit = fit_power_law(samples, base=2.0)
    return [
        close("power_law_noiseless_estimate", 0.5, fit.fourier_dim_estimate, 1e-12),
        close("power_law_noiseless_stderr", 0.0, fit.stderr, 1e-12),
    ]


def check_conservation(ctx: VerifyContext) -> List[CheckResult]:
    flat = generate(deterministic(2), 3, seed=0, threads=1)
    circle = generate(deterministic(), 8, seed=0, threads=1)
    projection = project_measure(circle, make_circle_arc(), (1.0, 0.0), out_levels=12)
    return [
        close("flat_transform_at_zero", 1.0, abs(transform_flat(flat, (0.0, 0.0)).value), 1e-12),
        close("projection_mass_conserved", total_mass(circle), projection.total, 1e-12),
    ]


def check_concentration_limit(ctx: VerifyContext) -> List[CheckResult]:
    inp = ConcentrationInput(a=[1.0], t=1e6, c_phi=1.0, p=8.0, q=1.0, M=2.0)
    return [close("concentration_large_t_limit", 2.0**-8, concentration_bound(inp), 1e-12)]


# analytic


def check_bessel_oracle(ctx: VerifyContext) -> List[CheckResult]:
    r = generate(deterministic(), 6, seed=0, threads=1)
    circle = make_circle_arc(2.0 * math.pi)
    radii = np.linspace(0.5, 200.0, 64)
    worst = max(abs(transform_curve(r, circle, (float(x), 0.0)).value - j0(x)) for x in radii)
    deep = generate(deterministic(), 8, seed=0, threads=1)
    profile = decay_profile(
        deep, circle, 4, 9, n_theta=16, enrich_normals=False, n_shell=16, threads=ctx.threads
    )
    fit = fit_decay(profile, "sup", base=2.0)
    return [
        at_most("bessel_j0_max_error", 1e-6, worst),
        close("bessel_decay_dimension", 1.0, fit.fourier_dim_estimate, 0.05),
    ]


def _reference_cell_integral(corner: np.ndarray, h: float, xi: np.ndarray) -> complex:
    value = 1.0 + 0j
    for lo, freq in zip(corner, xi):
        omega = 2.0 * math.pi * freq
        re = quad(lambda _x: 1.0, lo, lo + h, weight="cos", wvar=omega, epsabs=1e-14, epsrel=1e-13)[0]
        im = quad(lambda _x: 1.0, lo, lo + h, weight="sin", wvar=omega, epsabs=1e-14, epsrel=1e-13)[0]
        value *= complex(re, -im)
    return value


def check_flat_quadrature(ctx: VerifyContext, cases: int = 100) -> List[CheckResult]:
    gen = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(cases):
        b = int(gen.integers(2, 4))
        d = int(gen.integers(1, 3))
        n = int(gen.integers(0, 5))
        address = int(gen.integers(0, (b**d) ** n))
        xi = gen.uniform(-200.0, 200.0, size=d)
        h = float(b) ** -n
        corner = cell_corners(b, d, n, np.array([address]))[0] * h
        exact = cell_transform_flat(b, d, n, address, xi)
        worst = max(worst, abs(exact - _reference_cell_integral(corner, h, xi)))
    return [at_most("flat_cell_transform_vs_quadrature", 1e-10, worst)]


def check_s_y_identity(ctx: VerifyContext, cases: int = 100) -> List[CheckResult]:
    gen = np.random.default_rng(7)
    worst = 0.0
    for _ in range(cases):
        model = lognormal() if gen.random() < 0.5 else two_point()
        r = generate(model, 8, seed=int(gen.integers(0, 2**32)), threads=1)
        q = float(gen.uniform(1.0, 3.0))
        j = int(gen.integers(0, 8))
        cell = int(gen.integers(0, 2**j))
        lhs = cell_moment_sum(r, q, j, cell)
        worst = max(worst, abs(s_identity_rhs(r, q, j, cell) - lhs) / lhs)
    return [at_most("s_y_identity_relative_error", 1e-10, worst)]


def check_van_der_corput(ctx: VerifyContext) -> List[CheckResult]:
    circle = make_circle_arc(2.0 * math.pi)
    coarse = vdc_statistic(circle, dyadic_frequency_grid(12, per_octave=2))
    fine = vdc_statistic(circle, dyadic_frequency_grid(12, per_octave=4))
    return [
        at_most("vdc_statistic_circle", 3.0, fine),
        at_most("vdc_grid_doubling_ratio", 1.2, fine / coarse),
    ]


def check_projection(ctx: VerifyContext) -> List[CheckResult]:
    uniform = generate(deterministic(), 10, seed=0, threads=1)
    circle_fit = projected_dim2(project_measure(uniform, make_circle_arc(), (1.0, 0.0), 16), (8, 14))
    arc_fit = projected_dim2(project_measure(uniform, make_parabola_arc(), (1.0, 0.0), 16), (8, 14))
    return [
        close("projection_dim2_circle", 1.0, circle_fit.slope, 0.1),
        close("projection_dim2_parabola_tangent", 1.0, arc_fit.slope, 0.1),
    ]


# statistical


def check_dim2(ctx: VerifyContext) -> List[CheckResult]:
    cfg = ctx.config
    results = []
    for name, model in (("lognormal", lognormal()), ("two_point", two_point())):
        fits = ensemble_dim2(model, ctx.seeds, cfg.n_min, cfg.n_max, threads=ctx.threads)
        mean = float(np.mean([fit.slope for fit in fits]))
        results.append(close(f"dim2_{name}", tau_tilde(model, 2.0), mean, 0.05))
    return results


def check_moment_bounds(ctx: VerifyContext) -> List[CheckResult]:
    orders = SPHERICAL_ORDERS
    results = []
    for name, model in (("lognormal", lognormal()), ("two_point", two_point())):
        sums: Dict[tuple, float] = {}
        for seed in range(MOMENT_SEEDS):
            r = generate(model, 0, seed, threads=1)
            for n in range(MOMENT_DEPTH + 1):
                if n > r.depth:
                    r = refine(r, n, threads=1)
                for p in orders:
                    for q in orders:
                        for j in range(n + 1):
                            key = (p, q, j, n)
                            sums[key] = sums.get(key, 0.0) + moment_sum_S(r, p, q, j)
        worst = max(
            (total / MOMENT_SEEDS) / model.b ** moment_bound_exponent(model, p, q, j, n)
            for (p, q, j, n), total in sums.items()
        )
        results.append(at_most(f"moment_bound_constant_{name}", MOMENT_CONSTANT, worst))
    return results


def check_epsilon_decay(ctx: VerifyContext) -> List[CheckResult]:
    """
    Mean |eps_{inf,1,n}| against the envelope C / n at n = 8 and n = 16, with
    C = 16 * 0.12 so the depth-16 envelope is the 0.12 cap.
    """
    results = []
    for name, model in (("lognormal", lognormal()), ("two_point", two_point())):
        magnitudes: Dict[int, List[float]] = {depth: [] for depth in EPSILON_DEPTHS}
        for seed in ctx.seeds:
            r = generate(model, EPSILON_DEPTHS[0], seed, threads=ctx.threads)
            for depth in EPSILON_DEPTHS:
                r = refine(r, depth, threads=ctx.threads) if depth > r.depth else r
                magnitudes[depth].append(abs(epsilon(r, math.inf, 1.0)))
        for depth in EPSILON_DEPTHS:
            mean = float(np.mean(magnitudes[depth]))
            results.append(at_most(f"epsilon_inf_1_depth{depth}_{name}", EPSILON_RATE / depth, mean))
    return results


def check_increment_decay(ctx: VerifyContext) -> List[CheckResult]:
    model = lognormal()
    shallow, deep = [], []
    for seed in ctx.seeds[:8]:
        shallow.append(abs(increment_transform(generate(model, 4, seed, threads=1), None, 1.0)))
        deep.append(abs(increment_transform(generate(model, 12, seed, threads=1), None, 1.0)))
    return [at_most("increment_shrinks_with_depth", float(np.mean(shallow)), float(np.mean(deep)))]


def check_flat_fourier_dim(ctx: VerifyContext) -> List[CheckResult]:
    result = ctx.ensemble("flat")
    return [close("fourier_dim_flat_lognormal", min(2.0, tau_tilde(lognormal(), 2.0)), result.mean, 0.15)]


def check_curve_fourier_dim(ctx: VerifyContext) -> List[CheckResult]:
    curve = ctx.ensemble("circle")
    flat = ctx.ensemble("flat")
    return [
        close("fourier_dim_circle_lognormal", alpha_min(lognormal()), curve.mean, 0.15),
        at_most("flat_minus_curve_separation", flat.mean - 0.2, curve.mean),
    ]


def check_spherical_ordering(ctx: VerifyContext) -> List[CheckResult]:
    curve = ctx.ensemble("circle")
    exponents = [curve.column_mean(f"sigma_{order_label(p)}") for p in SPHERICAL_ORDERS]
    # decay exponents of power means shrink as p grows
    results = [at_most("sigma_inf_vs_sigma_2", exponents[1], exponents[-1], 0.05)]
    for i in range(1, len(SPHERICAL_ORDERS)):
        p, q = SPHERICAL_ORDERS[i - 1], SPHERICAL_ORDERS[i]
        name = f"sigma_{order_label(q)}_vs_sigma_{order_label(p)}"
        results.append(at_most(name, exponents[i - 1], exponents[i], 0.05))
    return results


def check_projection_bound(ctx: VerifyContext) -> List[CheckResult]:
    """The circle ensemble's Fourier dimension stays below the projection's dim_2, within 0.1."""
    cfg = ctx.config
    curve = ctx.ensemble("circle")
    circle = make_circle_arc(2.0 * math.pi)
    slopes = []
    for seed in curve.kept[:PROJECTION_SEEDS]:
        r = generate(lognormal(), cfg.depth, seed, threads=ctx.threads)
        slopes.append(projection_dim2(r, circle, (1.0, 0.0), out_levels=16, fit_levels=(6, 12)).slope)
    return [at_most("fourier_dim_below_projection_dim2", float(np.mean(slopes)), curve.mean, 0.1)]


def check_concentration(ctx: VerifyContext) -> List[CheckResult]:
    results = []
    for scenario in builtin_scenarios():
        outcome = concentration_mc(scenario.dist, scenario.inp, trials=100_000, seed=0, name=scenario.name)
        results.append(at_most(f"concentration_{scenario.name}", outcome.bound, outcome.empirical))
    single = ConcentrationInput(a=[1.0], t=0.5, c_phi=1.0, p=8.0, q=1.0, M=2.0)
    outcome = concentration_mc(RADEMACHER, single, trials=100_000, seed=1, name="single_exact")
    exact = RADEMACHER.exact_tail(1.0, 0.5)
    results.append(close("concentration_single_exact_tail", exact, outcome.empirical, 3.0 * outcome.stderr))
    return results


TRIVIAL: List[Check] = [
    check_closed_forms,
    check_deterministic_structure,
    check_deterministic_cascade,
    check_refinement_identity,
    check_power_law_fit,
    check_conservation,
    check_concentration_limit,
]
ANALYTIC: List[Check] = [
    check_bessel_oracle,
    check_flat_quadrature,
    check_s_y_identity,
    check_van_der_corput,
    check_projection,
]
STATISTICAL: List[Check] = [
    check_dim2,
    check_moment_bounds,
    check_epsilon_decay,
    check_increment_decay,
    check_concentration,
    check_flat_fourier_dim,
    check_curve_fourier_dim,
    check_spherical_ordering,
    check_projection_bound,
]
SUITES: Dict[str, List[Check]] = {
    "trivial": TRIVIAL,
    "analytic": ANALYTIC,
    "statistical": STATISTICAL,
    "full": TRIVIAL + ANALYTIC + STATISTICAL,
}


def run_suite(
    suite: str, config: Optional[RunConfig] = None, checks: Optional[Sequence[Check]] = None
) -> VerificationReport:
    """
    Run every check of a suite. A check that raises a CascadeError is
    recorded as a failed row named after the check.
    """
    if suite not in SUITES:
        raise InvalidParams(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}")
    ctx = VerifyContext(config or RunConfig(command="verify", suite=suite))
    report = VerificationReport(suite=suite)
    with start_action(action_type="verify_suite", suite=suite) as suite_action:
        for check in checks or SUITES[suite]:
            name = check.__name__.removeprefix("check_")
            with start_action(action_type="verify_check", check=name) as action:
                try:
                    rows = check(ctx)
                except CascadeError as e:
                    action.log(message_type="check_error", error=str(e), error_type=type(e).__name__)
                    rows = [CheckResult(name, math.nan, math.nan, math.nan, False)]
                for row in rows:
                    action.log(message_type="check_result", **row.to_dict())
                report.checks.extend(rows)
        suite_action.log(message_type="suite_result", passed=report.passed, failures=len(report.failures))
    return report
