"""
Tests for the structure function and the predicted dimensions.
"""
import math

import numpy as np
import pytest

from cascade_fourier.errors import InvalidParams, NotSubcritical
from cascade_fourier.structure import (
    alpha_min,
    check_subcritical,
    legendre_gap,
    numeric_tau_prime,
    order_label,
    predicted_dims,
    q_max,
    spherical_exponent,
    tau,
    tau_prime,
    tau_table,
    tau_tilde,
    y_moment_bound,
)
from cascade_fourier.weights import WeightFamily, make_model


@pytest.fixture(scope="module")
def lognormal():
    return make_model(WeightFamily.LOGNORMAL, (0.09,))


@pytest.fixture(scope="module")
def two_point():
    return make_model(WeightFamily.TWO_POINT, (1.5, 0.5, 0.5))


@pytest.fixture(scope="module")
def deterministic():
    return make_model(WeightFamily.DETERMINISTIC)


@pytest.fixture(scope="module")
def models(lognormal, two_point, deterministic):
    return [lognormal, two_point, deterministic]


class TestTau:
    """tau(q) and its derivative."""

    def test_deterministic_linear(self, deterministic):
        for q in (0.0, 0.5, 2.0, 7.0):
            assert tau(deterministic, q) == pytest.approx(q - 1.0, abs=1e-15)

    def test_lognormal_at_two(self, lognormal):
        assert tau(lognormal, 2.0) == pytest.approx(0.82, abs=1e-12)

    def test_two_point_at_two(self, two_point):
        assert tau(two_point, 2.0) == pytest.approx(2.0 - math.log2(2.5), abs=1e-12)
        assert tau(two_point, 2.0) == pytest.approx(0.67807, abs=1e-5)

    def test_fixed_points(self, models):
        """tau(0) = -d and tau(1) = 0 for unit-mean weights."""
        for model in models:
            assert tau(model, 0.0) == pytest.approx(-1.0, abs=1e-12)
            assert tau(model, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_negative_order(self, lognormal):
        with pytest.raises(InvalidParams):
            tau(lognormal, -0.5)

    def test_concave(self, lognormal, two_point):
        """Chord inequality on random triples in [0.1, 30]."""
        gen = np.random.default_rng(3)
        for model in (lognormal, two_point):
            for _ in range(200):
                q1, q2, q3 = np.sort(gen.uniform(0.1, 30.0, size=3))
                w = (q3 - q2) / (q3 - q1)
                chord = w * tau(model, q1) + (1.0 - w) * tau(model, q3)
                assert tau(model, q2) >= chord - 1e-9

    def test_lognormal_derivative(self, lognormal):
        assert tau_prime(lognormal, 2.0) == pytest.approx(0.73, abs=1e-12)

    def test_numeric_derivative_agrees(self, models):
        """Richardson differences match the closed forms at q = 1.7."""
        for model in models:
            assert numeric_tau_prime(model, 1.7) == pytest.approx(tau_prime(model, 1.7), abs=1e-6)

    def test_legendre_gap_nonincreasing(self, lognormal, two_point):
        qs = np.linspace(1.0, 64.0, 400)
        for model in (lognormal, two_point):
            gaps = np.array([legendre_gap(model, q) for q in qs])
            assert np.all(np.diff(gaps) <= 1e-9)


class TestSubcriticality:
    """tau'(1) > 0."""

    def test_builtins_subcritical(self, models):
        assert all(check_subcritical(model) for model in models)

    def test_two_point_derivative_at_one(self, two_point):
        assert tau_prime(two_point, 1.0) == pytest.approx(0.81127, abs=1e-4)

    def test_strong_intermittency(self):
        """lambda = 1.5 dies out: tau'(1) = -0.5."""
        model = make_model(WeightFamily.LOGNORMAL, (1.5,))
        assert not check_subcritical(model)
        with pytest.raises(NotSubcritical):
            q_max(model)
        with pytest.raises(NotSubcritical):
            predicted_dims(model)


class TestQmaxAndAlphaMin:
    """Closed forms for q_max and alpha_min."""

    def test_lognormal(self, lognormal):
        assert q_max(lognormal) == pytest.approx(10.0 / 3.0, abs=1e-9)
        assert alpha_min(lognormal) == pytest.approx(0.49, abs=1e-9)

    def test_lognormal_root_equation(self, lognormal):
        qm = q_max(lognormal)
        assert qm * tau_prime(lognormal, qm) == pytest.approx(tau(lognormal, qm), abs=1e-8)

    def test_lognormal_root_capped(self):
        """A closed-form root beyond q = 512 is reported as infinite, like the bisected families."""
        assert q_max(make_model(WeightFamily.LOGNORMAL, (4e-6,))) == pytest.approx(500.0)
        faint = make_model(WeightFamily.LOGNORMAL, (1e-6,))
        assert q_max(faint) == math.inf
        assert alpha_min(faint) == pytest.approx(1.0 - 1023e-6, abs=1e-12)

    def test_two_point(self, two_point):
        assert q_max(two_point) == math.inf
        assert alpha_min(two_point) == pytest.approx(1.0 - math.log2(1.5), abs=1e-9)

    def test_deterministic(self, deterministic):
        assert q_max(deterministic) == math.inf
        assert alpha_min(deterministic) == 1.0

    def test_alpha_min_is_slope_limit(self, models):
        for model in models:
            assert abs(tau_tilde(model, 64.0) / 64.0 - alpha_min(model)) <= 0.02

    def test_alpha_min_range(self, models):
        for model in models:
            assert 0.0 < alpha_min(model) <= model.d

    def test_two_point_root_by_bisection(self):
        """A rare heavy upper weight (p < 1/b) gives a finite root."""
        model = make_model(WeightFamily.TWO_POINT, (3.0, 0.5, 0.2))
        qm = q_max(model)
        assert 1.0 < qm < 512.0
        assert qm * tau_prime(model, qm) == pytest.approx(tau(model, qm), abs=1e-8)
        assert alpha_min(model) == pytest.approx(tau(model, qm) / qm)


class TestTauTilde:
    """Linear continuation past q_max."""

    def test_below_q_max(self, lognormal):
        assert tau_tilde(lognormal, 2.0) == pytest.approx(0.82, abs=1e-12)

    def test_above_q_max(self, lognormal):
        assert tau_tilde(lognormal, 4.0) == pytest.approx(1.96, abs=1e-9)

    def test_continuous_at_q_max(self, lognormal):
        qm = q_max(lognormal)
        assert tau_tilde(lognormal, qm - 1e-9) == pytest.approx(tau_tilde(lognormal, qm + 1e-9), abs=1e-7)

    def test_deterministic(self, deterministic):
        for p in (0.5, 3.0, 100.0):
            assert tau_tilde(deterministic, p) == pytest.approx(p - 1.0, abs=1e-12)

    def test_nonpositive_order(self, lognormal):
        with pytest.raises(InvalidParams):
            tau_tilde(lognormal, 0.0)


class TestPredictedDims:
    """MultifractalProfile contents."""

    def test_deterministic(self, deterministic):
        profile = predicted_dims(deterministic)
        assert profile.dim2_predicted == pytest.approx(1.0)
        assert profile.dimF_flat_predicted == pytest.approx(1.0)
        assert profile.dimF_curve_predicted == pytest.approx(1.0)
        assert profile.to_dict()["q_max"] == math.inf

    def test_lognormal(self, lognormal):
        profile = predicted_dims(lognormal)
        assert profile.tau_at_2 == pytest.approx(0.82)
        assert profile.dim2_predicted == pytest.approx(0.82)
        assert profile.dimF_flat_predicted == pytest.approx(0.82)
        assert profile.dimF_curve_predicted == pytest.approx(0.49)
        assert profile.subcritical is True

    def test_two_point(self, two_point):
        profile = predicted_dims(two_point)
        assert profile.dim2_predicted == pytest.approx(0.67807, abs=1e-5)
        assert profile.dimF_curve_predicted == pytest.approx(0.41504, abs=1e-5)

    def test_flat_prediction_capped_at_two(self):
        model = make_model(WeightFamily.DETERMINISTIC, (), b=2, d=3)
        assert predicted_dims(model).dimF_flat_predicted == 2.0

    def test_spherical_predictions(self, lognormal):
        spherical = predicted_dims(lognormal).spherical_predicted
        assert list(spherical) == ["1", "2", "4", "inf"]
        assert spherical["1"] == pytest.approx(0.82)
        assert spherical["2"] == pytest.approx(0.82)
        assert spherical["4"] == pytest.approx((1.0 + 1.96) / 4.0)
        assert spherical["inf"] == pytest.approx(0.49)

    def test_spherical_exponent_order(self, lognormal):
        with pytest.raises(InvalidParams):
            spherical_exponent(lognormal, 0.5)


class TestMomentBound:
    """Upper bound on E(Y^(p/q))."""

    def test_ratio_below_two(self, lognormal):
        b = 2.0
        numerator = b ** (-2.0 * tau(lognormal, 1.5) + 1.5 * tau(lognormal, 2.0))
        denominator = 1.0 - b ** (-tau(lognormal, 3.0) + 1.5 * tau(lognormal, 2.0))
        assert y_moment_bound(lognormal, 3.0, 2.0) == pytest.approx(numerator / denominator)
        assert y_moment_bound(lognormal, 3.0, 2.0) > 1.0

    def test_ratio_above_two(self, lognormal):
        """p/q in (2, 4] takes the doubling form with k = 1."""
        base = 1.0 - 2.0 ** (-tau(lognormal, 2.0) + 2.0 * tau(lognormal, 1.0))
        assert y_moment_bound(lognormal, 3.2, 1.0) == pytest.approx(base**-4)

    def test_outside_range(self, lognormal):
        with pytest.raises(InvalidParams):
            y_moment_bound(lognormal, 4.0, 2.0)
        with pytest.raises(InvalidParams):
            y_moment_bound(lognormal, 2.0, 2.0)


class TestTauTable:
    """CSV-ready tau samples."""

    def test_columns(self, lognormal):
        table = tau_table(lognormal, [2.0, 0.5, 4.0])
        assert list(table) == ["q", "tau", "tau_prime", "tau_tilde"]
        assert table["q"].tolist() == [0.5, 2.0, 4.0]
        assert table["tau_tilde"][-1] == pytest.approx(1.96)

    def test_rejects_empty_or_nonpositive(self, lognormal):
        with pytest.raises(InvalidParams):
            tau_table(lognormal, [])
        with pytest.raises(InvalidParams):
            tau_table(lognormal, [0.0, 1.0])

    def test_order_label(self):
        assert order_label(math.inf) == "inf"
        assert order_label(2.0) == "2"
        assert order_label(2.5) == "2.5"
