"""
Tests for Fourier transforms of flat and curve cascade measures, spherical
averages, decay profiles and the van der Corput statistic.
"""
import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import j0

from cascade_fourier.cascade import CascadeRealization, generate, total_mass
from cascade_fourier.curves import make_circle_arc
from cascade_fourier.errors import DimensionMismatch, InvalidFrequency, InvalidParams
from cascade_fourier.fourier import (
    DecaySampleSet,
    cell_corners,
    cell_transform_curve,
    cell_transform_flat,
    decay_profile,
    dyadic_frequency_grid,
    dyadic_radii,
    fit_decay,
    increment_transform,
    normal_directions,
    panel_count,
    spherical_average,
    transform_curve,
    transform_flat,
    transform_flat_many,
    uniform_directions,
    vdc_statistic,
)
from cascade_fourier.weights import WeightFamily, make_model


@pytest.fixture(scope="module")
def lognormal():
    return make_model(WeightFamily.LOGNORMAL, (0.09,))


@pytest.fixture(scope="module")
def deterministic():
    return make_model(WeightFamily.DETERMINISTIC)


@pytest.fixture(scope="module")
def circle():
    return make_circle_arc(2.0 * math.pi)


@pytest.fixture(scope="module")
def random_line(lognormal):
    return generate(lognormal, 6, seed=13, threads=1)


@pytest.fixture(scope="module")
def uniform_circle(deterministic):
    return generate(deterministic, 6, seed=0, threads=1)


def reference_integral(lo: float, h: float, freq: float) -> complex:
    """Integral of exp(-2 pi i x freq) over [lo, lo + h] by adaptive quadrature."""
    omega = 2.0 * math.pi * freq
    re = quad(lambda _x: 1.0, lo, lo + h, weight="cos", wvar=omega, epsabs=1e-14, epsrel=1e-13)[0]
    im = quad(lambda _x: 1.0, lo, lo + h, weight="sin", wvar=omega, epsabs=1e-14, epsrel=1e-13)[0]
    return complex(re, -im)


class TestFlatCells:
    """Closed-form cell transforms."""

    def test_unit_interval_at_zero(self):
        assert cell_transform_flat(2, 1, 0, 0, 0.0) == pytest.approx(1.0)

    def test_full_period(self):
        assert abs(cell_transform_flat(2, 1, 0, 0, 1.0)) <= 1e-12

    def test_half_frequency(self):
        assert abs(cell_transform_flat(2, 1, 0, 0, 0.5)) == pytest.approx(2.0 / math.pi, abs=1e-14)

    def test_against_quadrature(self):
        gen = np.random.default_rng(2)
        for _ in range(100):
            b = int(gen.integers(2, 4))
            d = int(gen.integers(1, 3))
            n = int(gen.integers(0, 5))
            address = int(gen.integers(0, (b**d) ** n))
            xi = gen.uniform(-200.0, 200.0, size=d)
            h = float(b) ** -n
            corner = cell_corners(b, d, n, np.array([address]))[0] * h
            expected = np.prod([reference_integral(lo, h, f) for lo, f in zip(corner, xi)])
            assert abs(cell_transform_flat(b, d, n, address, xi) - expected) <= 1e-10

    def test_corner_digits(self):
        """Slot c of a planar cell holds the x digit c % b and the y digit c // b."""
        assert cell_corners(2, 2, 1).tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]
        assert cell_corners(3, 1, 2, np.array([5])).tolist() == [[5]]

    def test_bad_address(self):
        with pytest.raises(InvalidParams):
            cell_transform_flat(2, 1, 3, 8, 1.0)


class TestFlatTransform:
    """Transforms of flat cascade measures."""

    def test_zero_frequency_is_total_mass(self, random_line):
        assert transform_flat(random_line, 0.0).value == pytest.approx(total_mass(random_line), abs=1e-14)

    def test_lebesgue_at_integers(self, deterministic):
        r = generate(deterministic, 6, seed=0)
        assert transform_flat(r, 7.0).magnitude <= 1e-12

    def test_cellwise_brute_force(self, random_line):
        h = 2.0**-random_line.depth
        expected = sum(
            (mass / h) * cell_transform_flat(2, 1, random_line.depth, i, 3.7)
            for i, mass in enumerate(random_line.masses)
        )
        assert abs(transform_flat(random_line, 3.7).value - expected) <= 1e-10

    def test_conjugate_symmetry(self, random_line):
        for xi in (0.3, 5.5, 41.0):
            forward = transform_flat(random_line, xi).value
            backward = transform_flat(random_line, -xi).value
            assert abs(backward - forward.conjugate()) <= 1e-12

    def test_bounded_by_mass(self, random_line):
        values = transform_flat_many(random_line, np.linspace(-50.0, 50.0, 201)[:, None])
        assert np.all(np.abs(values) <= total_mass(random_line) + 1e-12)

    def test_planar_measure(self):
        model = make_model(WeightFamily.LOGNORMAL, (0.05,), b=2, d=2)
        r = generate(model, 3, seed=1)
        assert transform_flat(r, (0.0, 0.0)).value == pytest.approx(total_mass(r), abs=1e-14)
        with pytest.raises(DimensionMismatch):
            transform_flat(r, (1.0, 2.0, 3.0))

    def test_thread_count_invariance(self, lognormal):
        r = generate(lognormal, 10, seed=3, threads=1)
        xis = np.linspace(1.0, 400.0, 64)[:, None]
        serial = transform_flat_many(r, xis, threads=1)
        parallel = transform_flat_many(r, xis, threads=4)
        np.testing.assert_allclose(parallel, serial, rtol=0, atol=1e-15)

    def test_lipschitz(self, random_line):
        """|nu^(xi) - nu^(xi')| <= 2 pi diam mass |xi - xi'| on [0, 1]."""
        a = transform_flat(random_line, 10.0).value
        b = transform_flat(random_line, 10.001).value
        assert abs(a - b) <= 2.0 * math.pi * total_mass(random_line) * 0.001


class TestCurveTransform:
    """Panel quadrature on curves."""

    def test_zero_frequency_length(self, circle):
        assert cell_transform_curve(circle, (0.25, 0.75), (0.0, 0.0)) == 0.5

    def test_bessel_identity(self, circle):
        for x in (0.5, 10.0, 77.3):
            assert cell_transform_curve(circle, (0.0, 1.0), (x, 0.0)) == pytest.approx(j0(x), abs=1e-9)

    def test_panel_doubling_stable(self, circle):
        """A tighter tolerance moves the result by at most the looser one."""
        loose = cell_transform_curve(circle, (0.1, 0.35), (40.0, -25.0), tol=1e-8)
        tight = cell_transform_curve(circle, (0.1, 0.35), (40.0, -25.0), tol=1e-12)
        assert abs(loose - tight) <= 1e-8 * 0.25

    def test_interval_checked(self, circle):
        with pytest.raises(InvalidParams):
            cell_transform_curve(circle, (0.5, 1.5), (1.0, 0.0))
        with pytest.raises(InvalidParams):
            cell_transform_curve(circle, (0.0, 1.0), (1.0, 0.0), tol=1e-13)

    def test_uniform_circle_is_bessel(self, uniform_circle, circle):
        for x in (0.5, 12.0, 99.0, 200.0):
            value = transform_curve(uniform_circle, circle, (x, 0.0)).value
            assert abs(value - j0(x)) <= 1e-6

    def test_zero_frequency(self, lognormal, circle):
        r = generate(lognormal, 6, seed=4)
        assert transform_curve(r, circle, (0.0, 0.0)).value == pytest.approx(total_mass(r), rel=1e-13)

    def test_conjugate_symmetry(self, lognormal, circle):
        r = generate(lognormal, 6, seed=4)
        forward = transform_curve(r, circle, (13.0, 4.0)).value
        backward = transform_curve(r, circle, (-13.0, -4.0)).value
        assert abs(backward - forward.conjugate()) <= 1e-12
        assert abs(forward) <= total_mass(r) + 1e-12

    def test_matches_cellwise_integrals(self, lognormal, circle):
        """Low frequencies against one cell_transform_curve per cell."""
        r = generate(lognormal, 4, seed=6)
        h = 2.0**-4
        xi = (0.6, -0.8)
        expected = sum(
            (mass / h) * cell_transform_curve(circle, (i * h, (i + 1) * h), xi) for i, mass in enumerate(r.masses)
        )
        assert abs(transform_curve(r, circle, xi).value - expected) <= 1e-10

    def test_needs_line_cascade(self, circle):
        model = make_model(WeightFamily.DETERMINISTIC, (), b=2, d=2)
        with pytest.raises(DimensionMismatch):
            transform_curve(generate(model, 2, seed=0), circle, (1.0, 0.0))

    def test_panel_count(self):
        assert panel_count(0.0, 0.5) == 1
        assert panel_count(100.0, 2.0**-4) == 25


class TestSphericalAverage:
    """L^p means over directions."""

    def test_rotation_invariant_circle(self, uniform_circle, circle):
        expected = abs(j0(10.0))
        for p in (1.0, 2.0, math.inf):
            assert spherical_average(uniform_circle, circle, 10.0, p, n_theta=32) == pytest.approx(expected, abs=1e-6)

    def test_small_radius(self, lognormal, circle):
        r = generate(lognormal, 6, seed=8)
        for p in (1.0, 4.0, math.inf):
            assert spherical_average(r, circle, 1e-9, p, n_theta=16) == pytest.approx(total_mass(r), rel=1e-6)

    def test_power_mean_order(self, lognormal, circle):
        r = generate(lognormal, 7, seed=8)
        values = [spherical_average(r, circle, 20.0, p, n_theta=64) for p in (1.0, 2.0, 4.0, math.inf)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_flat_line_two_point_sphere(self, random_line):
        value = spherical_average(random_line, None, 5.0, 2.0, n_theta=16)
        assert value == pytest.approx(transform_flat(random_line, 5.0).magnitude, rel=1e-12)

    def test_arguments_checked(self, random_line):
        with pytest.raises(InvalidParams):
            spherical_average(random_line, None, 0.0, 2.0)
        with pytest.raises(InvalidParams):
            spherical_average(random_line, None, 1.0, 0.5)
        with pytest.raises(InvalidParams):
            uniform_directions(8)


class TestDecayProfile:
    """Per-radius sup and L^p columns."""

    def test_shallow_depth_noted_without_warnings(self):
        """Radii past the depth's resolution are logged inside the profile action."""
        r = generate(make_model(WeightFamily.DETERMINISTIC), 4, seed=0, threads=1)
        with warnings.catch_warnings():
            warnings.simplefilter("error", DeprecationWarning)
            profile = decay_profile(r, None, 2, 5, n_theta=16, threads=1)
        assert profile.radii.size == 4

    def test_synthetic_power_law(self):
        """A profile with |eta^(r)| = r^(-1/4) fits exponent 1/4 exactly."""
        radii = 2.0 ** np.arange(4, 12)
        profile = DecaySampleSet(radii=radii, directions=16, sup=radii**-0.25, averages={})
        fit = fit_decay(profile)
        assert fit.slope == pytest.approx(-0.25, abs=1e-12)
        assert fit.fourier_dim_estimate == pytest.approx(0.5, abs=1e-12)

    def test_columns_and_ordering(self, lognormal, circle):
        r = generate(lognormal, 8, seed=1)
        profile = decay_profile(r, circle, 3, 6, n_theta=16, n_shell=2, enrich_normals=False)
        frame = profile.to_frame()
        assert frame.columns == ["r", "sup", "sigma_1", "sigma_2", "sigma_4", "n_theta"]
        assert frame["r"].to_list() == [8.0, 16.0, 32.0, 64.0]
        assert np.all(profile.sup >= profile.averages["4"] - 1e-15)
        assert np.all(profile.averages["4"] >= profile.averages["2"] - 1e-15)
        assert np.all(profile.averages["2"] >= profile.averages["1"] - 1e-15)
        assert profile.metadata["curve"]["family"] == "circle"
        assert profile.metadata["n_shell"] == 2

    def test_normals_never_lower_sup(self, lognormal, circle):
        r = generate(lognormal, 8, seed=2)
        plain = decay_profile(r, circle, 3, 6, n_theta=16, n_shell=2, enrich_normals=False)
        enriched = decay_profile(r, circle, 3, 6, n_theta=16, n_shell=2, enrich_normals=True)
        assert np.all(enriched.sup >= plain.sup)
        np.testing.assert_array_equal(enriched.averages["2"], plain.averages["2"])

    def test_flat_line_columns_equal_sup(self, random_line):
        profile = decay_profile(random_line, None, 2, 5, n_theta=16)
        for values in profile.averages.values():
            np.testing.assert_array_equal(values, profile.sup)
        assert profile.metadata["n_shell"] == 16

    def test_threads_do_not_change_result(self, lognormal, circle):
        r = generate(lognormal, 8, seed=5)
        one = decay_profile(r, circle, 3, 5, n_theta=16, n_shell=2, threads=1)
        many = decay_profile(r, circle, 3, 5, n_theta=16, n_shell=2, threads=3)
        np.testing.assert_array_equal(one.sup, many.sup)

    @pytest.mark.slow
    def test_uniform_circle_decays_like_bessel(self, deterministic, circle):
        """Sup magnitude ~ r^(-1/2): Fourier-dimension estimate near 1."""
        r = generate(deterministic, 8, seed=0)
        profile = decay_profile(r, circle, 4, 9, n_theta=16, n_shell=16, enrich_normals=False)
        assert fit_decay(profile).fourier_dim_estimate == pytest.approx(1.0, abs=0.1)

    def test_normal_directions_unit(self, circle):
        normals = normal_directions(circle, 2, level=4)
        assert normals.shape == (17, 2)
        assert np.allclose(np.hypot(normals[:, 0], normals[:, 1]), 1.0)
        assert np.allclose(normals[0], [0.0, 1.0])


class TestIncrements:
    """mu_{n+1}^ - mu_n^."""

    def test_deterministic_flat_zero(self, deterministic):
        r = generate(deterministic, 5, seed=0)
        assert abs(increment_transform(r, None, 3.3)) <= 1e-12

    def test_deterministic_curve_small(self, deterministic, circle):
        r = generate(deterministic, 5, seed=0)
        assert abs(increment_transform(r, circle, (6.0, 2.0))) <= 1e-8

    def test_random_increment_nonzero(self, lognormal):
        r = generate(lognormal, 5, seed=0)
        assert abs(increment_transform(r, None, 20.0)) > 0.0


class TestVanDerCorput:
    """Arc-integral decay statistic."""

    def test_circle_bounded(self, circle):
        assert vdc_statistic(circle, dyadic_frequency_grid(6, per_octave=2)) <= 3.0

    def test_low_frequency_rejected(self, circle):
        with pytest.raises(InvalidFrequency):
            vdc_statistic(circle, [(0.5, 0.0)])

    def test_grid_shape(self):
        grid = dyadic_frequency_grid(3, per_octave=2, n_angles=4)
        assert grid.shape == (28, 2)
        norms = np.hypot(grid[:, 0], grid[:, 1])
        assert norms.min() == pytest.approx(1.0)
        assert norms.max() == pytest.approx(8.0)

    def test_dyadic_radii(self):
        assert dyadic_radii(2, 4, 6).tolist() == [16.0, 32.0, 64.0]
        with pytest.raises(InvalidParams):
            dyadic_radii(2, 6, 6)


def test_realization_must_match_shape(lognormal):
    with pytest.raises(InvalidParams):
        CascadeRealization(model=lognormal, depth=2, seed=0, masses=np.ones(3))
