"""
Tests for planar curves: built-ins, validation, arclength
reparametrization and frames.
"""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from cascade_fourier.curves import (
    RawCurve,
    curve_from_descriptor,
    frame,
    make_circle_arc,
    make_parabola_arc,
    parabola_arclength,
    reparametrize_arclength,
)
from cascade_fourier.errors import CurvatureVanishes, DegenerateSpeed, InvalidParams


@pytest.fixture(scope="module")
def circle():
    return make_circle_arc(2.0 * math.pi)


@pytest.fixture(scope="module")
def parabola():
    return make_parabola_arc()


def raw_parabola() -> RawCurve:
    return RawCurve(
        name="parabola",
        position=lambda u: np.stack([u, u * u], axis=-1),
        derivative=lambda u: np.stack([np.ones_like(u), 2.0 * u], axis=-1),
        second_derivative=lambda u: np.stack([np.zeros_like(u), np.full_like(u, 2.0)], axis=-1),
    )


class TestCircle:
    """Circle arcs of constant curvature."""

    def test_closed(self, circle):
        points = circle.position(np.array([0.0, 1.0]))
        assert np.allclose(points, 0.0, atol=1e-12)

    def test_constant_curvature(self, circle):
        ts = np.linspace(0.0, 1.0, 101)
        assert np.allclose(circle.curvature(ts), 2.0 * math.pi, atol=1e-12)
        assert circle.kappa_max == pytest.approx(2.0 * math.pi)
        assert circle.kappa_min == pytest.approx(0.9 * 2.0 * math.pi)

    def test_unit_curvature_point(self):
        arc = make_circle_arc(1.0)
        assert np.allclose(arc.position(np.array([math.pi / 2.0]))[0], [1.0, 1.0], atol=1e-12)

    def test_unit_speed(self, circle):
        d1 = circle.derivative(np.linspace(0.0, 1.0, 10_000))
        assert np.max(np.abs(np.hypot(d1[:, 0], d1[:, 1]) - 1.0)) <= 1e-10

    @pytest.mark.parametrize("curvature", [0.0, -1.0, math.inf])
    def test_invalid_curvature(self, curvature):
        with pytest.raises(InvalidParams):
            make_circle_arc(curvature)

    def test_descriptor(self, circle):
        assert circle.descriptor() == {"family": "circle", "params": {"curvature": 2.0 * math.pi}}
        rebuilt = curve_from_descriptor(circle.descriptor())
        assert np.allclose(rebuilt.position(np.array([0.3])), circle.position(np.array([0.3])))

    def test_chord_arc(self, circle):
        """|gamma(s) - gamma(t)| <= |s - t| <= (1 + kappa^2 |s - t|^2) |gamma(s) - gamma(t)|."""
        gen = np.random.default_rng(5)
        s = gen.uniform(0.0, 0.9, size=500)
        t = s + gen.uniform(1e-4, 0.1, size=500)
        gap = t - s
        chord = np.linalg.norm(circle.position(s) - circle.position(t), axis=1)
        assert np.all(chord <= gap + 1e-15)
        assert np.all(gap <= (1.0 + circle.kappa_max**2 * gap**2) * chord)


class TestParabola:
    """The unit-length parabola arc."""

    def test_end_parameter(self, parabola):
        end = parabola.params["end"]
        assert end == pytest.approx(0.763, abs=1e-3)
        assert parabola_arclength(end) == pytest.approx(1.0, abs=1e-10)

    def test_end_by_quadrature(self, parabola):
        length, _ = quad(lambda u: math.sqrt(1.0 + 4.0 * u * u), 0.0, parabola.params["end"], epsabs=1e-13)
        assert length == pytest.approx(1.0, abs=1e-9)

    def test_curvature_at_origin(self, parabola):
        assert parabola.curvature(np.array([0.0]))[0] == pytest.approx(2.0, abs=1e-9)

    def test_curvature_profile(self, parabola):
        """kappa(u) = 2 / (1 + 4u^2)^(3/2) along the arc."""
        ts = np.linspace(0.0, 1.0, 11)
        u = parabola.position(ts)[:, 0]
        assert np.allclose(parabola.curvature(ts), 2.0 / (1.0 + 4.0 * u * u) ** 1.5, atol=1e-9)

    def test_descriptor_rebuild(self, parabola):
        rebuilt = curve_from_descriptor({"family": "parabola", "params": {}})
        assert rebuilt.params["end"] == parabola.params["end"]

    def test_unknown_descriptor(self):
        with pytest.raises(InvalidParams):
            curve_from_descriptor({"family": "spiral", "params": {}})


class TestReparametrize:
    """Generic unit-speed reparametrization."""

    def test_parabola_length(self):
        curve = reparametrize_arclength(raw_parabola())
        expected = math.sqrt(5.0) / 2.0 + math.asinh(2.0) / 4.0
        assert curve.length == pytest.approx(expected, abs=1e-9)
        assert curve.length == pytest.approx(1.47894, abs=1e-5)

    def test_parabola_rescaled_to_unit_length(self):
        curve = reparametrize_arclength(raw_parabola())
        total = curve.length
        end = curve.position(np.array([1.0]))[0]
        assert end == pytest.approx([1.0 / total, 1.0 / total], abs=1e-9)
        ts = np.linspace(0.0, 1.0, 1001)
        d1 = curve.derivative(ts)
        assert np.allclose(np.hypot(d1[:, 0], d1[:, 1]), 1.0, atol=1e-10)

    def test_unit_speed_input_unchanged(self, circle):
        raw = RawCurve("circle", circle.position, circle.derivative, circle.second_derivative)
        curve = reparametrize_arclength(raw)
        ts = np.linspace(0.0, 1.0, 257)
        assert curve.length == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(curve.position(ts), circle.position(ts), atol=1e-9)

    def test_straight_line(self):
        line = RawCurve(
            name="line",
            position=lambda u: np.stack([u, np.zeros_like(u)], axis=-1),
            derivative=lambda u: np.stack([np.ones_like(u), np.zeros_like(u)], axis=-1),
            second_derivative=lambda u: np.zeros(np.shape(u) + (2,)),
        )
        with pytest.raises(CurvatureVanishes):
            reparametrize_arclength(line)

    def test_cusp(self):
        """(u^2, u^3) stops at u = 0."""
        cusp = RawCurve(
            name="cusp",
            position=lambda u: np.stack([u * u, u**3], axis=-1),
            derivative=lambda u: np.stack([2.0 * u, 3.0 * u * u], axis=-1),
            second_derivative=lambda u: np.stack([np.full_like(u, 2.0), 6.0 * u], axis=-1),
        )
        with pytest.raises(DegenerateSpeed):
            reparametrize_arclength(cusp)


class TestFrame:
    """Point, tangent, normal and curvature."""

    def test_circle_start(self, circle):
        point, tangent, normal, curvature = frame(circle, 0.0)
        assert np.allclose(point, [0.0, 0.0])
        assert np.allclose(tangent, [1.0, 0.0])
        assert np.allclose(normal, [0.0, 1.0])
        assert curvature == pytest.approx(2.0 * math.pi)

    def test_orthonormal(self, parabola):
        for t in np.random.default_rng(9).uniform(0.0, 1.0, size=1000):
            _, tangent, normal, _ = frame(parabola, float(t))
            assert abs(float(np.dot(tangent, normal))) <= 1e-12
            assert float(np.linalg.norm(tangent)) == pytest.approx(1.0, abs=1e-12)

    def test_parabola_start(self, parabola):
        assert frame(parabola, 0.0)[3] == pytest.approx(2.0, abs=1e-9)

    def test_outside_domain(self, circle):
        with pytest.raises(InvalidParams):
            frame(circle, 1.5)
