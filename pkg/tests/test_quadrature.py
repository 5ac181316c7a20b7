"""Certified log-domain quadrature against closed-form integrals.

Oracles: Gaussian mass sqrt(2 pi) e^{x^2/2} under tilt x, the kinked
Laplace mass 2/(1-x^2), Gamma-type one-sided integrals, and the exact
inverse CDF of a linear density.
"""

import numpy as np
import pytest

from lltprox.quadrature import (CertificateError, DivergentIntegralError,
                                bracket_support, log_integral_1d, panel_nodes,
                                sample_piecewise_linear, tensor_log_integral)


class TestLogIntegral:
    def test_gaussian_mass(self):
        res = log_integral_1d(lambda y: -0.5 * y * y)
        assert abs(res.value - 0.5 * np.log(2 * np.pi)) < 1e-12

    @pytest.mark.parametrize("x", [-0.9, -0.3, 0.0, 0.5])
    def test_tilted_gaussian_mass(self, x):
        res = log_integral_1d(lambda y: x * y - 0.5 * y * y)
        want = 0.5 * np.log(2 * np.pi) + 0.5 * x * x
        assert abs(res.value - want) < 1e-11

    @pytest.mark.parametrize("x", [0.0, 0.4, -0.7])
    def test_kinked_laplace_mass_with_breaks(self, x):
        # int exp(x y - |y|) dy = 2 / (1 - x^2) for |x| < 1
        res = log_integral_1d(lambda y: x * y - np.abs(y), breaks=[0.0])
        want = np.log(2.0) - np.log1p(-x * x)
        assert abs(res.value - want) < 1e-10

    def test_half_line_gamma(self):
        # int_0^inf y^3 e^{-y} dy = 6, forced onto [0, inf) via lo
        res = log_integral_1d(
            lambda y: np.where(y > 0, 3.0 * np.log(np.maximum(y, 1e-300)), -np.inf) - y,
            lo=0.0, x0=3.0)
        assert abs(res.value - np.log(6.0)) < 1e-9

    def test_certificate_is_reported_small(self):
        res = log_integral_1d(lambda y: -0.5 * y * y)
        assert res.certificate <= 1e-9

    def test_divergent_integrand_raises(self):
        with pytest.raises((DivergentIntegralError, CertificateError)):
            log_integral_1d(lambda y: 0.5 * y * y)


class TestBracketSupport:
    def test_gaussian_bracket_reaches_the_drop(self):
        lo, hi, peak = bracket_support(lambda y: -0.5 * y * y, drop=60.0)
        edge = np.sqrt(120.0)
        assert lo <= -edge + 0.5 and hi >= edge - 0.5
        assert abs(peak) < 0.2

    def test_shifted_peak_found(self):
        lo, hi, peak = bracket_support(lambda y: -0.5 * (y - 4.0) ** 2,
                                       x0=0.0, drop=30.0)
        assert abs(peak - 4.0) < 0.2 and lo < 4.0 < hi


class TestPanelNodes:
    def test_polynomial_exactness(self):
        # order-6 Gauss-Legendre integrates degree 11 exactly
        z, w = panel_nodes(0.0, 1.0, 3, 6)
        got = float(np.dot(w, z ** 11))
        assert abs(got - 1.0 / 12.0) < 1e-14

    def test_breaks_are_panel_edges(self):
        z, _ = panel_nodes(-1.0, 1.0, 4, 8, breaks=[0.25])
        # no node may straddle the break inside one Gauss panel; nodes are
        # strictly inside panels so none can equal it either
        assert not np.any(np.isclose(z, 0.25, atol=1e-14))


class TestPiecewiseLinearSampling:
    def test_linear_density_inverse_cdf(self):
        # density f(t) = 2t on [0, 1]: CDF t^2, inverse sqrt(u)
        xs = np.linspace(0.0, 1.0, 2001)
        dens = 2.0 * xs
        u = np.linspace(0.01, 0.99, 37)
        got = sample_piecewise_linear(xs, dens, u)
        np.testing.assert_allclose(got, np.sqrt(u), atol=2e-6)

    def test_uniform_density_is_identity(self):
        xs = np.linspace(-1.0, 3.0, 5)
        dens = np.ones(5)
        u = np.array([0.0, 0.25, 0.5, 1.0])
        got = sample_piecewise_linear(xs, dens, u)
        np.testing.assert_allclose(got, [-1.0, 0.0, 1.0, 3.0], atol=1e-12)


class TestTensorIntegral:
    def test_two_dim_gaussian(self):
        prec = np.array([[2.0, 0.3], [0.3, 1.0]])

        def logf(Y):
            return -0.5 * np.einsum("ni,ij,nj->n", Y, prec, Y)

        got = tensor_log_integral(logf, [-12.0, -12.0], [12.0, 12.0])
        want = np.log(2 * np.pi) - 0.5 * np.log(np.linalg.det(prec))
        assert abs(got - want) < 1e-10
