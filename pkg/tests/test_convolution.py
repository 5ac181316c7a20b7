"""Self-convolution tables against closed-form convolutions.

Oracles:
  * N(0,1) * N(0,1) = N(0,2);
  * Laplace(1) with density e^{-|y|}/2: the two-fold convolution is
    e^{-|y|}(1+|y|)/4 and the three-fold is e^{-|y|}(3+3|y|+y^2)/16
    (iterated integration of piecewise exponentials);
  * mass and symmetry invariants.
"""

import numpy as np
import pytest

from lltprox.convolution import LogDensityTable, SelfConvolution, graded_grid
from lltprox.quadrature import log_integral_1d


def _laplace2_logpdf(y):
    a = np.abs(y)
    return -a + np.log1p(a) - np.log(4.0)


def _laplace3_logpdf(y):
    a = np.abs(y)
    return -a + np.log(3.0 + 3.0 * a + a * a) - np.log(16.0)


class TestGradedGrid:
    def test_sorted_and_bounded(self):
        g = graded_grid(-2.0, 5.0, 101, [0.0, 1.0])
        assert np.all(np.diff(g) > 0)
        assert g[0] == -2.0 and g[-1] == 5.0

    def test_clusters_near_kinks(self):
        g = graded_grid(-1.0, 1.0, 51, [0.0])
        near = np.abs(g) < 1e-3
        assert near.sum() >= 3


class TestLogDensityTable:
    def test_outside_support_is_minus_inf(self):
        tab = LogDensityTable(-1.0, 1.0, fn=lambda y: -y * y)
        out = tab.logpdf(np.array([-2.0, 0.0, 3.0]))
        assert out[0] == -np.inf and out[2] == -np.inf
        assert abs(out[1]) < 1e-12


class TestGaussianConvolution:
    def test_two_fold_is_variance_two(self):
        conv = SelfConvolution(
            lambda y: -0.5 * y * y - 0.5 * np.log(2 * np.pi), (-11.0, 11.0))
        tab = conv.level(2)
        ys = np.linspace(-4.0, 4.0, 17)
        want = -0.25 * ys * ys - 0.5 * np.log(4 * np.pi)
        np.testing.assert_allclose(tab.logpdf(ys), want, atol=1e-8)


@pytest.fixture(scope="module")
def conv():
    return SelfConvolution(lambda y: -np.abs(y) - np.log(2.0),
                           (-45.0, 45.0), kinks=(0.0,))


class TestLaplaceConvolution:

    def test_two_fold_closed_form(self, conv):
        ys = np.linspace(-8.0, 8.0, 33)
        np.testing.assert_allclose(conv.level(2).logpdf(ys),
                                   _laplace2_logpdf(ys), atol=1e-7)

    def test_three_fold_closed_form(self, conv):
        ys = np.linspace(-6.0, 6.0, 25)
        np.testing.assert_allclose(conv.level(3).logpdf(ys),
                                   _laplace3_logpdf(ys), atol=1e-7)

    def test_kink_survives_at_origin(self, conv):
        assert any(abs(k) < 1e-12 for k in conv.level(2).kinks)

    def test_mass_stays_one(self, conv):
        tab = conv.level(3)
        res = log_integral_1d(tab.logpdf, breaks=tab.kinks,
                              lo=tab.lo, hi=tab.hi, cert_tol=1e-7)
        assert abs(res.value) < 1e-7

    def test_symmetry(self, conv):
        tab = conv.level(2)
        ys = np.linspace(0.5, 5.0, 7)
        np.testing.assert_allclose(tab.logpdf(ys), tab.logpdf(-ys),
                                   atol=1e-9)


class TestWideBracketAccuracy:
    def test_wide_window_panels_resolve_the_peak(self):
        # tables built on very wide brackets used to lose the unit-width
        # integrand peak inside the per-node quadrature windows; the panel
        # count now scales with the window
        conv = SelfConvolution(lambda y: -np.abs(y) - np.log(2.0),
                               (-120.0, 120.0), kinks=(0.0,),
                               n_uniform=4001)
        ys = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
        np.testing.assert_allclose(conv.level(2).logpdf(ys),
                                   _laplace2_logpdf(ys), atol=1e-6)
