"""Log-Laplace transform: closed-form oracles, derivative identities,
backend agreement, tilted sampling, and additivity under convolution.

Frozen oracles derived in the comments:
  * unnormalized Gaussian phi = (y-m)^2/(2 s2):
      psi(x) = log sqrt(2 pi s2) + m x + s2 x^2 / 2;
  * Laplace phi = |y|: int e^{x y - |y|} dy = 2/(1-x^2) for |x| < 1, so
      psi(x)   = log 2 - log(1-x^2)
      psi'(x)  = 2x/(1-x^2)
      psi''(x) = 2(1+x^2)/(1-x^2)^2
      psi'''(x)= 4x(3+x^2)/(1-x^2)^3
    at x = 1/2: log(8/3), 4/3, 40/9, 416/27;
  * quartic phi = y^4: psi(0) = log int e^{-y^4} = log(Gamma(1/4)/2).
"""

import numpy as np
import pytest
from scipy.special import gammaln

from lltprox.llt import LltView, TiltedSampler, convolved_llt_check, llt_value
from lltprox.potentials import (AbsPower1D, CallablePotential,
                                GaussianPotential, LqSquaredPotential,
                                make_gaussian)
from lltprox.quadrature import DivergentIntegralError

LOG_8_3 = np.log(8.0 / 3.0)           # psi_laplace(1/2)
PSI1_HALF = 4.0 / 3.0                 # psi'_laplace(1/2)
PSI2_HALF = 40.0 / 9.0                # psi''_laplace(1/2)
PSI3_HALF = 416.0 / 27.0              # psi'''_laplace(1/2)
LOG_QUARTIC_MASS = gammaln(0.25) - np.log(2.0)   # log int e^{-y^4}


class TestGaussianClosedForm:
    def test_value_matches_formula(self):
        pot = GaussianPotential(np.array([0.4]), np.array([[1.3]]), shift=0.0)
        view = LltView(pot)
        for x in (-1.0, 0.0, 2.5):
            want = 0.5 * np.log(2 * np.pi * 1.3) + 0.4 * x + 0.65 * x * x
            assert abs(view.value(x) - want) < 1e-12

    def test_grad_is_tilted_mean_and_hess_is_cov(self):
        pot = make_gaussian([0.4, -0.1], [[1.0, 0.3], [0.3, 2.0]])
        view = LltView(pot)
        x = np.array([0.2, -0.5])
        want_mean = pot.mean + pot.cov @ x
        np.testing.assert_allclose(np.atleast_1d(view.grad(x)), want_mean,
                                   atol=1e-12)
        np.testing.assert_allclose(np.atleast_2d(view.hess(x)), pot.cov,
                                   atol=1e-12)

    def test_third_derivative_vanishes(self):
        view = LltView(make_gaussian([0.0], [[1.0]]),
                       backend="quadrature-1d")
        b = view.bundle_1d(0.7)
        assert abs(b.third) < 1e-7


class TestLaplaceFrozenValues:
    @pytest.fixture(scope="class")
    def view(self):
        return LltView(AbsPower1D(1.0))

    def test_value(self, view):
        assert abs(view.value(0.5) - LOG_8_3) < 1e-9
        assert abs(view.value(0.0) - np.log(2.0)) < 1e-9

    def test_derivative_ladder(self, view):
        b = view.bundle_1d(0.5)
        assert abs(b.grad - PSI1_HALF) < 1e-8
        assert abs(b.hess - PSI2_HALF) < 2e-7
        assert abs(b.third - PSI3_HALF) < 1e-5

    def test_tilt_at_or_past_the_pole_fails(self, view):
        with pytest.raises((DivergentIntegralError, ValueError,
                            ArithmeticError)):
            view.value(1.5)


class TestQuarticTransform:
    def test_value_at_zero_is_quarter_gamma(self):
        pot = CallablePotential(1, lambda Y: Y[:, 0] ** 4)
        assert abs(llt_value(pot, 0.0) - LOG_QUARTIC_MASS) < 1e-9

    def test_grad_at_zero_vanishes_by_symmetry(self):
        pot = CallablePotential(1, lambda Y: Y[:, 0] ** 4)
        g = float(np.squeeze(LltView(pot).grad(0.0)))
        assert abs(g) < 1e-9


class TestBackendAgreement:
    def test_lq_radial_matches_quadrature_in_one_dim(self):
        pot = LqSquaredPotential(1.5, 0.8, 1)
        radial = LltView(pot)
        assert radial.backend == "lq-radial"
        quad = LltView(pot, backend="quadrature-1d")
        for x in (-1.2, 0.0, 0.7):
            assert abs(radial.value(x) - quad.value(x)) < 1e-7

    def test_value_batch_equals_loop(self):
        view = LltView(AbsPower1D(1.0))
        xs = np.array([-0.6, -0.1, 0.3])[:, None]
        batch = view.value_batch(xs)
        loop = np.array([view.value(float(x)) for x in xs.ravel()])
        np.testing.assert_allclose(batch, loop, atol=1e-10)

    def test_self_concordance_on_laplace_grid(self):
        view = LltView(AbsPower1D(1.0), backend="quadrature-1d")
        for x in np.linspace(-0.7, 0.7, 11):
            b = view.bundle_1d(float(x))
            assert 2.0 * b.hess ** 1.5 - abs(b.third) >= -1e-6


class TestTiltedSampler:
    def test_gaussian_tilted_moments(self):
        pot = make_gaussian([0.5], [[2.0]])
        s = TiltedSampler(pot)
        rng = np.random.default_rng(11)
        draws = s.sample(0.3, rng, size=40_000)
        # tilted mean = mean + cov * x, tilted cov unchanged
        assert abs(np.mean(draws) - (0.5 + 2.0 * 0.3)) < 0.03
        assert abs(np.var(draws) - 2.0) < 0.06

    def test_laplace_tilted_mean_is_transform_grad(self):
        s = TiltedSampler(AbsPower1D(1.0))
        rng = np.random.default_rng(3)
        draws = s.sample(0.5, rng, size=60_000)
        # E[Y] under the x=1/2 tilt equals psi'(1/2) = 4/3
        assert abs(np.mean(draws) - PSI1_HALF) < 0.03

    def test_size_none_returns_scalar_in_one_dim(self):
        s = TiltedSampler(AbsPower1D(1.0))
        out = s.sample(0.0, np.random.default_rng(0))
        assert np.isscalar(out)


class TestConvolutionAdditivity:
    def test_gaussian_two_fold(self):
        rep = convolved_llt_check(GaussianPotential(np.zeros(1), np.eye(1)),
                                  2, np.linspace(-2, 2, 7))
        assert rep["max_abs_gap"] < 1e-7

    def test_laplace_three_fold(self):
        rep = convolved_llt_check(AbsPower1D(1.0), 3,
                                  np.linspace(-0.5, 0.5, 7))
        assert rep["max_abs_gap"] < 1e-6
