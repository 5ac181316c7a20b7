"""One-sided stable mixing densities.

The s = 1/2 case has the closed form g(t) = t^{-3/2} e^{-1/(4t)} / (2 sqrt(pi))
(the density whose Laplace transform is e^{-sqrt(lam)}); other indices are
checked through the defining transform identity
int_0^inf e^{-lam t} g_s(t) dt = e^{-lam^s} by direct quadrature.
"""

import numpy as np
import pytest
from scipy.integrate import quad

from lltprox.stable import one_sided_stable_logpdf, scaled_mixture_logpdf


def _levy_logpdf(t):
    t = np.asarray(t, dtype=float)
    return -1.5 * np.log(t) - 0.25 / t - np.log(2.0 * np.sqrt(np.pi))


class TestHalfIndexClosedForm:
    @pytest.mark.parametrize("t", [0.05, 0.2, 1.0, 5.0, 50.0])
    def test_matches_levy_density(self, t):
        got = float(one_sided_stable_logpdf(0.5, t)[0])
        assert abs(got - float(_levy_logpdf(t))) < 1e-8

    def test_vectorized_call(self):
        ts = np.array([0.1, 1.0, 10.0])
        np.testing.assert_allclose(one_sided_stable_logpdf(0.5, ts),
                                   _levy_logpdf(ts), atol=1e-8)


class TestTransformIdentity:
    @pytest.mark.parametrize("s,lam", [(0.7, 0.5), (0.7, 2.0), (0.6, 1.0),
                                       (0.75, 1.5)])
    def test_laplace_transform_recovers_stretched_exponential(self, s, lam):
        def f(t):
            return np.exp(-lam * t + float(one_sided_stable_logpdf(s, t)[0]))

        val, _ = quad(f, 0.0, np.inf, limit=400)
        assert abs(val - np.exp(-lam ** s)) < 1e-6

    def test_scaled_mixture_carries_the_weight(self):
        # exp(-a lam^s) = int exp(-lam t) g_{s,a}(t) dt
        s, a, lam = 0.7, 2.5, 1.2

        def f(t):
            return np.exp(-lam * t + float(scaled_mixture_logpdf(s, a, t)[0]))

        val, _ = quad(f, 0.0, np.inf, limit=400)
        assert abs(val - np.exp(-a * lam ** s)) < 1e-6

    def test_density_integrates_to_one(self):
        def f(t):
            return np.exp(float(one_sided_stable_logpdf(0.65, t)[0]))

        val, _ = quad(f, 0.0, np.inf, limit=400)
        assert abs(val - 1.0) < 1e-6
