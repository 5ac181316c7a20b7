"""Potential variants: closed-form values, derivative consistency,
normalization certificates, and JSON round-trips.

Expected values are derived in comments next to where they are frozen;
derivative checks use central differences as the independent oracle.
"""

import numpy as np
import pytest

from lltprox.potentials import (AbsPower1D, BoxDomain, CallablePotential,
                                GaussianPotential, LipschitzMixturePotential,
                                LpBallDomain, LqSquaredPotential,
                                SeparablePotential, SumPotential, Tabulated1D,
                                eval_bundle, log_mass, make_gaussian,
                                normalize, potential_from_json)


def _val(pot, y) -> float:
    return float(np.squeeze(pot.value(y)))


def _fd_grad(pot, y, h=1e-6):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    g = np.empty(y.size)
    for i in range(y.size):
        e = np.zeros(y.size)
        e[i] = h
        g[i] = (_val(pot, y + e) - _val(pot, y - e)) / (2 * h)
    return g


class TestGaussian:
    def test_value_is_quadratic_form(self):
        # phi(y) = (y-m)' S^-1 (y-m) / 2 with m = (1, -1), S = diag(2, 1/2);
        # shift=0 strips the default normalizer
        pot = GaussianPotential(np.array([1.0, -1.0]),
                                np.diag([2.0, 0.5]), shift=0.0)
        y = np.array([2.0, 1.0])
        want = 0.5 * (1.0 / 2.0 + 4.0 / 0.5)
        assert abs(_val(pot, y) - want) < 1e-12

    def test_default_shift_normalizes(self):
        pot = GaussianPotential(np.array([1.0, -1.0]), np.diag([2.0, 0.5]))
        assert abs(pot.shift - pot.canonical_shift()) < 1e-15

    def test_grad_hess_match_finite_differences(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((3, 3))
        pot = GaussianPotential(rng.standard_normal(3), A @ A.T + 3 * np.eye(3))
        y = rng.standard_normal(3)
        np.testing.assert_allclose(np.atleast_1d(pot.grad(y)), _fd_grad(pot, y),
                                   atol=1e-6)
        # hessian of a quadratic is constant
        H1 = np.atleast_2d(pot.hess(y))
        H2 = np.atleast_2d(pot.hess(np.zeros(3)))
        np.testing.assert_allclose(H1, H2, atol=1e-12)

    def test_make_gaussian_is_normalized(self):
        pot = make_gaussian([0.3], [[1.7]])
        mass, cert, _ = log_mass(pot)
        assert abs(mass) < 1e-12 and cert == 0.0


class TestAbsPower:
    def test_laplace_values_and_kink(self):
        pot = AbsPower1D(1.0)
        assert _val(pot, -2.0) == 2.0
        assert _val(pot, 1.5) == 1.5
        assert 0.0 in pot.kinks_1d()

    def test_normalizing_mass_is_two(self):
        # int exp(-|y|) dy = 2
        mass, cert, _ = log_mass(AbsPower1D(1.0))
        assert abs(mass - np.log(2.0)) < 1e-10

    def test_cubic_power_grad(self):
        pot = AbsPower1D(3.0)
        np.testing.assert_allclose(np.atleast_1d(pot.grad(4.0)),
                                   _fd_grad(pot, 4.0), rtol=1e-6)

    def test_fractional_power_below_two_rejected(self):
        with pytest.raises(ValueError):
            AbsPower1D(1.5)


class TestTabulated:
    def test_hits_knots_exactly(self):
        xs = np.linspace(-1.0, 1.0, 9)
        pot = Tabulated1D(xs, xs ** 2)
        for x in xs:
            assert abs(_val(pot, x) - x * x) < 1e-12

    def test_domain_box_matches_knot_range(self):
        pot = Tabulated1D(np.linspace(-0.5, 0.8, 5), np.zeros(5))
        lo, hi = pot.domain.bounding_box()
        assert float(lo[0]) == -0.5 and float(hi[0]) == 0.8


class TestLqSquared:
    def test_value_is_scaled_squared_lq_norm(self):
        # q is conjugate to p: p=1.5 -> q=3, so a * (|y_1|^3 + |y_2|^3)^(2/3)
        # at y=(1, -2), a=0.3
        pot = LqSquaredPotential(1.5, 0.3, 2)
        y = np.array([1.0, -2.0])
        want = 0.3 * (1.0 + 8.0) ** (2.0 / 3.0)
        assert abs(_val(pot, y) - want) < 1e-12

    def test_smoothness_constant(self):
        pot = LqSquaredPotential(1.25, 0.7, 4)
        assert abs(pot.smoothness_constant() - 2 * 0.7 / 0.25) < 1e-12

    def test_grad_matches_fd_away_from_axes(self):
        pot = LqSquaredPotential(1.5, 1.0, 3)
        y = np.array([0.7, -1.2, 0.4])
        np.testing.assert_allclose(np.atleast_1d(pot.grad(y)),
                                   _fd_grad(pot, y), rtol=1e-5, atol=1e-7)


class TestCompositePotentials:
    def test_separable_sums_components(self):
        pot = SeparablePotential([AbsPower1D(1.0), AbsPower1D(2.0)])
        y = np.array([2.0, 3.0])
        assert abs(_val(pot, y) - (2.0 + 9.0)) < 1e-12

    def test_sum_weights(self):
        g = make_gaussian([0.0], [[1.0]])
        pot = SumPotential([g, AbsPower1D(1.0)], weights=[2.0, 0.5])
        y = np.array([1.2])
        want = 2.0 * _val(g, y) + 0.5 * 1.2
        assert abs(_val(pot, y) - want) < 1e-12

    def test_mixture_averages_losses(self):
        loss = np.array([[1.0, 0.0], [0.0, -1.0]])
        pot = LipschitzMixturePotential(2, loss_grads=loss, p_norm=2.0)
        y = np.array([0.5, 2.0])
        assert abs(_val(pot, y) - 0.5 * (0.5 - 2.0)) < 1e-12
        assert abs(pot.component_value(1, y) - (-2.0)) < 1e-12

    def test_mixture_lipschitz_bound_is_max_dual_norm(self):
        loss = np.array([[3.0, 4.0], [1.0, 0.0]])
        pot = LipschitzMixturePotential(2, loss_grads=loss, p_norm=2.0)
        assert abs(pot.lipschitz_bound() - 5.0) < 1e-12

    def test_callable_potential_fd(self):
        pot = CallablePotential(1, lambda Y: Y[:, 0] ** 4,
                                grad_fn=lambda Y: 4.0 * Y[:, 0:1] ** 3,
                                hess_fn=lambda Y: 12.0 * Y[:, 0:1, None] ** 2)
        np.testing.assert_allclose(np.atleast_1d(pot.grad(0.8)),
                                   _fd_grad(pot, 0.8), rtol=1e-5)


class TestNormalization:
    def test_normalize_is_idempotent_up_to_certificate(self):
        pot, cert = normalize(AbsPower1D(3.0))
        mass2, cert2, _ = log_mass(pot)
        assert abs(mass2) <= 10 * max(cert.quad_certificate, 1e-12)

    def test_eval_bundle_collects_all_three(self):
        pot = make_gaussian([0.0, 0.0], np.eye(2))
        b = eval_bundle(pot, np.array([1.0, 2.0]))
        assert np.atleast_2d(b.hess).shape == (2, 2)
        np.testing.assert_allclose(np.atleast_1d(b.grad), [1.0, 2.0],
                                   atol=1e-12)


class TestDomains:
    def test_box_bounding(self):
        dom = BoxDomain(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
        lo, hi = dom.bounding_box()
        np.testing.assert_allclose(lo, [-1.0, 0.0])
        np.testing.assert_allclose(hi, [1.0, 2.0])

    def test_lp_ball_bounding_box_covers_ball(self):
        dom = LpBallDomain(1.5, 2.0, 3)
        lo, hi = dom.bounding_box()
        assert np.all(hi >= 2.0 - 1e-12) and np.all(lo <= -2.0 + 1e-12)


class TestSerialization:
    @pytest.mark.parametrize("pot", [
        make_gaussian([0.1, -0.2], [[1.0, 0.2], [0.2, 2.0]]),
        AbsPower1D(1.0),
        Tabulated1D(np.linspace(-1, 1, 7), np.linspace(-1, 1, 7) ** 2),
        LqSquaredPotential(1.5, 0.4, 3),
        SeparablePotential([AbsPower1D(1.0), AbsPower1D(2.0)]),
    ])
    def test_round_trip_preserves_values(self, pot):
        clone = potential_from_json(pot.to_json())
        rng = np.random.default_rng(7)
        if pot.dim == 1:
            ys = rng.uniform(-0.9, 0.9, 5)[:, None]
        else:
            ys = rng.uniform(-0.9, 0.9, (5, pot.dim))
        for y in ys:
            assert abs(_val(pot, y) - _val(clone, y)) < 1e-12

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            potential_from_json({"kind": "nope", "dim": 1, "params": {},
                                 "shift": 0.0})
