"""Desk-scale verification harness.

Each criterion below reproduces one numerically checkable analytic statement
about the toolkit — mixing rates, operator identities, transform calculus,
the discrete-chain spectra, the counterexample block, and the private-ERM
planner — at pinned tolerances, and reports a single pass/fail line.  The
full-scale query-complexity statements are out of desk reach and are replaced
by the per-step value-oracle accounting that the chain driver emits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import diagnostics, dp, gibbs
from .convolution import SelfConvolution
from .diagnostics import GaussianLaw, dual_pi_constants, two_sample_test
from .llt import LltView, convolved_llt_check
from .localization import (RenormFamily, direct_final_batch,
                           localize_final_batch, marginal_martingale_check)
from .potentials import (AbsPower1D, CallablePotential, GaussianPotential,
                         Tabulated1D, make_gaussian)
from .prox import ProxConfig, ProxKernel, run_chain


@dataclass
class CriterionResult:
    name: str
    passed: bool
    detail: str
    elapsed: float
    budget: float
    margin: float = float("nan")

    @property
    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: {self.detail} "
                f"[{self.elapsed:.2f}s / <{self.budget:.0f}s]")

    def report(self) -> dict:
        """JSON-ready row: distance inside the tolerance plus the witness
        summary."""
        return {"name": self.name,
                "status": "pass" if self.passed else "fail",
                "margin": None if math.isnan(self.margin) else self.margin,
                "witnesses": self.detail,
                "seconds": round(self.elapsed, 3)}


_ALPHAS = (0.25, 1.0, 4.0)
_TAUS = (1, 2, 8)


def _gaussian_pair(alpha: float):
    """1-D pair with relative-convexity modulus exactly alpha."""
    target = make_gaussian([0.0], [[1.0 / alpha]])
    increment = make_gaussian([0.0], [[1.0]])
    return target, increment


# -- 1. chi-square mixing ---------------------------------------------------

def _stable_divergence_series(alpha: float, tau: int, fn):
    """Per-iteration divergences of the exact Gaussian chain laws, evaluated
    through the cancellation-free mean-offset/variance-gap form (the raw
    closed form has no relative precision left once the divergence falls
    below ~1e-14, and these criteria push well past that)."""
    target, increment = _gaussian_pair(alpha)
    cfg = ProxConfig(target=target, increment=increment, tau=tau,
                     steps=20, init_mean=[2.0], init_cov=[[0.5 / alpha]])
    stats = run_chain(cfg, np.random.default_rng(0))
    v = target.cov[0, 0]
    deltas = stats.means[:, 0] - target.mean[0]
    gaps = 1.0 - stats.covs[:, 0, 0] / v
    return np.array([fn(d, e, v) for d, e in zip(deltas, gaps)])


def chi2_mixing() -> Tuple[bool, str]:
    worst = -np.inf
    for alpha in _ALPHAS:
        for tau in _TAUS:
            series = _stable_divergence_series(
                alpha, tau, diagnostics.chi2_gaussian_1d)
            bound = 1.0 / (1.0 + alpha / tau) ** 2
            ratios = series[1:] / series[:-1]
            worst = max(worst, float(np.max(ratios - bound)))
    return (worst <= 1e-12, f"max ratio excess {worst:.3e} over k = 1..20, "
                            f"9 configs (tol 1e-12)", 1e-12 - worst)


# -- 2. dual Poincare constant ---------------------------------------------

def dual_poincare() -> Tuple[bool, str]:
    worst = 0.0
    for alpha in _ALPHAS:
        for tau in _TAUS:
            out = dual_pi_constants(np.array([[1.0 / alpha]]),
                                    np.array([[1.0]]), tau)
            predicted = alpha / (tau * (alpha + tau))
            worst = max(worst, abs(out["marginal"] - predicted))
    return (worst <= 1e-10, f"max |computed - alpha/(tau(alpha+tau))| = "
                            f"{worst:.3e} (tol 1e-10)", 1e-10 - worst)


# -- 3. mean-measure invariance --------------------------------------------

def martingale_mean_measure() -> Tuple[bool, str]:
    devs = []
    fam_g = RenormFamily(make_gaussian([0.1], [[0.8]]),
                         make_gaussian([0.0], [[1.0]]))
    devs.append(marginal_martingale_check(
        fam_g, (1, 2, 3), np.linspace(-2.0, 2.0, 9))["max_abs_dev"])
    knots = np.linspace(-0.85, 0.85, 9)
    compact = Tabulated1D(knots, knots ** 2)
    fam_l = RenormFamily(compact, AbsPower1D(1.0))
    devs.append(marginal_martingale_check(
        fam_l, (1, 2, 3), np.linspace(-0.6, 0.6, 9))["max_abs_dev"])
    worst = float(max(devs))
    return (worst <= 1e-6, f"max |E[pi_tau] - pi| dev {worst:.3e} over "
                           f"gaussian/heavy-noise models (tol 1e-6)",
            1e-6 - worst)


# -- 4. one-shot vs sequential signal law ----------------------------------

def markov_equivalence() -> Tuple[bool, str]:
    fam = RenormFamily(make_gaussian([0.3], [[1.4]]),
                       make_gaussian([0.0], [[1.0]]))
    n = 10_000
    seq = localize_final_batch(fam, 4, np.random.default_rng(41), n).ravel()
    direct = direct_final_batch(fam, 4, np.random.default_rng(42), n).ravel()
    p = two_sample_test(seq, direct, seed=7)
    return (p > 0.01, f"energy-distance permutation p = {p:.3f} "
                      f"(need > 0.01)", p - 0.01)


# -- 5. discrete chain identities ------------------------------------------

def discrete_operator_identities() -> Tuple[bool, str]:
    rng = np.random.default_rng(20)
    worst = {"balance": 0.0, "sup_eq": 0.0, "sup_lam": 0.0, "var": -np.inf}
    for _ in range(50):
        nr = int(rng.integers(2, 21))
        nc = int(rng.integers(2, 16))
        joint = gibbs.random_joint(rng, nr, nc)
        rep = gibbs.analyze(joint)
        worst["balance"] = max(worst["balance"], rep["checks"]["reversibility"])
        worst["sup_eq"] = max(worst["sup_eq"], rep["checks"]["sup_equality"])
        worst["sup_lam"] = max(worst["sup_lam"],
                               rep["checks"]["sup_vs_lambda2"])
        lam2 = rep["lambda2"]
        for _ in range(20):
            f = rng.standard_normal(nr)
            ratio = gibbs.variance_ratio(joint, f)
            worst["var"] = max(worst["var"], ratio - lam2 ** 2)
    ok = (worst["balance"] <= 1e-12 and worst["sup_eq"] <= 1e-10
          and worst["sup_lam"] <= 1e-10 and worst["var"] <= 1e-9)
    margin = min(1e-12 - worst["balance"], 1e-10 - worst["sup_eq"],
                 1e-10 - worst["sup_lam"], 1e-9 - worst["var"])
    return ok, (f"balance {worst['balance']:.1e} (1e-12), sup gap "
                f"{worst['sup_eq']:.1e}/{worst['sup_lam']:.1e} (1e-10), "
                f"var excess {worst['var']:.1e} (1e-9); 50 joints, "
                f"1000 f"), margin


# -- 6. transform additivity under self-convolution ------------------------

def _quartic_potential() -> CallablePotential:
    return CallablePotential(
        1, lambda Y: Y[:, 0] ** 4,
        grad_fn=lambda Y: 4.0 * Y[:, 0:1] ** 3,
        hess_fn=lambda Y: 12.0 * Y[:, 0:1, None] ** 2)


def convolution_identity() -> Tuple[bool, str]:
    cases = [
        (GaussianPotential(np.zeros(1), np.eye(1)), np.linspace(-3, 3, 11)),
        (AbsPower1D(1.0), np.linspace(-0.6, 0.6, 11)),
        (_quartic_potential(), np.linspace(-2, 2, 11)),
    ]
    worst = 0.0
    for phi, xs in cases:
        worst = max(worst, convolved_llt_check(phi, 2, xs)["max_abs_gap"])
    return (worst <= 1e-6, f"max |two-fold transform - 2 psi| = {worst:.3e} "
                           f"at 11 probes x 3 potentials (tol 1e-6)",
            1e-6 - worst)


# -- 7. derivatives and self-concordance -----------------------------------

def llt_derivative_suite() -> Tuple[bool, str]:
    cases = [
        (GaussianPotential(np.array([0.2]), np.array([[0.7]])),
         np.linspace(-2, 2, 7)),
        (AbsPower1D(1.0), np.linspace(-0.7, 0.7, 7)),
        (_quartic_potential(), np.linspace(-1.5, 1.5, 7)),
    ]
    fd_worst = 0.0
    for phi, xs in cases:
        view = LltView(phi)
        h = 1e-4
        for x in xs:
            b = view.bundle_1d(float(x))
            gfd = (view.value(x + h) - view.value(x - h)) / (2 * h)
            hfd = (view.value(x + h) - 2 * view.value(x)
                   + view.value(x - h)) / h ** 2
            scale_g = max(1.0, abs(b.grad))
            scale_h = max(1.0, abs(b.hess))
            fd_worst = max(fd_worst, abs(gfd - b.grad) / scale_g,
                           abs(hfd - b.hess) / scale_h)
    sc_worst = np.inf
    for phi, xs in cases:
        view = LltView(phi, backend="quadrature-1d")
        for x in np.linspace(xs[0], xs[-1], 21):
            b = view.bundle_1d(float(x))
            sc_worst = min(sc_worst,
                           2.0 * b.hess ** 1.5 - abs(b.third))
    ok = fd_worst <= 1e-5 and sc_worst >= -1e-6
    return ok, (f"FD mismatch {fd_worst:.3e} (tol 1e-5); self-concordance "
                f"margin {sc_worst:.3e} (>= -1e-6)"), \
        min(1e-5 - fd_worst, sc_worst + 1e-6)


# -- 8. conditional KL rate -------------------------------------------------

def kl_rate() -> Tuple[bool, str]:
    worst = -np.inf
    for alpha in _ALPHAS:
        for tau in _TAUS:
            series = _stable_divergence_series(
                alpha, tau, diagnostics.kl_gaussian_1d)
            rate = 1.0 + alpha / tau
            ks = np.arange(1, 21)
            bound = series[0] * rate ** (-(2 * ks - 1))
            worst = max(worst, float(np.max(series[1:] - bound)))
    return (worst <= 1e-12, f"max KL excess over rate bound {worst:.3e}, "
                            f"k = 1..20, 9 configs (tol 1e-12)",
            1e-12 - worst)


# -- 9. quartic counterexample ---------------------------------------------

def quartic_counterexample() -> Tuple[bool, str]:
    rep = diagnostics.quartic_counterexample_report()
    ok = (rep["block_value"] == -6.0 and rep["block_negative"]
          and rep["witness"] is not None and rep["violations"] > 0)
    return ok, (f"block value {rep['block_value']} (exact -6), "
                f"convolution-Hessian witness at x = {rep['witness']:.2f} "
                f"({rep['violations']} grid violations)"), \
        -rep["witness_gap"]


# -- 10. private-ERM planner ------------------------------------------------

def _substitution_oracle_erm(inst: dp.DpInstance, theta: float) -> dict:
    """Plain-formula reimplementation, kept deliberately separate from the
    planner's code path."""
    lt = math.log(1.0 / (2.0 * inst.delta))
    k = (math.sqrt(inst.d) * inst.n * inst.eps
         / (inst.lipschitz_G * math.sqrt(2.0 * theta * lt)))
    mu = 2.0 * inst.lipschitz_G ** 2 * k * lt / (inst.n * inst.eps) ** 2
    a = 1.0 / (inst.d * max(math.log(inst.d), 1.0))
    alpha = 2.0 * a * k * mu / (inst.p - 1.0)
    return {"k": k, "mu": mu, "a": a, "alpha": alpha}


def _substitution_oracle_sco(inst: dp.DpInstance, theta: float) -> dict:
    lt = math.log(1.0 / (2.0 * inst.delta))
    n, eps, d, G = inst.n, inst.eps, inst.d, inst.lipschitz_G
    k = ((1.0 / (G * math.sqrt(theta)))
         * math.sqrt(d * lt / (eps * n) ** 2 + 1.0 / n)
         * min(n ** 2 * eps ** 2 / lt, n * d))
    mu = G ** 2 * k * max(lt / (n * eps) ** 2, 1.0 / (n * d))
    a = 1.0 / (inst.d * max(math.log(inst.d), 1.0))
    alpha = 2.0 * a * k * mu / (inst.p - 1.0)
    return {"k": k, "mu": mu, "a": a, "alpha": alpha}


def dp_planner_and_toy() -> Tuple[bool, str]:
    rng = np.random.default_rng(99)
    worst = 0.0
    for i in range(20):
        inst = dp.DpInstance(
            n=int(rng.integers(100, 10 ** 6)),
            eps=float(rng.uniform(0.05, 1.0)),
            delta=float(10.0 ** rng.uniform(-8, -2)),
            lipschitz_G=float(rng.uniform(0.5, 2.0)),
            diameter_D=2.0,
            p=float(rng.uniform(1.1, 1.9)),
            d=int(rng.integers(1, 51)),
            beta=float(rng.uniform(1.5, 50.0)))
        theta = float(rng.uniform(0.5, 8.0))
        if i % 2 == 0:
            plan = dp.plan_erm(inst, theta=theta)
            oracle = _substitution_oracle_erm(inst, theta)
        else:
            plan = dp.plan_sco(inst, theta=theta)
            oracle = _substitution_oracle_sco(inst, theta)
        for key, want in oracle.items():
            got = getattr(plan, key)
            worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
        if plan.threshold_ratio < 1.0 - 1e-12:
            return (False, "planned tau misses the rejection threshold",
                    plan.threshold_ratio - 1.0)
    if worst > 1e-12:
        return (False, f"planner vs substitution oracle rel dev {worst:.3e}",
                1e-12 - worst)

    inst = dp.DpInstance(n=200, eps=1.0, delta=1e-6, lipschitz_G=1.0,
                         diameter_D=2.0, p=1.5, d=2)
    plan = dp.plan_erm(inst)
    g = rng.standard_normal((inst.n, inst.d))
    q = inst.p / (inst.p - 1.0)
    g /= np.sum(np.abs(g) ** q, axis=1)[:, None] ** (1.0 / q)
    g *= rng.uniform(0.3, 1.0, inst.n)[:, None]
    cfg, _, _ = dp.toy_config(inst, plan, g)
    kernel = ProxKernel(cfg)
    excess = [dp.run_toy_erm(inst, g, np.random.default_rng(1000 + s),
                             plan=plan, kernel=kernel).excess_risk
              for s in range(20)]
    mean_excess = float(np.mean(excess))
    bound = 10.0 * dp.excess_risk_surrogate(inst)
    ok = mean_excess <= bound
    return ok, (f"oracle rel dev {worst:.3e} (tol 1e-12); toy mean excess "
                f"{mean_excess:.4f} <= {bound:.4f} over 20 seeds "
                f"(slack 10 is harness-chosen)"), bound - mean_excess


# ---------------------------------------------------------------------------
# registry and runner

_CRITERIA: Dict[str, Tuple[Callable[[], Tuple[bool, str, float]],
                           float, str]] = {
    "chi2-mixing-rate": (chi2_mixing, 1.0, "gaussian"),
    "dual-poincare-constant": (dual_poincare, 1.0, "gaussian"),
    "martingale-mean-measure": (martingale_mean_measure, 30.0, "gaussian"),
    "markov-equivalence": (markov_equivalence, 60.0, "gaussian"),
    "discrete-operator-identities": (discrete_operator_identities, 10.0,
                                     "discrete"),
    "convolution-identity": (convolution_identity, 30.0, "gaussian"),
    "llt-derivative-suite": (llt_derivative_suite, 30.0, "gaussian"),
    "conditional-kl-rate": (kl_rate, 1.0, "gaussian"),
    "quartic-counterexample": (quartic_counterexample, 30.0, "appendix"),
    "dp-planner-and-toy": (dp_planner_and_toy, 300.0, "dp"),
}

SUITES = ("gaussian", "discrete", "appendix", "dp", "all")


def run_criterion(name: str) -> CriterionResult:
    fn, budget, _ = _CRITERIA[name]
    start = time.perf_counter()
    try:
        passed, detail, margin = fn()
    except Exception as exc:  # honest red: an error is a failure with cause
        elapsed = time.perf_counter() - start
        return CriterionResult(name, False, f"error: {exc!r}", elapsed,
                               budget)
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        passed = False
        detail += f"; over time budget ({elapsed:.1f}s > {budget:.0f}s)"
    return CriterionResult(name, passed, detail, elapsed, budget, margin)


def run_suite(suite: str = "all") -> List[CriterionResult]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; pick one of {SUITES}")
    names = [n for n, (_, _, s) in _CRITERIA.items()
             if suite == "all" or s == suite]
    return [run_criterion(n) for n in names]
