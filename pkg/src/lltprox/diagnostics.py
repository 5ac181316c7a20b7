"""Divergence formulas, Poincaré bookkeeping, and statistical test helpers.

Closed forms live here so sampler modules can report exact chi-square / KL
series for Gaussian chains, and the test-suite can cross-check them against
quadrature of the defining integrals.  Conventions:

* chi2(mu || pi) = int (dmu/dpi - 1)^2 dpi; infinite when the density ratio
  is not square-integrable (signaled as +inf, never an exception).
* A metric Poincare constant of a law with covariance C, measured against a
  constant Hessian H, is 1 / lambda_max(H^1/2 C H^1/2): the best alpha with
  Var[f] <= (1/alpha) E[||grad f||^2_{H^-1}] over linear f, which is tight
  for Gaussians.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .convolution import SelfConvolution
from .llt import LltView, llt_value_tensor
from .potentials import Potential


@dataclass(frozen=True)
class GaussianLaw:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        C = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if C.shape != (m.size, m.size):
            raise ValueError("mean/cov shapes disagree")
        if np.abs(C - C.T).max() > 1e-12 * max(1.0, np.abs(C).max()):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", C)

    @property
    def dim(self) -> int:
        return self.mean.size


def kl_gaussian(mu: GaussianLaw, pi: GaussianLaw) -> float:
    """D_KL(mu || pi), closed form."""
    d = mu.dim
    Pi_inv = np.linalg.inv(pi.cov)
    diff = pi.mean - mu.mean
    _, ld_pi = np.linalg.slogdet(pi.cov)
    _, ld_mu = np.linalg.slogdet(mu.cov)
    return 0.5 * float(np.trace(Pi_inv @ mu.cov) + diff @ Pi_inv @ diff
                       - d + ld_pi - ld_mu)


def chi2_gaussian_1d(delta: float, var_gap: float, var: float) -> float:
    """chi^2(N(m + delta, v (1 - var_gap)) || N(m, v)) without cancellation.

    Parameterizing by the mean offset and the relative variance gap keeps
    full relative precision when both are tiny, where the generic closed
    form degenerates to expm1 of a difference of large logs.
    """
    e = float(var_gap)
    if not -1.0 < e < 1.0 or var <= 0.0:
        return np.inf
    arg = -0.5 * np.log1p(-e * e) + delta * delta / (var * (1.0 + e))
    return float(np.expm1(arg))


def kl_gaussian_1d(delta: float, var_gap: float, var: float) -> float:
    """D_KL in the same mean-offset / variance-gap parameterization."""
    e = float(var_gap)
    if not e < 1.0 or var <= 0.0:
        raise ValueError("variance gap must leave a positive variance")
    return float(0.5 * (-e - np.log1p(-e) + delta * delta / var))


def chi2_gaussian(mu: GaussianLaw, pi: GaussianLaw) -> float:
    """chi^2(mu || pi), closed form; +inf when the ratio dmu/dpi fails to be
    square-integrable against pi (2 * mu-precision - pi-precision not PD)."""
    A = np.linalg.inv(mu.cov)
    B = np.linalg.inv(pi.cov)
    M = 2.0 * A - B
    if np.min(np.linalg.eigvalsh(M)) <= 0.0:
        return np.inf
    b = 2.0 * A @ mu.mean - B @ pi.mean
    _, ld_pi = np.linalg.slogdet(pi.cov)
    _, ld_mu = np.linalg.slogdet(mu.cov)
    _, ld_M = np.linalg.slogdet(M)
    quad = (b @ np.linalg.solve(M, b)
            - 2.0 * mu.mean @ A @ mu.mean + pi.mean @ B @ pi.mean)
    val = np.exp(0.5 * (ld_pi - ld_M) - ld_mu + 0.5 * quad) - 1.0
    return max(float(val), 0.0)


# ---------------------------------------------------------------------------
# Poincaré bookkeeping


def gaussian_pi_constant(cov, metric_hess) -> float:
    """Best alpha with Var[f] <= (1/alpha) E||grad f||^2 measured in the
    inverse of the (constant) metric Hessian; exact for Gaussian laws."""
    C = np.atleast_2d(np.asarray(cov, dtype=float))
    H = np.atleast_2d(np.asarray(metric_hess, dtype=float))
    w, U = np.linalg.eigh(H)
    if np.min(w) <= 0.0:
        raise ValueError("metric Hessian must be positive definite")
    Hh = U @ (np.sqrt(w)[:, None] * U.T)
    return 1.0 / float(np.max(np.linalg.eigvalsh(Hh @ C @ Hh)))


def dual_pi_constants(target_cov, increment_cov, tau: int) -> dict:
    """The x-side transform-metric PI constant alpha of a Gaussian target,
    the phi-metric PI constant of the induced tilt marginal y_tau, and the
    predicted value alpha / (tau (alpha + tau)); the last two should agree
    exactly."""
    S = np.atleast_2d(np.asarray(target_cov, dtype=float))
    Sg = np.atleast_2d(np.asarray(increment_cov, dtype=float))
    alpha = gaussian_pi_constant(S, Sg)        # transform Hessian is Sg
    C_y = tau * Sg + tau * tau * Sg @ S @ Sg
    marginal = gaussian_pi_constant(C_y, np.linalg.inv(Sg))
    return {"alpha": alpha, "marginal": marginal,
            "predicted": alpha / (tau * (alpha + tau))}


def rayleigh_quotient_min(nodes, weights, log_density, psi_hess, fs) -> float:
    """min over test pairs (f, f') of E[(f')^2 / psi''] / Var[f] under the
    density exp(log_density) restricted to the quadrature nodes."""
    ld = np.asarray(log_density(nodes))
    p = weights * np.exp(ld - ld.max())
    p = p / p.sum()
    h = np.asarray(psi_hess(nodes))
    best = np.inf
    for f, fp in fs:
        fv = np.asarray(f(nodes))
        var = float(p @ (fv - p @ fv) ** 2)
        if var <= 1e-300:
            continue
        energy = float(p @ (np.asarray(fp(nodes)) ** 2 / h))
        best = min(best, energy / var)
    return best


# ---------------------------------------------------------------------------
# transform identities


def gaussian_llt_identity(mean, cov, n_probes: int = 50,
                          seed: int = 0) -> float:
    """Max deviation of the quadrature transform of a Gaussian potential from
    the affine-plus-quadratic form <x, mean> + x' cov x / 2 + const, with the
    constant fitted once at the first probe."""
    from .potentials import make_gaussian

    m = np.atleast_1d(np.asarray(mean, dtype=float))
    S = np.atleast_2d(np.asarray(cov, dtype=float))
    d = m.size
    phi = make_gaussian(m, S)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(np.max(np.diag(S)))
    probes = rng.uniform(-1.5 / scale, 1.5 / scale, size=(n_probes, d))
    if d == 1:
        view = LltView(phi, backend="quadrature-1d")
        vals = np.array([view.value(float(x)) for x in probes[:, 0]])
    else:
        vals = np.array([llt_value_tensor(phi, x) for x in probes])
    model = probes @ m + 0.5 * np.einsum("ni,ij,nj->n", probes, S, probes)
    const = vals[0] - model[0]
    return float(np.max(np.abs(vals - model - const)))


def assumption_transfer_check(V: Potential, phi: Potential, alpha: float,
                              grid) -> tuple[bool, float]:
    """Does curvature dominance transfer through the transform?

    Given 1-D potentials with V'' >= alpha * psi'' on the grid (psi the
    transform of phi; checked as a precondition), tests whether
    phi'' - alpha * (V-transform)'' >= -1e-6 there, i.e. whether alpha times
    the transform of V stays below phi in curvature.  Quadratic phi makes
    this an identity; the non-quadratic outcome is reported, not asserted.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    psi_view = LltView(phi)
    v_view = LltView(V)
    psi_h = np.array([float(psi_view.hess(g)[0, 0]) for g in grid])
    v_h = np.array([float(np.atleast_2d(V.hess(np.array([g])))[0, 0])
                    for g in grid])
    if np.any(v_h - alpha * psi_h < -1e-9):
        raise ValueError("precondition failed: target curvature does not "
                         "dominate alpha times the transform curvature")
    vsharp_h = np.array([float(v_view.hess(g)[0, 0]) for g in grid])
    phi_h = np.array([float(np.atleast_2d(phi.hess(np.array([g])))[0, 0])
                      for g in grid])
    margin = float(np.min(phi_h - alpha * vsharp_h))
    return margin >= -1e-6, margin


def quartic_counterexample_report() -> dict:
    """Two ways the quartic breaks Hessian-domination arguments.

    (i) the two-point block condition: with phi(x) = x^4 and gamma = 1/2 the
        value phi''(x - y) - gamma phi''(x) at x = y = 1 is exactly -6;
    (ii) a grid scan of the twice-self-convolved normalized quartic density
        finds points where its potential curvature falls below half the
        quartic's curvature, witnessing that convolution does not preserve
        the halved-Hessian lower bound.
    """
    block_value = 12.0 * (1.0 - 1.0) ** 2 - 0.5 * 12.0 * 1.0 ** 2
    log_norm = float(np.log(1.8128049541109545))  # int exp(-x^4)

    def logpdf(x):
        return -np.asarray(x) ** 4 - log_norm

    r = 60.0 ** 0.25
    conv = SelfConvolution(logpdf, (-r, r))
    tab = conv.level(2)
    xs = np.linspace(0.0, min(tab.hi - 0.3, 4.5), 181)
    h = 1e-3
    conv_hess = (tab.logpdf(xs + h) - 2.0 * tab.logpdf(xs)
                 + tab.logpdf(xs - h)) / h ** 2
    conv_hess = -conv_hess          # potential curvature, not log-density
    half_phi = 0.5 * 12.0 * xs ** 2
    gaps = conv_hess - half_phi
    bad = np.nonzero(gaps < -1e-6)[0]
    witness = float(xs[bad[np.argmin(gaps[bad])]]) if bad.size else None
    return {
        "block_value": block_value,
        "block_negative": block_value < 0.0,
        "witness": witness,
        "witness_gap": float(gaps.min()),
        "violations": int(bad.size),
    }


# ---------------------------------------------------------------------------
# Bregman divergence


@dataclass
class BregmanOracle:
    """First-order gap of a convex potential."""

    potential: Potential

    def divergence(self, x_new, x) -> float:
        x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.potential
        g = np.atleast_1d(p.grad(x))
        return float(p.value(x_new) - p.value(x) - g @ (x_new - x))


# ---------------------------------------------------------------------------
# statistical tests


def _pairwise_mean_1d(sorted_x: np.ndarray) -> float:
    """mean_{i != j} |x_i - x_j| for sorted input, O(n)."""
    n = sorted_x.size
    k = np.arange(n)
    total = 2.0 * float(np.dot(sorted_x, 2.0 * k - n + 1.0))
    return total / (n * (n - 1))


def _cross_mean_1d(sorted_a: np.ndarray, b: np.ndarray) -> float:
    """mean_{ij} |a_i - b_j| with a sorted, O((n+m) log n)."""
    n = sorted_a.size
    prefix = np.concatenate([[0.0], np.cumsum(sorted_a)])
    pos = np.searchsorted(sorted_a, b)
    s = float(np.sum(b * (2.0 * pos - n) + (prefix[n] - 2.0 * prefix[pos])))
    return s / (n * b.size)


def energy_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample energy distance 2 E|A-B| - E|A-A'| - E|B-B'|."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1 or a.shape[1] == 1:
        sa = np.sort(a.ravel())
        sb = np.sort(b.ravel())
        return (2.0 * _cross_mean_1d(sa, sb) - _pairwise_mean_1d(sa)
                - _pairwise_mean_1d(sb))
    dab = cdist(a, b).mean()
    n, m = len(a), len(b)
    daa = cdist(a, a).sum() / (n * (n - 1))
    dbb = cdist(b, b).sum() / (m * (m - 1))
    return 2.0 * dab - daa - dbb


def two_sample_test(samples_a, samples_b, n_permutations: int = 500,
                    seed: int = 0) -> float:
    """Energy-distance permutation p-value (seeded, one-sided)."""
    a = np.atleast_1d(np.asarray(samples_a, dtype=float))
    b = np.atleast_1d(np.asarray(samples_b, dtype=float))
    if min(a.shape[0], b.shape[0]) < 100:
        raise ValueError("need at least 100 samples per side")
    pooled = np.concatenate([a, b], axis=0)
    if np.ptp(pooled, axis=0).max() == 0.0:
        raise ValueError("degenerate (constant) samples")
    observed = energy_statistic(a, b)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(pooled.shape[0])
        stat = energy_statistic(pooled[perm[:n]], pooled[perm[n:]])
        hits += stat >= observed
    return (1.0 + hits) / (1.0 + n_permutations)


def ks_test(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a callable CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0 or x[0] == x[-1]:
        raise ValueError("degenerate sample")
    F = np.asarray(cdf(x))
    up = np.arange(1, n + 1) / n - F
    down = F - np.arange(0, n) / n
    return float(max(up.max(), down.max()))
