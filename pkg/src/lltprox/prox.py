"""Proximal sampler built on the smoothing transform of an increment law.

One step of the chain, at inverse temperature ``tau``:

* forward  — given ``x``, draw ``tau`` independent increments from the
  ``x``-tilted increment density and add them to get ``y``;
* backward — draw ``x'`` from the density proportional to
  ``exp(<y, x> - V(x) - tau * psi(x))``, where ``V`` is the target potential
  and ``psi`` the log-partition of the tilted increment.

The backward draw has four interchangeable backends: an exact conditional for
Gaussian target/increment pairs, a certified 1-D quadrature path, a tensor-grid
sampler for dimensions up to three, and a rejection scheme for targets that
split into a cheap strongly convex core plus an averaged Lipschitz part whose
components are only touched through value queries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.special

from .convolution import SelfConvolution
from .diagnostics import GaussianLaw, chi2_gaussian, kl_gaussian
from .llt import LltView, TiltedSampler
from .localization import RenormFamily
from .potentials import (GaussianPotential, LipschitzMixturePotential,
                         Potential, _axis_box)
from .quadrature import bracket_support, panel_nodes

_BACKENDS = ("auto", "exact-gaussian", "quad-1d", "grid", "rejection")


class RejectionOverflowError(ArithmeticError):
    """Raised when the rejection loop exhausts its attempt budget."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class RejectionSpec:
    """Budget for the value-oracle rejection backend.

    ``lipschitz_G`` bounds the gradient of the weighted averaged part,
    ``delta`` is the total-variation slack the caller is willing to accept,
    and ``attempt_factor`` multiplies the expected number of proposals
    (``e / (1 - delta)``) to form a hard cap.
    """

    lipschitz_G: float
    delta: float
    attempt_factor: int = 64

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.lipschitz_G < 0.0:
            raise ValueError("lipschitz_G must be nonnegative")
        if self.attempt_factor < 1:
            raise ValueError("attempt_factor must be at least one")

    def attempt_cap(self) -> int:
        return int(self.attempt_factor * np.ceil(np.e / (1.0 - self.delta)))


@dataclass
class ProxConfig:
    """Fully assembled description of one proximal-sampler run.

    For the rejection backend the target must decompose as
    ``mixture_weight * mean_i mixture_i + core`` and the declared convexity
    modulus of ``core + tau * psi`` has to clear the oracle-efficiency
    threshold ``1e4 * G^2 * log(1/delta)``.
    """

    target: Potential
    increment: Potential
    tau: int
    steps: int
    x0: Optional[np.ndarray] = None
    init_mean: Optional[np.ndarray] = None
    init_cov: Optional[np.ndarray] = None
    backend: str = "auto"
    grid_nodes: Optional[int] = None
    grid_drop: float = 60.0
    mixture: Optional[LipschitzMixturePotential] = None
    mixture_weight: float = 1.0
    core: Optional[Potential] = None
    rejection: Optional[RejectionSpec] = None
    regularizer_modulus: Optional[float] = None

    def __post_init__(self):
        self.tau = int(self.tau)
        if not 1 <= self.tau <= 10 ** 6:
            raise ValueError("tau must be an integer in [1, 1e6]")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.backend not in _BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.target.dim != self.increment.dim:
            raise ValueError("target and increment dimensions differ")
        if self.x0 is None and self.init_mean is None:
            raise ValueError("provide x0 or a Gaussian initial law")
        if self.init_mean is not None:
            self.init_mean = np.atleast_1d(np.asarray(self.init_mean, float))
            if self.init_cov is None:
                raise ValueError("init_mean needs init_cov")
            self.init_cov = np.atleast_2d(np.asarray(self.init_cov, float))
        if self.x0 is not None:
            self.x0 = np.atleast_1d(np.asarray(self.x0, float))
        if self.resolved_backend() == "rejection":
            self._validate_rejection()

    def resolved_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        if self.rejection is not None:
            return "rejection"
        if (isinstance(self.target, GaussianPotential)
                and isinstance(self.increment, GaussianPotential)):
            return "exact-gaussian"
        if self.target.dim == 1:
            return "quad-1d"
        if self.target.dim <= 3:
            return "grid"
        raise ValueError("no backward backend covers this configuration")

    def _validate_rejection(self):
        if self.rejection is None or self.mixture is None or self.core is None:
            raise ValueError("rejection backend needs mixture, core and a "
                             "RejectionSpec")
        if self.regularizer_modulus is None or self.regularizer_modulus <= 0:
            raise ValueError("rejection backend needs a positive "
                             "regularizer_modulus")
        spec = self.rejection
        need = 1e4 * spec.lipschitz_G ** 2 * np.log(1.0 / spec.delta)
        have = self.tau * self.regularizer_modulus
        if have < need:
            raise ValueError(
                "oracle-efficiency threshold not met: tau * modulus = "
                f"{have:.6g} < 1e4 * G^2 * log(1/delta) = {need:.6g}")
        # spot-check that the declared split actually assembles the target
        rng = np.random.default_rng(0)
        pts = 0.25 * rng.standard_normal((3, self.target.dim))
        if self.target.domain is not None:
            pts[~np.asarray(self.target.domain.contains(pts))] = 0.0
        whole = np.asarray(self.target.value(pts), float)
        split = (self.mixture_weight * np.asarray(self.mixture.value(pts), float)
                 + np.asarray(self.core.value(pts), float))
        scale = max(1.0, float(np.max(np.abs(whole[np.isfinite(whole)]))))
        dev = np.max(np.abs((whole - split)[np.isfinite(whole)]))
        if not dev <= 1e-8 * scale:
            raise ValueError("mixture_weight * mixture + core does not match "
                             f"the target (deviation {dev:.3g})")


@dataclass
class ChainStats:
    """Trajectory plus per-step accounting for one chain run."""

    xs: np.ndarray                  # (steps + 1, d) visited states
    ys: np.ndarray                  # (steps, d) intermediate signals
    accept_rates: np.ndarray        # (steps,) backward acceptance (1.0 = exact)
    oracle_calls: np.ndarray        # (steps,) mixture value-oracle queries
    backend: str
    means: Optional[np.ndarray] = None   # (steps + 1, d) exact law, Gaussian path
    covs: Optional[np.ndarray] = None    # (steps + 1, d, d)
    chi2: Optional[np.ndarray] = None    # (steps + 1,) divergence to the target
    kl: Optional[np.ndarray] = None

    def summary(self) -> dict:
        out = {
            "backend": self.backend,
            "steps": int(len(self.ys)),
            "dim": int(self.xs.shape[1]),
            "mean_accept_rate": float(np.mean(self.accept_rates)),
            "total_oracle_calls": int(np.sum(self.oracle_calls)),
            "final_state": [float(v) for v in self.xs[-1]],
        }
        if self.chi2 is not None:
            out["final_chi2"] = float(self.chi2[-1])
            out["final_kl"] = float(self.kl[-1])
        return out

    def rows(self):
        """Per-iteration records (iteration, chi2, kl, accept_rate)."""
        for k in range(len(self.ys)):
            yield {
                "iteration": k + 1,
                "chi2": float(self.chi2[k + 1]) if self.chi2 is not None
                else float("nan"),
                "kl": float(self.kl[k + 1]) if self.kl is not None
                else float("nan"),
                "accept_rate": float(self.accept_rates[k]),
            }


# ---------------------------------------------------------------------------
# tensor-grid backward sampler


def _linear_unit_inverse(a0: np.ndarray, a1: np.ndarray,
                         u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the density (1-t) a0 + t a1 on the unit interval."""
    tot = a0 + a1
    diff = a1 - a0
    disc = np.maximum(a0 * a0 + diff * tot * u, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (np.sqrt(disc) - a0) / diff
    nearly_flat = np.abs(diff) <= 1e-12 * np.maximum(tot, 1e-300)
    t = np.where(nearly_flat | ~np.isfinite(t), u, t)
    return np.clip(t, 0.0, 1.0)


class GridSampler:
    """Samples exp(static(x) + <y, x>) from a tensor grid, d <= 3.

    The tilt-independent part is tabulated once; every draw re-tilts the
    table, picks a cell proportionally to its corner-averaged mass, and then
    samples the multilinear interpolant inside the cell exactly, one axis at
    a time.  A guard rejects tilts whose mass leaks to the grid boundary.
    """

    def __init__(self, static_logf, lo, hi, nodes_per_axis: int,
                 boundary_drop: float = 12.0, chunk: int = 1 << 16):
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        self.d = lo.size
        if not 1 <= self.d <= 3:
            raise ValueError("grid sampler covers dimensions one to three")
        if np.any(hi <= lo):
            raise ValueError("empty grid box")
        self.axes = [np.linspace(lo[a], hi[a], int(nodes_per_axis))
                     for a in range(self.d)]
        self.steps = np.array([ax[1] - ax[0] for ax in self.axes])
        self.boundary_drop = float(boundary_drop)
        shape = tuple(len(ax) for ax in self.axes)
        mesh = np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)
        pts = mesh.reshape(-1, self.d)
        vals = np.empty(len(pts))
        for s in range(0, len(pts), chunk):
            vals[s:s + chunk] = np.asarray(static_logf(pts[s:s + chunk]), float)
        self.static = vals.reshape(shape)
        if not np.any(np.isfinite(self.static)):
            raise ValueError("static density vanishes on the whole grid")
        edge = np.zeros(shape, dtype=bool)
        for a in range(self.d):
            sl = [slice(None)] * self.d
            for end in (0, -1):
                sl[a] = end
                edge[tuple(sl)] = True
        self._edge = edge

    def _tilted(self, y: np.ndarray) -> np.ndarray:
        L = self.static
        for a in range(self.d):
            shape = [1] * self.d
            shape[a] = -1
            L = L + (y[a] * self.axes[a]).reshape(shape)
        return L

    def _guard(self, L: np.ndarray, y: np.ndarray):
        peak = float(np.nanmax(L[np.isfinite(L)])) if np.any(np.isfinite(L)) \
            else -np.inf
        edge_vals = L[self._edge]
        edge_peak = float(np.max(edge_vals[np.isfinite(edge_vals)])) \
            if np.any(np.isfinite(edge_vals)) else -np.inf
        if not np.isfinite(peak):
            raise ArithmeticError(f"tilt {y} kills the whole grid")
        if edge_peak > peak - self.boundary_drop:
            raise ArithmeticError(
                f"tilt {y} pushes mass to the grid boundary "
                f"(edge log-gap {peak - edge_peak:.2f})")

    def _corner_blocks(self, F: np.ndarray, cells):
        o = np.array([0, 1])
        if self.d == 1:
            (i,) = cells
            return F[i[:, None] + o[None, :]]
        if self.d == 2:
            i, j = cells
            return F[i[:, None, None] + o[None, :, None],
                     j[:, None, None] + o[None, None, :]]
        i, j, k = cells
        return F[i[:, None, None, None] + o[None, :, None, None],
                 j[:, None, None, None] + o[None, None, :, None],
                 k[:, None, None, None] + o[None, None, None, :]]

    def mode(self, y: np.ndarray) -> np.ndarray:
        """Grid point with the largest tilted density."""
        L = self._tilted(np.atleast_1d(np.asarray(y, float)))
        self._guard(L, y)
        flat = np.nanargmax(np.where(np.isfinite(L), L, -np.inf))
        idx = np.unravel_index(flat, L.shape)
        return np.array([self.axes[a][idx[a]] for a in range(self.d)])

    def draw(self, y, rng: np.random.Generator, size: Optional[int] = None):
        y = np.atleast_1d(np.asarray(y, float))
        L = self._tilted(y)
        self._guard(L, y)
        peak = np.max(L[np.isfinite(L)])
        F = np.exp(np.where(np.isfinite(L), L - peak, -np.inf))
        F = np.where(np.isfinite(F), F, 0.0)
        M = F
        for a in range(self.d):
            sl0 = [slice(None)] * M.ndim
            sl1 = [slice(None)] * M.ndim
            sl0[a], sl1[a] = slice(None, -1), slice(1, None)
            M = 0.5 * (M[tuple(sl0)] + M[tuple(sl1)])
        cum = np.cumsum(M.ravel())
        total = cum[-1]
        if not np.isfinite(total) or total <= 0.0:
            raise ArithmeticError(f"tilted grid mass degenerate for tilt {y}")
        n = 1 if size is None else int(size)
        u = rng.random(n) * total
        flat = np.minimum(np.searchsorted(cum, u, side="right"), M.size - 1)
        cells = np.unravel_index(flat, M.shape)
        block = self._corner_blocks(F, cells)
        pts = np.empty((n, self.d))
        for a in range(self.d):
            rest = tuple(range(2, block.ndim))
            a0 = block[:, 0].mean(axis=tuple(r - 1 for r in rest)) if rest \
                else block[:, 0]
            a1 = block[:, 1].mean(axis=tuple(r - 1 for r in rest)) if rest \
                else block[:, 1]
            t = _linear_unit_inverse(a0, a1, rng.random(n))
            pts[:, a] = self.axes[a][cells[a]] + t * self.steps[a]
            shape = (n,) + (1,) * (block.ndim - 2)
            block = (block[:, 0] * (1.0 - t).reshape(shape)
                     + block[:, 1] * t.reshape(shape))
        return pts[0] if size is None else pts


# ---------------------------------------------------------------------------
# the kernel


class ProxKernel:
    """Forward/backward pair for one proximal-sampler configuration."""

    def __init__(self, config: ProxConfig):
        self.config = config
        self.backend = config.resolved_backend()
        self.psi_view = LltView(config.increment)
        self._fwd = TiltedSampler(config.increment)
        self._family = None
        self._grid = None
        self._core_grid = None
        self._core_family = None
        if self.backend in ("exact-gaussian", "quad-1d"):
            self._family = RenormFamily(config.target, config.increment)
        elif self.backend == "grid":
            self._grid = self._build_grid(config.target)
        elif self.backend == "rejection":
            core = config.core
            if (isinstance(core, GaussianPotential)
                    and isinstance(config.increment, GaussianPotential)):
                self._core_family = RenormFamily(core, config.increment)
            else:
                self._core_grid = self._build_grid(core)

    # -- shared pieces ------------------------------------------------------
    def _static_log_density(self, pot: Potential):
        tau = self.config.tau
        view = self.psi_view

        def logf(P):
            return -(np.asarray(pot.value(P), float)
                     + tau * view.value_batch(P))

        return logf

    def _build_grid(self, pot: Potential) -> GridSampler:
        cfg = self.config
        d = pot.dim
        default_nodes = {1: 2049, 2: 513, 3: 129}[d]
        nodes = cfg.grid_nodes or default_nodes
        if pot.domain is not None:
            lo, hi = pot.domain.bounding_box()
            lo = np.atleast_1d(np.asarray(lo, float))
            hi = np.atleast_1d(np.asarray(hi, float))
            pad = 2.0 * (hi - lo) / (nodes - 1)
            lo, hi = lo - pad, hi + pad
        else:
            lo, hi = _axis_box(pot, cfg.grid_drop)
            # widen for the smoothing term: psi grows at most quadratically
            lo, hi = 1.5 * lo, 1.5 * hi
        return GridSampler(self._static_log_density(pot), lo, hi, nodes)

    # -- the two half-steps -------------------------------------------------
    def forward(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        draws = self._fwd.sample(x if self.config.increment.dim > 1
                                 else float(x[0]), rng, size=self.config.tau)
        return np.atleast_1d(np.asarray(draws, float).reshape(
            self.config.tau, -1).sum(axis=0))

    def backward(self, y: np.ndarray, rng: np.random.Generator):
        """Returns (x', accept_rate, oracle_calls)."""
        if self.backend == "exact-gaussian":
            x = self._family.sample_tilted_target(self.config.tau, y, rng)
            return np.atleast_1d(x), 1.0, 0
        if self.backend == "quad-1d":
            x = self._family.sample_tilted_target(
                self.config.tau, float(y[0]), rng)
            return np.atleast_1d(x), 1.0, 0
        if self.backend == "grid":
            return np.atleast_1d(self._grid.draw(y, rng)), 1.0, 0
        return self._rejection_step(y, rng)

    def _propose_core(self, y: np.ndarray, rng: np.random.Generator):
        """One draw plus the mode of the core-only backward density."""
        if self._core_family is not None:
            prop = np.atleast_1d(
                self._core_family.sample_tilted_target(self.config.tau, y, rng))
            mode, _ = self._core_family.tilted_mean_cov(self.config.tau, y)
            return prop, np.atleast_1d(mode)
        return (np.atleast_1d(self._core_grid.draw(y, rng)),
                self._core_grid.mode(y))

    def _rejection_step(self, y: np.ndarray, rng: np.random.Generator):
        cfg = self.config
        spec = cfg.rejection
        cap = spec.attempt_cap()
        mix = cfg.mixture
        ncomp = mix.n_components
        anchor = None
        calls = 0
        for attempt in range(1, cap + 1):
            prop, mode = self._propose_core(y, rng)
            if anchor is None:
                anchor = mode
            i = int(rng.integers(ncomp))
            gap = cfg.mixture_weight * (mix.component_value(i, prop)
                                        - mix.component_value(i, anchor))
            calls += 2
            if rng.random() < np.exp(-max(gap, 0.0)):
                return prop, 1.0 / attempt, calls
        raise RejectionOverflowError(
            f"no acceptance within {cap} attempts",
            {"tilt": [float(v) for v in np.atleast_1d(y)],
             "attempts": cap, "oracle_calls": calls,
             "lipschitz_G": spec.lipschitz_G, "delta": spec.delta})


# ---------------------------------------------------------------------------
# chain driver


def _gaussian_recursion(cfg: ProxConfig):
    """Exact per-iteration laws for the all-Gaussian chain."""
    tgt: GaussianPotential = cfg.target
    inc: GaussianPotential = cfg.increment
    tau = cfg.tau
    S = tgt.cov
    Sinv = tgt.prec
    Sg = inc.cov
    mu = inc.mean
    P = Sinv + tau * Sg
    Pinv = np.linalg.inv(P)
    m_pi = tgt.mean
    means = [np.array(cfg.init_mean, float)]
    covs = [np.array(cfg.init_cov, float)]
    for _ in range(cfg.steps):
        mk, Ck = means[-1], covs[-1]
        means.append(Pinv @ (Sinv @ m_pi + tau * Sg @ mk))
        mid = tau * Sg @ Ck @ (tau * Sg)
        covs.append(Pinv @ (mid + tau * Sg) @ Pinv + Pinv)
    pi = GaussianLaw(m_pi, S)
    chi2 = np.array([chi2_gaussian(GaussianLaw(m, C), pi)
                     for m, C in zip(means, covs)])
    kl = np.array([kl_gaussian(GaussianLaw(m, C), pi)
                   for m, C in zip(means, covs)])
    return np.array(means), np.array(covs), chi2, kl


def run_chain(config: ProxConfig, rng: np.random.Generator,
              kernel: Optional[ProxKernel] = None) -> ChainStats:
    """Run the configured chain and collect trajectory plus accounting.

    Passing a prebuilt kernel skips the (possibly expensive) backend setup,
    which matters when many seeded replicas share one configuration.
    """
    if kernel is None:
        kernel = ProxKernel(config)
    elif kernel.config is not config:
        raise ValueError("kernel was built for a different configuration")
    d = config.target.dim
    if config.x0 is not None:
        x = np.array(config.x0, float)
    else:
        L = np.linalg.cholesky(config.init_cov)
        x = config.init_mean + L @ rng.standard_normal(d)
    xs = [x.copy()]
    ys = []
    rates = np.empty(config.steps)
    calls = np.zeros(config.steps, dtype=int)
    for k in range(config.steps):
        y = kernel.forward(x, rng)
        x, rates[k], calls[k] = kernel.backward(y, rng)
        ys.append(y)
        xs.append(x.copy())
    stats = ChainStats(np.array(xs), np.array(ys), rates, calls,
                       kernel.backend)
    if (kernel.backend == "exact-gaussian" and config.init_mean is not None):
        stats.means, stats.covs, stats.chi2, stats.kl = \
            _gaussian_recursion(config)
    return stats


# ---------------------------------------------------------------------------
# structural checks tied to the kernel


def halfway_contraction_gaussian(target_cov, increment_cov, tau: int) -> dict:
    """Worst-case variance contraction of the backward half-step on linear
    statistics, against the bound coming from the relative-convexity modulus.
    """
    S = np.atleast_2d(np.asarray(target_cov, float))
    Sg = np.atleast_2d(np.asarray(increment_cov, float))
    A = tau * tau * Sg @ S @ Sg
    B = tau * Sg + A
    sup = float(scipy.linalg.eigh(A, B, eigvals_only=True)[-1])
    half = scipy.linalg.sqrtm(Sg).real
    alpha = 1.0 / float(np.linalg.eigvalsh(half @ S @ half)[-1])
    return {"sup": sup, "bound": tau / (alpha + tau), "alpha": alpha}


def _psi_1d(family: RenormFamily, xs: np.ndarray) -> np.ndarray:
    """Increment log-partition on either family path."""
    xs = np.atleast_1d(np.asarray(xs, float))
    if family.is_gaussian:
        mu, sg2 = family._mu[0], family._Sg[0, 0]
        return mu * xs + 0.5 * sg2 * xs * xs + family._c_psi
    return family.psi(xs)


def _forward_table(family: RenormFamily, tau: int,
                   conv: Optional[SelfConvolution] = None):
    if conv is None:
        pot = family.increment

        def logq(w):
            return -np.asarray(pot.value(np.asarray(w, float)), float)

        lo, hi, _ = bracket_support(logq, drop=75.0)
        conv = SelfConvolution(logq, (lo, hi),
                               kinks=tuple(pot.kinks_1d()))
    return conv.level(tau)


def transition_kernel_1d(family: RenormFamily, tau: int, x_from, x_to,
                         conv: Optional[SelfConvolution] = None,
                         panels: int = 28, order: int = 12) -> np.ndarray:
    """Composite transition density p(x' | x) of one full step, 1-D.

    Integrates the forward signal density against the backward conditional
    over a certified node set; rows are indexed by ``x_from``, columns by
    ``x_to``.  All three factors are normalized independently, so the result
    is a bona fide transition density in ``x_to``.
    """
    x_from = np.atleast_1d(np.asarray(x_from, float))
    x_to = np.atleast_1d(np.asarray(x_to, float))
    tab = _forward_table(family, tau, conv)
    brk = [k for k in set(tab.kinks) | {0.0} if tab.lo < k < tab.hi]
    nodes, weights = panel_nodes(tab.lo, tab.hi, panels, order, breaks=brk)
    logq = tab.logpdf(nodes)
    log_fwd = (logq[None, :] + np.outer(x_from, nodes))  # (nfrom, nodes)
    log_fwd -= scipy.special.logsumexp(log_fwd + np.log(weights)[None, :],
                                       axis=1, keepdims=True)
    vt = np.array([family.value(tau, float(c)) for c in nodes])
    log_bwd = (np.outer(nodes, x_to)
               - np.asarray(family.target.value(x_to), float)[None, :]
               - tau * _psi_1d(family, x_to)[None, :] + vt[:, None])
    P = np.exp(log_fwd) @ (weights[:, None] * np.exp(log_bwd))
    return P


def detailed_balance_check(family: RenormFamily, tau: int, xs,
                           conv: Optional[SelfConvolution] = None) -> float:
    """Max relative asymmetry of pi(x) p(x, x') over a 1-D probe grid."""
    xs = np.atleast_1d(np.asarray(xs, float))
    P = transition_kernel_1d(family, tau, xs, xs, conv=conv)
    logpi = -np.asarray(family.target.value(xs), float)
    logpi -= scipy.special.logsumexp(logpi)
    flow = np.exp(logpi)[:, None] * P
    scale = float(np.max(np.abs(flow)))
    return float(np.max(np.abs(flow - flow.T))) / max(scale, 1e-300)


def gibbs_equivalence_check(family: RenormFamily, tau: int, x0: float,
                            rng: np.random.Generator, n: int = 10_000,
                            bins: int = 40,
                            conv: Optional[SelfConvolution] = None) -> dict:
    """Compare the two-stage sampler against the quadrature kernel at one
    start point: bin-mass deviation of an empirical transition histogram, and
    for Gaussian pairs also the closed-form transition density.
    """
    x0 = float(x0)
    fine = 20
    if family.is_gaussian:
        mean, cov = family.tilted_mean_cov(tau, 0.0)
        half = 10.0 * np.sqrt(cov[0, 0]) + abs(mean[0])
        lo, hi = mean[0] - half, mean[0] + half
    else:
        lo, hi = family._domain_clamped()
    grid = np.linspace(lo, hi, bins * fine + 1)
    row = transition_kernel_1d(family, tau, [x0], grid, conv=conv)[0]
    edges = grid[::fine]
    # trapezoid mass inside each bin, using the fine nodes
    masses = np.empty(bins)
    for b in range(bins):
        sl = slice(b * fine, b * fine + fine + 1)
        masses[b] = np.trapezoid(row[sl], grid[sl])
    masses /= masses.sum()

    # empirical two-stage transitions from the same start
    if family.is_gaussian:
        mu_g = family._mu[0]
        sg = family._Sg[0, 0]
        ys = (tau * (mu_g + sg * x0)
              + np.sqrt(tau * sg) * rng.standard_normal(n))
        m0, c0 = family.tilted_mean_cov(tau, 0.0)
        m1, _ = family.tilted_mean_cov(tau, 1.0)
        slope = m1[0] - m0[0]
        means = m0[0] + slope * ys
        draws = means + np.sqrt(c0[0, 0]) * rng.standard_normal(n)
    else:
        if n > 2048:
            raise ValueError("empirical check beyond 2048 draws needs the "
                             "Gaussian closed form")
        draws = np.empty(n)
        for i in range(n):
            w = family.sample_increment(x0, rng, size=tau)
            y = float(np.sum(w))
            draws[i] = float(family.sample_tilted_target(tau, y, rng)[0])
    counts, _ = np.histogram(draws, bins=edges)
    emp = counts / n
    hist_dev = float(np.max(np.abs(emp - masses)))

    kernel_dev = None
    if family.is_gaussian:
        # closed-form law of one full step started at x0
        mu_g = family._mu[0]
        sg = family._Sg[0, 0]
        m0, c0 = family.tilted_mean_cov(tau, 0.0)
        m1, _ = family.tilted_mean_cov(tau, 1.0)
        slope = m1[0] - m0[0]
        my = tau * (mu_g + sg * x0)
        vy = tau * sg
        mean_step = m0[0] + slope * my
        var_step = slope * slope * vy + c0[0, 0]
        dens = np.exp(-0.5 * (grid - mean_step) ** 2 / var_step) \
            / np.sqrt(2 * np.pi * var_step)
        kernel_dev = float(np.max(np.abs(dens - row)))

    return {"hist_dev": hist_dev, "kernel_dev": kernel_dev,
            "edges": edges, "kernel_masses": masses, "empirical": emp}
