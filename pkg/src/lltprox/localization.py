"""Additive-increment localization of a target density.

State: a running sum ``y`` of increments.  Conditionally on ``y`` at time
``tau`` the hidden target draw follows the doubly-tilted law

    pi_tau^y(x) = exp(<y, x> - V(x) - tau * psi(x) + V_tau(y))

where ``V`` is the target potential, ``psi`` the log-Laplace transform of the
increment potential ``phi``, and

    V_tau(a) = -log int exp(<a, x> - V(x) - tau * psi(x)) dx

the renormalizer.  One forward step draws ``z ~ pi_tau^y`` tilted toward the
target, then an increment ``w`` from ``exp(<z, w> - phi(w) - psi(z))`` and
sets ``y <- y + w``.  Marginally this is identical to drawing ``x`` from the
target once and summing iid tilted increments around it -- the two-route
equivalence exercised by the test-suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from .convolution import SelfConvolution
from .llt import LltView, TiltedSampler
from .potentials import GaussianPotential, Potential
from .quadrature import (LogIntegral1D, bracket_support, log_integral_1d,
                         panel_nodes, sample_piecewise_linear,
                         sample_rows_piecewise_linear)


@dataclass
class LocalizationPath:
    """One trajectory: ys[j] is the state after j increments (ys[0] = 0)."""

    ys: np.ndarray
    zs: np.ndarray
    ws: np.ndarray


class RenormFamily:
    """The renormalized potentials ``V_tau`` of a (target, increment) pair.

    Gaussian/Gaussian pairs use closed forms; otherwise the family is
    one-dimensional and certified quadrature does the work, with the
    increment transform cached on a spline away from its domain edges.
    """

    def __init__(self, target: Potential, increment: Potential,
                 psi_mode: str = "spline", cert_tol: float = 1e-8,
                 drop: float = 60.0):
        if target.dim != increment.dim:
            raise ValueError("target and increment dimensions differ")
        self.target = target
        self.increment = increment
        self.dim = target.dim
        self.cert_tol = cert_tol
        self.drop = drop
        self.is_gaussian = (isinstance(target, GaussianPotential)
                            and isinstance(increment, GaussianPotential))
        if self.is_gaussian:
            d = self.dim
            self._Sinv = target.prec
            self._m = target.mean
            self._Sg = increment.cov
            self._mu = increment.mean
            self._cV = (0.5 * self._m @ self._Sinv @ self._m
                        + target.canonical_shift()
                        + (target.shift - target.canonical_shift()))
            # per-step constant of the increment transform
            self._c_psi = increment.canonical_shift() - increment.shift
        else:
            if self.dim != 1:
                raise NotImplementedError(
                    "generic renormalization is one-dimensional")
            # near a finite transform edge the tilted integrand decays at a
            # rate ~ distance-to-edge: allow very long (finite) ranges, and
            # accept the certificate plateau (~1e-8) such ranges hit
            self.psi_view = LltView(increment, cert_tol=max(cert_tol, 3e-8),
                                    drop=drop, range_cap=1e12)
            self._sampler = TiltedSampler(increment)
            self._psi_mode = psi_mode
            self._psi_spline = None
            self._edge_splines: dict = {}
        self._vcache: dict = {}

    # ------------------------------------------------------------------
    # increment transform, vectorized
    def _domain_clamped(self):
        """Transform domain shrunk by a relative 1e-6 at finite edges: the
        excluded strip holds ~1e-12 of any tilted mass, and staying off the
        edge keeps every transform quadrature range below ~1e8."""
        lo_d, hi_d = self.psi_view.domain_1d()
        if np.isfinite(lo_d):
            lo_d = lo_d + 1e-6 * max(1.0, abs(lo_d))
        if np.isfinite(hi_d):
            hi_d = hi_d - 1e-6 * max(1.0, abs(hi_d))
        return lo_d, hi_d

    def _build_psi_spline(self):
        """Interior spline of the increment transform plus, at any finite
        domain edge, a side spline in log(distance-to-edge).  Near such an
        edge the transform diverges like -log(distance) (linear tails), so
        the log coordinate renders it smooth."""
        lo_d, hi_d = self._domain_clamped()
        tlo, thi, _ = bracket_support(
            lambda x: -np.asarray(self.target.value(x)), drop=self.drop + 30.0)
        lo = max(tlo, lo_d) if np.isfinite(lo_d) else tlo
        hi = min(thi, hi_d) if np.isfinite(hi_d) else thi
        width = hi - lo
        self._edge_splines = {}
        in_lo, in_hi = lo, hi
        if np.isfinite(lo_d) and lo <= lo_d + 0.05 * width:
            band = 0.04 * width
            xi = np.linspace(np.log(1e-9 * max(1.0, abs(lo_d))),
                             np.log(2.0 * band), 96)
            vals = np.array([self.psi_view.value(float(lo_d + np.exp(t)))
                             for t in xi])
            self._edge_splines["lo"] = (lo_d, band, CubicSpline(xi, vals))
            in_lo = lo_d + band
        if np.isfinite(hi_d) and hi >= hi_d - 0.05 * width:
            band = 0.04 * width
            xi = np.linspace(np.log(1e-9 * max(1.0, abs(hi_d))),
                             np.log(2.0 * band), 96)
            vals = np.array([self.psi_view.value(float(hi_d - np.exp(t)))
                             for t in xi])
            self._edge_splines["hi"] = (hi_d, band, CubicSpline(xi, vals))
            in_hi = hi_d - band
        xs = np.linspace(in_lo, in_hi, 481)
        vals = np.array([self.psi_view.value(float(x)) for x in xs])
        self._psi_spline = CubicSpline(xs, vals)
        self._psi_knots = (xs[0], xs[-1])

    def psi(self, x) -> np.ndarray:
        """Increment transform on the clamped domain, +inf outside."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.is_gaussian:
            raise RuntimeError("use closed forms on the gaussian path")
        lo_d, hi_d = self._domain_clamped()
        out = np.full(x.shape, np.inf)
        inside = (x > lo_d) & (x < hi_d)
        if self._psi_mode == "exact":
            for i in np.nonzero(inside)[0]:
                out[i] = self.psi_view.value(float(x[i]))
            return out
        if self._psi_spline is None:
            self._build_psi_spline()
        k_lo, k_hi = self._psi_knots
        done = ~inside
        if "lo" in self._edge_splines:
            edge, band, sp = self._edge_splines["lo"]
            sel = inside & (x < edge + band)
            out[sel] = sp(np.log(np.maximum(x[sel] - edge, 1e-300)))
            done |= sel
        if "hi" in self._edge_splines:
            edge, band, sp = self._edge_splines["hi"]
            sel = inside & ~done & (x > edge - band)
            out[sel] = sp(np.log(np.maximum(edge - x[sel], 1e-300)))
            done |= sel
        on_spline = ~done & (x >= k_lo) & (x <= k_hi)
        out[on_spline] = self._psi_spline(x[on_spline])
        hard = ~done & ~on_spline
        for i in np.nonzero(hard)[0]:
            out[i] = self.psi_view.value(float(x[i]))
        return out

    # ------------------------------------------------------------------
    # gaussian closed forms
    def _gauss_pieces(self, tau: int):
        P = self._Sinv + tau * self._Sg
        Pinv = np.linalg.inv(P)
        b = self._Sinv @ self._m - tau * self._mu
        c = self._cV + tau * self._c_psi
        sign, logdet = np.linalg.slogdet(P)
        return P, Pinv, b, c, logdet

    def tilted_mean_cov(self, tau: int, a):
        """Mean and covariance of pi_tau^a (gaussian pairs)."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        _, Pinv, b, _, _ = self._gauss_pieces(tau)
        return Pinv @ (b + a), Pinv

    # ------------------------------------------------------------------
    # generic quadrature
    def _tilt_integral(self, tau: int, a: float) -> LogIntegral1D:
        V = self.target

        def logf(x):
            out = a * x - np.asarray(V.value(x))
            if tau:  # avoid 0 * inf outside the transform domain
                out = out - tau * self.psi(x)
            return out

        breaks = tuple(V.kinks_1d())
        if tau and abs(a) > 1e3:
            # a huge tilt piles the mass onto the clamped transform edge in a
            # strip of width ~1/|a|; geometric panel breaks resolve it
            lo_d, hi_d = self._domain_clamped()
            edge = hi_d if a > 0 else lo_d
            if np.isfinite(edge):
                scale = max(1.0, abs(edge))
                gs = edge - np.sign(a) * np.geomspace(1e-7 * scale,
                                                      0.5 * scale, 25)
                breaks = breaks + tuple(gs)
        return log_integral_1d(logf, breaks=breaks,
                               cert_tol=self.cert_tol, drop=self.drop)

    def value(self, tau: int, a) -> float:
        """The renormalizer V_tau(a)."""
        if self.is_gaussian:
            a = np.atleast_1d(np.asarray(a, dtype=float))
            d = self.dim
            _, Pinv, b, c, logdet = self._gauss_pieces(tau)
            return float(c - 0.5 * (b + a) @ Pinv @ (b + a)
                         + 0.5 * logdet - 0.5 * d * np.log(2.0 * np.pi))
        return -self._tilt_integral(tau, float(np.squeeze(a))).value

    def grad(self, tau: int, a) -> np.ndarray:
        """= minus the mean of pi_tau^a."""
        if self.is_gaussian:
            mean, _ = self.tilted_mean_cov(tau, a)
            return -mean
        m, _, _ = self._tilt_integral(tau, float(np.squeeze(a))).moments()
        return np.array([-m])

    def hess(self, tau: int, a) -> np.ndarray:
        """= minus the covariance of pi_tau^a."""
        if self.is_gaussian:
            _, cov = self.tilted_mean_cov(tau, a)
            return -cov
        _, v, _ = self._tilt_integral(tau, float(np.squeeze(a))).moments()
        return np.array([[-v]])

    def tilted_log_density(self, tau: int, a, xs) -> np.ndarray:
        """log pi_tau^a at xs (normalized via V_tau)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if self.is_gaussian:
            mean, cov = self.tilted_mean_cov(tau, a)
            d = self.dim
            diff = np.atleast_2d(xs.reshape(-1, d)) - mean
            Pm = np.linalg.inv(cov)
            sign, logdet = np.linalg.slogdet(cov)
            return (-0.5 * np.einsum("ni,ij,nj->n", diff, Pm, diff)
                    - 0.5 * (d * np.log(2.0 * np.pi) + logdet))
        a = float(np.squeeze(a))
        vt = self.value(tau, a)
        return (a * xs - np.asarray(self.target.value(xs))
                - tau * self.psi(xs) + vt)

    # ------------------------------------------------------------------
    # sampling
    def sample_tilted_target(self, tau: int, a, rng: np.random.Generator,
                             size: int | None = None):
        """z ~ pi_tau^a."""
        if self.is_gaussian:
            mean, cov = self.tilted_mean_cov(tau, a)
            L = np.linalg.cholesky(cov)
            n = 1 if size is None else int(size)
            z = mean + rng.standard_normal((n, self.dim)) @ L.T
            return z[0] if size is None else z
        res = self._tilt_integral(tau, float(np.squeeze(a)))
        dens = res.probabilities() / np.gradient(res.nodes)
        n = 1 if size is None else int(size)
        draws = sample_piecewise_linear(res.nodes, dens, rng.random(n))
        if size is None:
            return np.array([draws[0]])
        return draws[:, None]

    def sample_increment(self, z, rng: np.random.Generator,
                         size: int | None = None):
        """w from the z-tilted increment density."""
        if self.is_gaussian:
            z = np.atleast_1d(np.asarray(z, dtype=float))
            mean = self._mu + self._Sg @ z
            L = np.linalg.cholesky(self._Sg)
            n = 1 if size is None else int(size)
            w = mean + rng.standard_normal((n, self.dim)) @ L.T
            return w[0] if size is None else w
        w = self._sampler.sample(float(np.squeeze(z)), rng, size=size)
        if size is None:
            return np.array([w])
        return np.asarray(w)[:, None]

    def marginal_gaussian(self, tau: int):
        """Exact law of y_tau for gaussian pairs: mean and covariance."""
        if not self.is_gaussian:
            raise RuntimeError("closed-form marginal needs the gaussian path")
        S = np.linalg.inv(self._Sinv)
        mean = tau * (self._mu + self._Sg @ self._m)
        cov = tau * self._Sg + tau * tau * self._Sg @ S @ self._Sg
        return mean, cov


# ---------------------------------------------------------------------------
# trajectory runners


def localize_run(family: RenormFamily, steps: int,
                 rng: np.random.Generator) -> LocalizationPath:
    """Forward route: alternate tilted-target and increment draws."""
    d = family.dim
    ys = np.zeros((steps + 1, d))
    zs = np.zeros((steps, d))
    ws = np.zeros((steps, d))
    y = np.zeros(d)
    for tau in range(steps):
        z = np.atleast_1d(family.sample_tilted_target(tau, y, rng))
        w = np.atleast_1d(family.sample_increment(z, rng))
        y = y + w
        zs[tau], ws[tau], ys[tau + 1] = z, w, y
    return LocalizationPath(ys, zs, ws)


def direct_run(family: RenormFamily, steps: int,
               rng: np.random.Generator) -> tuple[np.ndarray, LocalizationPath]:
    """Equivalent route: one target draw, then iid tilted increments."""
    x = np.atleast_1d(family.sample_tilted_target(0, np.zeros(family.dim), rng))
    ws = np.atleast_2d(family.sample_increment(x, rng, size=steps))
    ys = np.concatenate([np.zeros((1, family.dim)), np.cumsum(ws, axis=0)])
    return x, LocalizationPath(ys, np.tile(x, (steps, 1)), ws)


def _generic_grids(family: RenormFamily, steps: int, n_nodes: int = 4097):
    """Per-tau x-grids and base log-weights for the batched generic route."""
    V = family.target
    lo_d, hi_d = family._domain_clamped()
    grids = []
    for tau in range(steps):
        def logf(x, tau=tau):
            out = -np.asarray(V.value(x))
            if tau:
                out = out - tau * family.psi(x)
            return out

        lo, hi, _ = bracket_support(logf, drop=family.drop)
        xs = np.linspace(lo, hi, n_nodes)
        if np.isfinite(lo_d) and lo <= lo_d + 1e-9:
            xs = np.union1d(xs, lo_d + np.geomspace(1e-9, (hi - lo) / 8, 48))
        if np.isfinite(hi_d) and hi >= hi_d - 1e-9:
            xs = np.union1d(xs, hi_d - np.geomspace(1e-9, (hi - lo) / 8, 48))
        xs = xs[(xs > lo_d) & (xs < hi_d)]
        grids.append((xs, logf(xs)))
    return grids


def localize_final_batch(family: RenormFamily, steps: int,
                         rng: np.random.Generator, n: int,
                         chunk: int = 2048) -> np.ndarray:
    """Final y_steps for n independent forward chains (vectorized).

    Gaussian pairs are exact.  The generic one-dimensional path draws the
    tilted-target coordinate from per-step node tables (resolution is the
    table spacing) and requires a gaussian increment so the w-step stays
    exact; it exists to make large-n two-route comparisons affordable.
    """
    d = family.dim
    if family.is_gaussian:
        y = np.zeros((n, d))
        for tau in range(steps):
            _, Pinv, b, _, _ = family._gauss_pieces(tau)
            L = np.linalg.cholesky(Pinv)
            z = (b + y) @ Pinv.T + rng.standard_normal((n, d)) @ L.T
            Lg = np.linalg.cholesky(family._Sg)
            w = family._mu + z @ family._Sg.T + rng.standard_normal((n, d)) @ Lg.T
            y = y + w
        return y
    if not isinstance(family.increment, GaussianPotential):
        raise NotImplementedError(
            "batched generic route needs a gaussian increment")
    mu = float(family.increment.mean[0])
    sg = float(np.sqrt(family.increment.cov[0, 0]))
    grids = _generic_grids(family, steps)
    y = np.zeros(n)
    for tau in range(steps):
        xs, base = grids[tau]
        z = np.empty(n)
        for s in range(0, n, chunk):
            ye = y[s:s + chunk]
            logits = np.outer(ye, xs) + base
            logits -= logits.max(axis=1, keepdims=True)
            dens = np.exp(logits)
            z[s:s + chunk] = sample_rows_piecewise_linear(
                xs, dens, rng.random(len(ye)))
        w = mu + sg * sg * z + sg * rng.standard_normal(n)
        y = y + w
    return y


def direct_final_batch(family: RenormFamily, steps: int,
                       rng: np.random.Generator, n: int) -> np.ndarray:
    """Final y_steps for n chains of the one-draw direct route."""
    d = family.dim
    if family.is_gaussian:
        m, S = family._m, np.linalg.inv(family._Sinv)
        L = np.linalg.cholesky(S)
        x = m + rng.standard_normal((n, d)) @ L.T
        Lg = np.linalg.cholesky(family._Sg)
        mean = steps * (family._mu + x @ family._Sg.T)
        return mean + np.sqrt(steps) * rng.standard_normal((n, d)) @ Lg.T
    if not isinstance(family.increment, GaussianPotential):
        raise NotImplementedError(
            "batched generic route needs a gaussian increment")
    res = family._tilt_integral(0, 0.0)
    dens = res.probabilities() / np.gradient(res.nodes)
    x = sample_piecewise_linear(res.nodes, dens, rng.random(n))
    mu = float(family.increment.mean[0])
    sg = float(np.sqrt(family.increment.cov[0, 0]))
    mean = steps * (mu + sg * sg * x)
    return mean + np.sqrt(steps) * sg * rng.standard_normal(n)


# ---------------------------------------------------------------------------
# structural identities


def increment_log_density(family: RenormFamily, tau: int, y, ws) -> np.ndarray:
    """Closed form of the y-increment law at time tau:
    log nu(w) = -phi(w) - V_{tau+1}(y + w) + V_tau(y)."""
    ws = np.atleast_1d(np.asarray(ws, dtype=float))
    phi = family.increment
    v_now = family.value(tau, y)
    if family.is_gaussian:
        vn = np.array([family.value(tau + 1, np.atleast_1d(y) + np.atleast_1d(w))
                       for w in ws])
    else:
        vn = np.array([family.value(tau + 1, float(y) + float(w)) for w in ws])
    return -np.asarray(phi.value(ws)) - vn + v_now


def increment_mixture_log_density(family: RenormFamily, tau: int, y,
                                  ws) -> np.ndarray:
    """The same law from its defining mixture,
    nu(w) = int pi_tau^y(x) exp(<x,w> - phi(w) - psi(x)) dx,
    evaluated by quadrature -- the independent route used to test the
    closed form above (one-dimensional)."""
    if family.is_gaussian or family.dim != 1:
        raise NotImplementedError("mixture route is for the 1-D generic path")
    ws = np.atleast_1d(np.asarray(ws, dtype=float))
    y = float(np.squeeze(y))
    res = family._tilt_integral(tau, y)
    xs = res.nodes
    log_pi = (np.log(res.probabilities() + 1e-320))
    psi_x = family.psi(xs)
    phi_w = np.asarray(family.increment.value(ws))
    out = np.empty(ws.shape)
    for i, w in enumerate(ws):
        out[i] = logsumexp(log_pi + xs * w - psi_x) - phi_w[i]
    return out


def _long_tail_nodes(lo: float, hi: float, core: float, breaks=(),
                     panels_core: int = 32, panels_tail: int = 16,
                     order: int = 8):
    """Composite nodes for integrands with a resolved core and slowly
    decaying (possibly polynomial) tails: uniform panels on the core,
    log-spaced panels beyond it."""
    clo, chi = max(lo, -core), min(hi, core)
    brk = tuple(b for b in breaks if clo < b < chi)
    parts = [panel_nodes(clo, chi, panels_core, order, breaks=brk)]
    if hi > core:
        n, w = panel_nodes(np.log(core), np.log(hi), panels_tail, order)
        parts.append((np.exp(n), w * np.exp(n)))
    if lo < -core:
        n, w = panel_nodes(np.log(core), np.log(-lo), panels_tail, order)
        parts.append((-np.exp(n), w * np.exp(n)))
    nodes = np.concatenate([p[0] for p in parts])
    wts = np.concatenate([p[1] for p in parts])
    order_ = np.argsort(nodes)
    return nodes[order_], wts[order_]


def martingale_check(family: RenormFamily, tau: int, y, xs) -> dict:
    """E_{w ~ nu} [pi_{tau+1}^{y+w}(x)] against pi_tau^y(x), with the
    increment law taken from its defining mixture (nested quadrature, no
    algebraic cancellation of the renormalizers)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    y = float(np.squeeze(y))

    # support of the increment law around its mean
    def log_nu(w):
        return increment_mixture_log_density(family, tau, y, w)

    lo, hi, _ = bracket_support(lambda w: log_nu(w), drop=45.0,
                                scan_radius=max(8.0, 4.0 + abs(y)),
                                range_cap=1e9)
    core = min(12.0 + abs(y), max(-lo, hi))
    nodes, wts = _long_tail_nodes(lo, hi, core,
                                  breaks=family.increment.kinks_1d())
    ln = log_nu(nodes)
    # renormalizers of the next level, each its own quadrature
    v_next = np.array([family.value(tau + 1, y + w) for w in nodes])
    lhs = np.empty(xs.shape)
    Vx = np.asarray(family.target.value(xs))
    psi_x = family.psi(xs)
    for i, x in enumerate(xs):
        log_pi_next = ((y + nodes) * x - Vx[i] - (tau + 1) * psi_x[i] + v_next)
        lhs[i] = np.dot(wts, np.exp(ln + log_pi_next))
    rhs = np.exp(family.tilted_log_density(tau, y, xs))
    rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
    return {"lhs": lhs, "rhs": rhs, "max_rel_err": float(rel.max()),
            "mass_of_nu": float(np.dot(wts, np.exp(ln)))}


def marginal_martingale_check(family: RenormFamily, taus, xs,
                              conv: SelfConvolution | None = None,
                              drop: float = 75.0) -> dict:
    """Pointwise mean density E[pi_tau](x) against the target density pi(x).

    Mixing the conditional law pi_tau^y over the y-marginal
    q_tau(y) exp(-V_tau(y) + V_0(0)) cancels the renormalizers identically,
    leaving

        E[pi_tau](x) = exp(V_0(0) - V(x) - tau psi(x)) int e^{x y} q_tau(y) dy

    with q_tau the tau-fold self-convolution of the increment density.  The
    surviving numerical content -- the convolution table's exponential moment
    against exp(tau psi) -- comes from two independent machineries (iterated
    numerical convolution vs certified transform quadrature), so agreement is
    an actual check, not an identity.  Returns the max absolute deviation in
    density units over all requested tau.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    phi = family.increment
    if conv is None:
        lo0, hi0, _ = bracket_support(lambda w: -np.asarray(phi.value(w)),
                                      drop=drop)
        conv = SelfConvolution(lambda w: -np.asarray(phi.value(w)), (lo0, hi0),
                               kinks=phi.kinks_1d())
    if family.is_gaussian:
        mu = float(family._mu[0])
        sg2 = float(family._Sg[0, 0])
        psi_x = mu * xs + 0.5 * sg2 * xs * xs + float(family._c_psi)
    else:
        psi_x = family.psi(xs)
    v00 = family.value(0, np.zeros(family.dim))
    log_pi = v00 - np.asarray(family.target.value(xs))
    worst, per_tau = 0.0, {}
    for tau in taus:
        if tau == 0:
            per_tau[0] = 0.0
            continue
        tab = conv.level(tau)
        brk = [k for k in set(tab.kinks) | {0.0} if tab.lo < k < tab.hi]
        nodes, wts = panel_nodes(tab.lo, tab.hi, 48, 12, breaks=brk)
        logq = tab.logpdf(nodes)
        lhs = np.empty(xs.shape)
        for i, x in enumerate(xs):
            lf = x * nodes + logq
            m = lf.max()
            log_mgf = m + np.log(np.dot(wts, np.exp(lf - m)))
            lhs[i] = np.exp(log_pi[i] - tau * psi_x[i] + log_mgf)
        dev = float(np.max(np.abs(lhs - np.exp(log_pi))))
        per_tau[int(tau)] = dev
        worst = max(worst, dev)
    return {"max_abs_dev": worst, "per_tau": per_tau}


def _value_table(family: RenormFamily, tau: int, lo: float, hi: float,
                 n: int = 641):
    """Spline of a -> V_tau(a) over [lo, hi] (n certified quadratures)."""
    grid = np.linspace(lo, hi, n)
    vals = np.array([family.value(tau, float(g)) for g in grid])
    return CubicSpline(grid, vals)


def semigroup_apply(family: RenormFamily, tau: int, lam: int, f, a,
                    conv: SelfConvolution | None = None,
                    v_lam=None) -> float:
    """(P_{tau,lam} f)(a) = e^{V_tau(a)} int f(a+w) e^{-V_lam(a+w)}
    q_{lam-tau}(w) dw with q_j the j-fold increment self-convolution.
    ``v_lam`` optionally supplies a precomputed V_lam evaluator."""
    if lam < tau:
        raise ValueError("need lam >= tau")
    if lam == tau:
        return float(np.asarray(f(np.asarray([a])))[0])
    j = lam - tau
    phi = family.increment
    if conv is None:
        lo0, hi0, _ = bracket_support(lambda w: -np.asarray(phi.value(w)),
                                      drop=60.0)
        conv = SelfConvolution(lambda w: -np.asarray(phi.value(w)), (lo0, hi0),
                               kinks=phi.kinks_1d())
    tab = conv.level(j)
    nodes, wts = panel_nodes(tab.lo, tab.hi, 48, 10,
                             breaks=[k for k in tab.kinks
                                     if tab.lo < k < tab.hi])
    if v_lam is None:
        vl = np.array([family.value(lam, float(a) + w) for w in nodes])
    else:
        vl = np.asarray(v_lam(float(a) + nodes))
    integrand = (np.asarray(f(float(a) + nodes))
                 * np.exp(-vl + tab.logpdf(nodes)))
    return float(np.exp(family.value(tau, a)) * np.dot(wts, integrand))


def semigroup_composition_check(family: RenormFamily, f, a,
                                taus=(0, 1, 2)) -> dict:
    """P_{t0,t2} f == P_{t0,t1} (P_{t1,t2} f) at the probe point a.

    The nested side evaluates the inner operator at every outer node, so the
    per-level renormalizers are tabulated on splines over the reachable
    range first."""
    t0, t1, t2 = taus
    phi = family.increment
    lo0, hi0, _ = bracket_support(lambda w: -np.asarray(phi.value(w)), drop=60.0)
    conv = SelfConvolution(lambda w: -np.asarray(phi.value(w)), (lo0, hi0),
                           kinks=phi.kinks_1d())
    reach_lo = float(a) + (t2 - t0) * min(lo0, 0.0) - 1.0
    reach_hi = float(a) + (t2 - t0) * max(hi0, 0.0) + 1.0
    v2 = _value_table(family, t2, reach_lo, reach_hi)
    v1 = _value_table(family, t1, reach_lo, reach_hi, n=321)
    direct = semigroup_apply(family, t0, t2, f, a, conv=conv, v_lam=v2)

    tab_inner = conv.level(t2 - t1)
    in_nodes, in_wts = panel_nodes(tab_inner.lo, tab_inner.hi, 48, 10)
    lq_inner = tab_inner.logpdf(in_nodes)

    def g(avals):
        avals = np.atleast_1d(avals)
        out = np.empty(avals.shape)
        for i, av in enumerate(avals):
            integrand = (np.asarray(f(av + in_nodes))
                         * np.exp(-v2(av + in_nodes) + lq_inner))
            out[i] = np.exp(v1(av)) * np.dot(in_wts, integrand)
        return out

    nested = semigroup_apply(family, t0, t1, g, a, conv=conv, v_lam=v1)
    return {"direct": direct, "nested": nested,
            "rel_gap": abs(direct - nested) / max(abs(direct), 1e-300)}
