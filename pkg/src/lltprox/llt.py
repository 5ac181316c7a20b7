"""Log-Laplace transforms of normalized densities and their tilted samplers.

For a potential ``phi`` the transform is
``psi(x) = log int exp(<x, y> - phi(y)) dy``: the cumulant generating
function of ``exp(-phi)``.  Its derivatives are the mean, covariance and
third central moment of the exponentially tilted density
``T_x exp(-phi) = exp(<x, y> - phi(y) - psi(x))``, which is what
``TiltedSampler`` draws from.

Backends
--------
closed-form-gaussian    exact quadratic transform
quadrature-1d           certified Gauss-Legendre pass shared by value/grad/hess
separable-product       per-coordinate 1-D transforms
lq-radial               one-sided-stable scale mixture for a*||y||_q^2
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.special import logsumexp

from .convolution import SelfConvolution
from .potentials import (GaussianPotential, LqSquaredPotential, Potential,
                         SeparablePotential)
from .quadrature import (DivergentIntegralError, bracket_support,
                         log_integral_1d, panel_nodes, sample_piecewise_linear,
                         tensor_log_integral)
from .stable import one_sided_stable_logpdf


@dataclass
class Llt1DBundle:
    """One shared quadrature pass: transform value and tilted moments."""

    value: float
    grad: float
    hess: float
    third: float  # third central moment of the tilted density


# ---------------------------------------------------------------------------
# lq-radial machinery

_STABLE_SPLINES: dict = {}
_J_TABLES: dict = {}


def _stable_spline(s: float):
    """Spline of log g_s over a wide log-argument range, built once per s."""
    key = round(s, 12)
    if key not in _STABLE_SPLINES:
        u = np.geomspace(1e-12, 1e12, 961)
        lg = one_sided_stable_logpdf(s, u)
        ok = np.isfinite(lg)
        sp = CubicSpline(np.log(u[ok]), lg[ok])
        lo, hi = np.log(u[ok][0]), np.log(u[ok][-1])
        # beyond the right edge use the exact leading tail ~ t^{-1-s}
        _STABLE_SPLINES[key] = (sp, lo, hi, float(lg[ok][-1]))
    return _STABLE_SPLINES[key]


def _stable_logpdf_fast(s: float, logu: np.ndarray) -> np.ndarray:
    sp, lo, hi, edge = _stable_spline(s)
    logu = np.asarray(logu, dtype=float)
    out = np.full(logu.shape, -np.inf)
    mid = (logu >= lo) & (logu <= hi)
    out[mid] = sp(logu[mid])
    right = logu > hi
    out[right] = edge - (1.0 + s) * (logu[right] - hi)
    return out


class _JTable:
    """Splines of log J, mean and variance of ``exp(c w - |w|^q) dw`` in c.

    J(c) is even, the mean odd and the variance even, so tables are built on
    c >= 0 and reflected.  The range extends lazily.
    """

    def __init__(self, q: float):
        self.q = q
        self.cmax = 0.0
        self._build(8.0)

    def _direct(self, c: float):
        q = self.q
        wstar = (abs(c) / q) ** (1.0 / (q - 1.0)) * np.sign(c) if c else 0.0

        def expo(w):
            return c * w - np.abs(w) ** q

        peak = expo(wstar)

        def edge(sign: float) -> float:
            h, x = max(0.25, 0.05 * abs(wstar)), wstar
            while expo(x + sign * h) > peak - 60.0:
                x += sign * h
                h *= 1.7
            return x + sign * h

        lo, hi = edge(-1.0), edge(+1.0)
        brk = (0.0,) if lo < 0.0 < hi else ()
        n, w = panel_nodes(lo, hi, 24, 12, breaks=brk)
        lf = expo(n)
        m = lf.max()
        p = w * np.exp(lf - m)
        z = p.sum()
        mean = float(np.dot(p, n) / z)
        var = max(float(np.dot(p, (n - mean) ** 2) / z), 1e-300)
        return m + np.log(z), mean, var

    def _build(self, cmax: float):
        grid = np.unique(np.concatenate([
            np.linspace(0.0, min(4.0, cmax), 257),
            np.geomspace(4.0, cmax, max(2, int(48 * np.log10(max(cmax / 4.0, 1.01)))))
            if cmax > 4.0 else np.array([]),
        ]))
        vals = np.array([self._direct(c) for c in grid])
        self._logj = CubicSpline(grid, vals[:, 0])
        self._mean = CubicSpline(grid, vals[:, 1])
        self._logvar = CubicSpline(grid, np.log(vals[:, 2]))
        self.cmax = cmax

    def _ensure(self, c: np.ndarray):
        m = float(np.max(np.abs(c))) if c.size else 0.0
        if m > self.cmax:
            self._build(2.0 * m)

    def log_j(self, c):
        c = np.asarray(c, dtype=float)
        self._ensure(c)
        return self._logj(np.abs(c))

    def mean(self, c):
        c = np.asarray(c, dtype=float)
        self._ensure(c)
        return np.sign(c) * self._mean(np.abs(c))

    def var(self, c):
        c = np.asarray(c, dtype=float)
        self._ensure(c)
        return np.exp(self._logvar(np.abs(c)))


def _j_table(q: float) -> _JTable:
    key = round(q, 12)
    if key not in _J_TABLES:
        _J_TABLES[key] = _JTable(q)
    return _J_TABLES[key]


class LqMixtureTransform:
    """Transform of ``a ||y||_q^2`` through a one-sided-stable scale mixture.

    ``exp(-a r^{2/q})`` (r the q-norm power sum) is completely monotone, so
    conditional on the mixing variable t the tilted integral factorizes into
    per-coordinate pieces ``J(x_i t^{-1/q})``.  The t-integral runs over an
    adaptive two-zone window in log t; all ingredient functions are cached
    splines, machine-checked against closed forms in the test-suite.
    """

    def __init__(self, pot: LqSquaredPotential, drop: float = 50.0):
        if pot.p >= 2.0:
            raise ValueError("the scale mixture needs p < 2 (q > 2)")
        self.pot = pot
        self.p, self.a, self.d = pot.p, pot.a, pot.dim
        self.q = pot.q
        self.s = 2.0 / self.q
        self.drop = drop
        self._jt = _j_table(self.q)
        self._center = np.log(self.a ** (1.0 / self.s))
        self._last: tuple | None = None  # one-slot posterior memo

    # -- the log-integrand of the mixture in log t --------------------------
    def _h(self, logt: np.ndarray, x: np.ndarray,
           exact: bool = False) -> np.ndarray:
        """Log-integrand in log t; ``exact`` switches the mixing density from
        its scan spline to direct evaluation (used at final nodes)."""
        logt = np.atleast_1d(np.asarray(logt, dtype=float))
        if exact:
            lg = (one_sided_stable_logpdf(self.s, np.exp(logt - self._center))
                  - self._center)
        else:
            lg = (_stable_logpdf_fast(self.s, logt - self._center)
                  - self._center)
        tot = lg + logt  # + logt accounts for dt = t dlogt
        ok = np.isfinite(lg)  # skip points the mixing density already kills
        if np.any(ok):
            lt = logt[ok]
            tinv = np.exp(-lt / self.q)
            sub = tot[ok]
            for xi in x:
                sub = sub - lt / self.q + self._jt.log_j(xi * tinv)
            tot[ok] = sub
        return tot

    def _window(self, x: np.ndarray):
        """Two-zone window (core, tails) of the mixture integrand."""
        hi_ext = self.drop / (self.s + self.d / self.q) * 1.2 + 12.0
        grid = self._center + np.arange(-35.0, hi_ext, 0.25)
        hv = self._h(grid, x)
        i = int(np.argmax(hv))
        res = min(0.25, (1.0 - self.s) / 4.0)
        if res < 0.25:
            fine = grid[i] + np.arange(-3.0, 3.0, res)
            fv = self._h(fine, x)
            j = int(np.argmax(fv))
            grid = np.sort(np.concatenate([grid, fine]))
            hv = self._h(grid, x)
            i = int(np.argmax(hv))
        hmax = hv[i]
        keep = np.where(hv > hmax - self.drop)[0]
        lo, hi = grid[keep[0]] - 0.25, grid[keep[-1]] + 0.25
        core = np.where(hv > hmax - 12.0)[0]
        clo, chi = grid[core[0]] - res, grid[core[-1]] + res
        return lo, clo, chi, hi

    def _nodes(self, x: np.ndarray):
        lo, clo, chi, hi = self._window(x)
        parts = []
        if lo < clo:
            parts.append(panel_nodes(lo, clo, 12, 16))
        parts.append(panel_nodes(clo, chi, 24, 16))
        if chi < hi:
            parts.append(panel_nodes(chi, hi, 12, 16))
        nodes = np.concatenate([p[0] for p in parts])
        wts = np.concatenate([p[1] for p in parts])
        return nodes, wts

    def _posterior(self, x: np.ndarray):
        key = np.asarray(x, dtype=float).tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1:]
        nodes, wts = self._nodes(x)
        lf = self._h(nodes, x, exact=True) + np.log(wts)
        val = float(logsumexp(lf))
        post = np.exp(lf - val)
        self._last = (key, val, nodes, post)
        return val, nodes, post

    # -- public surface -----------------------------------------------------
    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        val, _, _ = self._posterior(x)
        return val

    def value_batch(self, X: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Values on a batch sharing one t-window (sized for the batch range)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        corner = np.max(np.abs(X), axis=0)
        n0, w0 = self._nodes(np.zeros(self.d))
        n1, w1 = self._nodes(corner)
        lo = min(n0[0], n1[0])
        hi = max(n0[-1], n1[-1])
        nodes, wts = panel_nodes(lo, hi, 48, 16)
        base = (_stable_logpdf_fast(self.s, nodes - self._center)
                - self._center + nodes - self.d * nodes / self.q
                + np.log(wts))
        tinv = np.exp(-nodes / self.q)
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            xb = X[start:start + chunk]
            acc = np.broadcast_to(base, (xb.shape[0], base.size)).copy()
            for i in range(self.d):
                acc += self._jt.log_j(np.outer(xb[:, i], tinv))
            out[start:start + chunk] = logsumexp(acc, axis=1)
        return out

    def grad(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        _, nodes, post = self._posterior(x)
        tinv = np.exp(-nodes / self.q)
        g = np.empty(self.d)
        for i in range(self.d):
            m = self._jt.mean(x[i] * tinv) * tinv
            g[i] = float(np.dot(post, m))
        return g

    def hess(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        _, nodes, post = self._posterior(x)
        tinv = np.exp(-nodes / self.q)
        means = np.empty((self.d, nodes.size))
        second = np.empty((self.d, nodes.size))
        for i in range(self.d):
            c = x[i] * tinv
            mi = self._jt.mean(c) * tinv
            vi = self._jt.var(c) * tinv ** 2
            means[i] = mi
            second[i] = vi + mi * mi
        mu = means @ post
        H = np.einsum("it,jt,t->ij", means, means, post)
        H[np.diag_indices(self.d)] = second @ post
        return H - np.outer(mu, mu)

    def sample(self, x, rng: np.random.Generator, size: int | None = None,
               n_grid: int = 2048) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = 1 if size is None else int(size)
        _, nodes, post = self._posterior(x)
        idx = rng.choice(nodes.size, size=n, p=post / post.sum())
        tinv = np.exp(-nodes / self.q)
        out = np.empty((n, self.d))
        for k in range(n):
            ti = tinv[idx[k]]
            for i in range(self.d):
                c = x[i] * ti
                wstar = np.sign(c) * (abs(c) / self.q) ** (1.0 / (self.q - 1.0)) if c else 0.0
                R = max(3.0, 2.0 * abs(wstar) + 3.0)
                while ((c * (wstar + R) - abs(wstar + R) ** self.q)
                       > (c * wstar - abs(wstar) ** self.q) - 45.0
                       or (c * (wstar - R) - abs(wstar - R) ** self.q)
                       > (c * wstar - abs(wstar) ** self.q) - 45.0):
                    R *= 1.6
                ws = np.linspace(wstar - R, wstar + R, n_grid)
                lf = c * ws - np.abs(ws) ** self.q
                dens = np.exp(lf - lf.max())
                w = sample_piecewise_linear(ws, dens, rng.random(1))[0]
                out[k, i] = w * ti
        return out[0] if size is None else out


# ---------------------------------------------------------------------------
# the view


class LltView:
    """Evaluates psi and its derivatives with a structure-matched backend."""

    def __init__(self, phi: Potential, backend: str | None = None,
                 cert_tol: float = 1e-9, drop: float = 60.0,
                 range_cap: float = 1e7):
        self.phi = phi
        self.cert_tol = cert_tol
        self.drop = drop
        self.range_cap = range_cap
        if backend is None:
            if isinstance(phi, GaussianPotential):
                backend = "closed-form-gaussian"
            elif isinstance(phi, SeparablePotential):
                backend = "separable-product"
            elif isinstance(phi, LqSquaredPotential):
                backend = "lq-radial" if phi.p < 2.0 else "closed-form-gaussian"
            elif phi.dim == 1:
                backend = "quadrature-1d"
            else:
                raise ValueError("no backend matches this potential structure")
        self.backend = backend
        if backend == "closed-form-gaussian":
            if isinstance(phi, LqSquaredPotential):
                # a ||y||_2^2 is the Gaussian with covariance I/(2a)
                d = phi.dim
                self._g = GaussianPotential(np.zeros(d), np.eye(d) / (2.0 * phi.a),
                                            shift=phi.shift)
            else:
                self._g = phi
        elif backend == "separable-product":
            self._views = [LltView(c, cert_tol=cert_tol, drop=drop)
                           for c in phi.components]
        elif backend == "lq-radial":
            self._mix = LqMixtureTransform(phi)
        elif backend != "quadrature-1d":
            raise ValueError(f"unknown backend {backend!r}")

    # -- 1-D helpers --------------------------------------------------------
    def domain_1d(self):
        left, right = self.phi.tail_slopes()
        return -left, right

    def _check_tilt(self, x: float):
        lo, hi = self.domain_1d()
        if not lo < x < hi:
            raise DivergentIntegralError(
                f"tilt {x} outside the transform domain ({lo}, {hi})")

    def _quad(self, x: float):
        self._check_tilt(x)
        pot = self.phi
        return log_integral_1d(
            lambda y: x * y - np.asarray(pot.value(y)),
            breaks=pot.kinks_1d(), cert_tol=self.cert_tol, drop=self.drop,
            range_cap=self.range_cap)

    def bundle_1d(self, x: float) -> Llt1DBundle:
        """Value, gradient, Hessian and third tilted moment from one pass."""
        if self.backend == "closed-form-gaussian":
            g = self._g
            mu, var = g.mean[0], g.cov[0, 0]
            c0 = g.canonical_shift() - g.shift
            return Llt1DBundle(x * mu + 0.5 * var * x * x + c0,
                               mu + var * x, var, 0.0)
        if self.backend == "quadrature-1d":
            res = self._quad(x)
            m, v, t = res.moments()
            return Llt1DBundle(res.value, m, v, t)
        if self.backend == "lq-radial" and self.phi.dim == 1:
            val = self._mix.value([x])
            gr = self._mix.grad([x])[0]
            he = self._mix.hess([x])[0, 0]
            return Llt1DBundle(val, gr, he, np.nan)
        raise ValueError("bundle_1d needs a one-dimensional backend")

    # -- generic surface ----------------------------------------------------
    def value(self, x) -> float:
        if self.backend == "closed-form-gaussian":
            g = self._g
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return float(x @ g.mean + 0.5 * x @ g.cov @ x
                         + g.canonical_shift() - g.shift)
        if self.backend == "separable-product":
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return float(sum(v.value(xi) for v, xi in zip(self._views, x)))
        if self.backend == "lq-radial":
            return float(self._mix.value(x))
        return self._quad(float(np.squeeze(x))).value

    def grad(self, x) -> np.ndarray:
        if self.backend == "closed-form-gaussian":
            g = self._g
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return g.mean + g.cov @ x
        if self.backend == "separable-product":
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.array([v.grad(xi)[0] for v, xi in zip(self._views, x)])
        if self.backend == "lq-radial":
            return self._mix.grad(x)
        res = self._quad(float(np.squeeze(x)))
        return np.array([res.moments()[0]])

    def hess(self, x) -> np.ndarray:
        if self.backend == "closed-form-gaussian":
            return self._g.cov.copy()
        if self.backend == "separable-product":
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.diag([v.hess(xi)[0, 0] for v, xi in zip(self._views, x)])
        if self.backend == "lq-radial":
            return self._mix.hess(x)
        res = self._quad(float(np.squeeze(x)))
        return np.array([[res.moments()[1]]])

    def value_batch(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized values; adaptive per point except for the closed form."""
        if self.backend == "closed-form-gaussian":
            g = self._g
            X = np.atleast_2d(np.asarray(xs, dtype=float).reshape(len(xs), -1))
            return (X @ g.mean + 0.5 * np.einsum("ni,ij,nj->n", X, g.cov, X)
                    + g.canonical_shift() - g.shift)
        if self.backend == "lq-radial":
            return self._mix.value_batch(np.atleast_2d(xs))
        return np.array([self.value(x) for x in np.atleast_1d(xs)])


# ---------------------------------------------------------------------------
# tilted samplers


class InverseCdfTable1D:
    """Monotone-cubic inverse-CDF table for ``exp(<x,y> - phi(y))`` in 1-D,
    refined until the reconstructed CDF residual is below tolerance."""

    def __init__(self, logf, breaks=(), n_nodes: int = 4097,
                 residual_tol: float = 1e-10, max_nodes: int = 2 ** 16 + 1):
        lo, hi, _ = bracket_support(logf, drop=46.0)
        self.lo, self.hi = lo, hi
        n = n_nodes
        while True:
            xs = np.unique(np.concatenate(
                [np.linspace(lo, hi, n),
                 np.asarray([b for b in breaks if lo < b < hi])]))
            cdf, dens = self._cdf_nodes(logf, xs)
            resid = self._residual(logf, xs, cdf)
            if resid <= residual_tol or n >= max_nodes:
                break
            n = 2 * n - 1
        self.nodes = xs
        self.cdf = cdf
        self.density = dens
        self.residual = resid
        keep = np.concatenate([[True], np.diff(cdf) > 0.0])
        self._inv = PchipInterpolator(cdf[keep], xs[keep])

    @staticmethod
    def _cdf_nodes(logf, xs):
        gl_x, gl_w = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (xs[:-1] + xs[1:])
        half = 0.5 * np.diff(xs)
        pts = mid[:, None] + half[:, None] * gl_x[None, :]
        lf = np.asarray(logf(pts.ravel())).reshape(pts.shape)
        m = lf.max()
        seg = (half[:, None] * gl_w[None, :] * np.exp(lf - m)).sum(axis=1)
        cdf = np.concatenate([[0.0], np.cumsum(seg)])
        total = cdf[-1]
        dens = np.exp(np.asarray(logf(xs)) - m) / total
        return cdf / total, dens

    def _residual(self, logf, xs, cdf):
        # evaluate the interpolated inverse at fresh uniforms and compare the
        # true CDF there against u
        u = np.linspace(0.02, 0.98, 193)
        keep = np.concatenate([[True], np.diff(cdf) > 0.0])
        inv = PchipInterpolator(cdf[keep], xs[keep])
        y = inv(u)
        idx = np.clip(np.searchsorted(xs, y) - 1, 0, len(xs) - 2)
        gl_x, gl_w = np.polynomial.legendre.leggauss(16)
        a = xs[idx]
        mid = 0.5 * (a + y)
        half = 0.5 * (y - a)
        pts = mid[:, None] + half[:, None] * gl_x[None, :]
        lf = np.asarray(logf(pts.ravel())).reshape(pts.shape)
        m = lf.max()
        part = (half[:, None] * gl_w[None, :] * np.exp(lf - m)).sum(axis=1)
        # renormalize by the total mass in the same units
        mid_all = 0.5 * (xs[:-1] + xs[1:])
        half_all = 0.5 * np.diff(xs)
        pts_all = mid_all[:, None] + half_all[:, None] * gl_x[None, :]
        lf_all = np.asarray(logf(pts_all.ravel())).reshape(pts_all.shape)
        seg_all = (half_all[:, None] * gl_w[None, :] * np.exp(lf_all - m)).sum(axis=1)
        cdf_all = np.concatenate([[0.0], np.cumsum(seg_all)])
        total = cdf_all[-1]
        true_u = (cdf_all[idx] + part) / total
        return float(np.max(np.abs(true_u - u)))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self._inv(rng.random(size)))


class TiltedSampler:
    """Draws from the tilted density ``T_x exp(-phi)``."""

    def __init__(self, phi: Potential, backend: str | None = None,
                 residual_tol: float = 1e-10):
        self.phi = phi
        self.residual_tol = residual_tol
        if backend is None:
            if isinstance(phi, GaussianPotential):
                backend = "exact-gaussian"
            elif isinstance(phi, SeparablePotential):
                backend = "per-coordinate-product"
            elif isinstance(phi, LqSquaredPotential) and phi.p < 2.0:
                backend = "radial-mixture"
            elif phi.dim == 1:
                backend = "inverse-cdf-1d"
            else:
                raise ValueError("no sampler backend matches this potential")
        self.backend = backend
        self.last_residual = 0.0
        if backend == "radial-mixture":
            self._mix = LqMixtureTransform(phi)

    def sample(self, x, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else int(size)
        if self.backend == "exact-gaussian":
            g = self.phi
            mean = g.mean + g.cov @ np.atleast_1d(np.asarray(x, dtype=float))
            z = rng.standard_normal((n, g.dim))
            out = mean + z @ g._chol.T
        elif self.backend == "per-coordinate-product":
            x = np.atleast_1d(np.asarray(x, dtype=float))
            cols = []
            resid = 0.0
            for c, xi in zip(self.phi.components, x):
                tab = InverseCdfTable1D(
                    lambda y, c=c, xi=xi: xi * y - np.asarray(c.value(y)),
                    breaks=c.kinks_1d(), residual_tol=self.residual_tol)
                resid = max(resid, tab.residual)
                cols.append(tab.draw(rng, n))
            self.last_residual = resid
            out = np.stack(cols, axis=-1)
        elif self.backend == "radial-mixture":
            out = np.atleast_2d(self._mix.sample(x, rng, size=n))
        else:
            xi = float(np.squeeze(x))
            view = LltView(self.phi)
            view._check_tilt(xi)
            pot = self.phi
            tab = InverseCdfTable1D(
                lambda y: xi * y - np.asarray(pot.value(y)),
                breaks=pot.kinks_1d(), residual_tol=self.residual_tol)
            self.last_residual = tab.residual
            out = tab.draw(rng, n)[:, None]
        if size is None:
            return out[0] if self.phi.dim > 1 else float(out[0, 0])
        return out if self.phi.dim > 1 else out[:, 0]


# ---------------------------------------------------------------------------
# module-level operations


def llt_value(phi: Potential, x, backend: str | None = None) -> float:
    return LltView(phi, backend).value(x)


def llt_grad(phi: Potential, x, backend: str | None = None) -> np.ndarray:
    return LltView(phi, backend).grad(x)


def llt_hess(phi: Potential, x, backend: str | None = None) -> np.ndarray:
    return LltView(phi, backend).hess(x)


def llt_bundle_1d(phi: Potential, x: float) -> Llt1DBundle:
    return LltView(phi).bundle_1d(x)


def sample_tilted(phi: Potential, x, rng: np.random.Generator,
                  size: int | None = None, backend: str | None = None):
    return TiltedSampler(phi, backend).sample(x, rng, size=size)


def lq_llt_value(p: float, a: float, dim: int, x) -> float:
    """Transform of a*||.||_q^2 via the scale mixture (q conjugate to p)."""
    return LqMixtureTransform(LqSquaredPotential(p, a, dim)).value(x)


def convolved_llt_check(phi: Potential, tau: int, xs,
                        conv: SelfConvolution | None = None) -> dict:
    """Compare the transform of the tau-fold convolved potential against
    tau * psi pointwise.  The left side integrates the explicitly convolved
    density 'the slow way'; agreement is the additivity of transforms under
    independent sums."""
    if phi.dim != 1:
        raise ValueError("the convolution route is one-dimensional")
    view = LltView(phi)
    if conv is None:
        def neg(y):
            return -np.asarray(phi.value(y))

        # the table has to cover wherever any probe's tilted integrand
        # lives, not just the untilted support; the widening is capped so
        # per-node quadrature windows stay resolvable
        lo0, hi0, _ = bracket_support(neg, drop=60.0)
        lo, hi = lo0, hi0
        for x in (float(np.min(xs)), float(np.max(xs))):
            if x == 0.0:
                continue
            l, h, _ = bracket_support(lambda y: x * y + neg(y), drop=60.0)
            lo, hi = min(lo, l), max(hi, h)
        half = hi0 - lo0
        lo, hi = max(lo, lo0 - half), min(hi, hi0 + half)
        n_uniform = int(min(8001, max(3001, (hi - lo) / 0.05)))
        conv = SelfConvolution(neg, (lo, hi), kinks=phi.kinks_1d(),
                               n_uniform=n_uniform)
    tab = conv.level(tau)
    gaps = []
    for x in np.atleast_1d(xs):
        lhs = log_integral_1d(lambda y: x * y + tab.logpdf(y),
                              breaks=tab.kinks, lo=tab.lo, hi=tab.hi,
                              cert_tol=1e-7).value
        rhs = tau * view.value(x)
        gaps.append(lhs - rhs)
    gaps = np.asarray(gaps)
    return {"max_abs_gap": float(np.max(np.abs(gaps))),
            "gaps": gaps, "probes": np.atleast_1d(xs)}


def llt_value_tensor(phi: Potential, x, expand: float = 2.0) -> float:
    """Transform value by direct tensor quadrature (d <= 3): the independent
    cross-check route for structured backends."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = phi.dim
    if d > 3:
        raise ValueError("tensor route supports d <= 3")

    def logf(Y):
        return Y @ x - np.asarray(phi.value(Y))

    if phi.domain is not None:
        lo, hi = phi.domain.bounding_box()
    else:
        from .potentials import _axis_box

        lo, hi = _axis_box(phi, drop=60.0)
        lo, hi = expand * lo - np.abs(x), expand * hi + np.abs(x)
    return float(tensor_log_integral(logf, lo, hi, panels=32, order=12))
