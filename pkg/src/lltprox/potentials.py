"""Convex potential variants with normalized densities ``exp(-phi)``.

A potential is a convex function plus an additive ``shift`` used to normalize
its density.  Batch conventions: ``value`` accepts a point of shape (dim,) or
a batch (n, dim) and returns a scalar or (n,); for dim == 1 plain scalars and
flat (n,) arrays are also accepted.  ``grad`` and ``hess`` follow the same
leading shape.  Outside an optional bounded domain the value is +inf (density
zero); gradients are the core formula and are only meaningful inside.

Kinks (non-smooth points of 1-D potentials) use the subgradient convention:
``grad`` returns the midpoint of the left/right slopes, e.g. 0 at the tip of
``|y|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import log_integral_1d, tensor_log_integral

_DROP = 60.0  # truncation depth: relative density exp(-60) ~ 9e-27 at the cut


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple
    hi: tuple

    def contains(self, y: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        return np.all((y >= lo) & (y <= hi), axis=-1)

    def bounding_box(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def to_json(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class LpBallDomain:
    p: float
    radius: float
    dim: int

    def contains(self, y: np.ndarray) -> np.ndarray:
        if self.p == np.inf:
            r = np.max(np.abs(y), axis=-1)
        else:
            r = np.sum(np.abs(y) ** self.p, axis=-1) ** (1.0 / self.p)
        return r <= self.radius * (1.0 + 1e-12)

    def bounding_box(self):
        r = self.radius
        return -r * np.ones(self.dim), r * np.ones(self.dim)

    def to_json(self):
        return {"type": "lp-ball", "p": self.p, "radius": self.radius,
                "dim": self.dim}


def _domain_from_json(obj):
    if obj is None:
        return None
    if obj["type"] == "box":
        return BoxDomain(tuple(obj["lo"]), tuple(obj["hi"]))
    if obj["type"] == "lp-ball":
        return LpBallDomain(obj["p"], obj["radius"], obj["dim"])
    raise ValueError(f"unknown domain type {obj['type']!r}")


# ---------------------------------------------------------------------------
# base class


class Potential:
    kind: str = "abstract"

    def __init__(self, dim: int, shift: float = 0.0, domain=None):
        self.dim = int(dim)
        self.shift = float(shift)
        self.domain = domain

    # -- batching helpers ---------------------------------------------------
    def _as_batch(self, y):
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            if y.ndim == 0:
                return y.reshape(1, 1), True
            if y.ndim == 1:
                return y[:, None], False
            return y, False
        if y.ndim == 1:
            return y[None, :], True
        return y, False

    def _mask_domain(self, y: np.ndarray, vals: np.ndarray) -> np.ndarray:
        if self.domain is not None:
            vals = np.where(self.domain.contains(y), vals, np.inf)
        return vals

    # -- interface ----------------------------------------------------------
    def value(self, y):
        Y, single = self._as_batch(y)
        v = self._mask_domain(Y, self._value(Y) + self.shift)
        return float(v[0]) if single else v

    def grad(self, y):
        Y, single = self._as_batch(y)
        g = self._grad(Y)
        return g[0] if single else g

    def hess(self, y):
        Y, single = self._as_batch(y)
        h = self._hess(Y)
        return h[0] if single else h

    def _value(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    def _grad(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    def _hess(self, Y):  # pragma: no cover - abstract
        raise NotImplementedError

    # -- metadata used by the transform/sampling layers ---------------------
    def kinks_1d(self):
        """Non-smooth points of a 1-D potential."""
        return ()

    def tail_slopes(self):
        """(left, right) asymptotic slopes of a 1-D potential; the tilted
        integral converges exactly for -left < x < right."""
        return (np.inf, np.inf)

    def with_shift(self, extra: float) -> "Potential":
        import copy

        out = copy.copy(self)
        out.shift = self.shift + float(extra)
        return out

    # -- serialization ------------------------------------------------------
    def params(self) -> dict:
        raise NotImplementedError(f"{self.kind} potentials are not serializable")

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "dim": self.dim, "params": self.params(),
               "shift": self.shift}
        if self.domain is not None:
            obj["domain"] = self.domain.to_json()
        return obj


# ---------------------------------------------------------------------------
# concrete variants


class GaussianPotential(Potential):
    """phi(y) = (y-mean)' cov^{-1} (y-mean) / 2 + shift.

    The default shift is the normalizer log((2 pi)^d det cov) / 2, so the
    density integrates to one exactly.
    """

    kind = "gaussian"

    def __init__(self, mean, cov, shift=None, domain=None):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        d = mean.size
        self.mean = mean
        self.cov = cov
        self._chol = np.linalg.cholesky(cov)
        self.prec = np.linalg.inv(cov)
        self._logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        canonical = 0.5 * (d * np.log(2.0 * np.pi) + self._logdet)
        super().__init__(d, canonical if shift is None else shift, domain)

    def canonical_shift(self) -> float:
        return 0.5 * (self.dim * np.log(2.0 * np.pi) + self._logdet)

    def _value(self, Y):
        z = Y - self.mean
        return 0.5 * np.einsum("ni,ij,nj->n", z, self.prec, z)

    def _grad(self, Y):
        return (Y - self.mean) @ self.prec

    def _hess(self, Y):
        return np.broadcast_to(self.prec, (Y.shape[0],) + self.prec.shape).copy()

    def params(self):
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}


class AbsPower1D(Potential):
    """phi(y) = scale * |y|^power + shift (1-D).

    power = 1 with scale 1 and shift log 2 is the two-sided exponential;
    power = 2 is a quadratic; power = 4 the quartic well.  Powers in (1, 2)
    are rejected (their Hessian blows up at 0).
    """

    kind = "abs-power-1d"

    def __init__(self, power: float, scale: float = 1.0, shift: float = 0.0,
                 domain=None):
        if not (power == 1.0 or power >= 2.0):
            raise ValueError("power must be 1 or >= 2")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.power = float(power)
        self.scale = float(scale)
        super().__init__(1, shift, domain)

    def _value(self, Y):
        return self.scale * np.abs(Y[:, 0]) ** self.power

    def _grad(self, Y):
        y = Y[:, 0]
        m, s = self.power, self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            g = s * m * np.sign(y) * np.abs(y) ** (m - 1.0)
        if m == 1.0:
            g = np.where(y == 0.0, 0.0, g)  # subgradient midpoint at the tip
        return g[:, None]

    def _hess(self, Y):
        y = Y[:, 0]
        m, s = self.power, self.scale
        if m == 1.0:
            h = np.zeros_like(y)
        else:
            h = s * m * (m - 1.0) * np.abs(y) ** (m - 2.0)
        return h[:, None, None]

    def kinks_1d(self):
        return (0.0,) if self.power == 1.0 else ()

    def tail_slopes(self):
        if self.power == 1.0:
            return (self.scale, self.scale)
        return (np.inf, np.inf)

    def params(self):
        return {"power": self.power, "scale": self.scale}


class Tabulated1D(Potential):
    """Piecewise-linear convex potential through knots (xs, vals); the domain
    is the knot interval.  Gradients at knots are slope midpoints."""

    kind = "tabulated-1d"

    def __init__(self, xs, vals, shift: float = 0.0, convexity_tol: float = 1e-9):
        xs = np.asarray(xs, dtype=float)
        vals = np.asarray(vals, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing")
        slopes = np.diff(vals) / np.diff(xs)
        if np.any(np.diff(slopes) < -convexity_tol):
            raise ValueError("tabulated values are not convex")
        self.xs = xs
        self.vals = vals
        self._slopes = slopes
        super().__init__(1, shift, BoxDomain((xs[0],), (xs[-1],)))

    def _value(self, Y):
        return np.interp(Y[:, 0], self.xs, self.vals)

    def _grad(self, Y):
        y = Y[:, 0]
        idx = np.clip(np.searchsorted(self.xs, y, side="right") - 1,
                      0, len(self._slopes) - 1)
        g = self._slopes[idx]
        at_knot = np.isin(y, self.xs[1:-1])
        if np.any(at_knot):
            ki = np.searchsorted(self.xs, y[at_knot])
            g = g.copy()
            g[at_knot] = 0.5 * (self._slopes[ki - 1] + self._slopes[ki])
        return g[:, None]

    def _hess(self, Y):
        return np.zeros((Y.shape[0], 1, 1))

    def kinks_1d(self):
        return tuple(self.xs[1:-1])

    def params(self):
        return {"xs": self.xs.tolist(), "vals": self.vals.tolist()}


class LqSquaredPotential(Potential):
    """phi(y) = a * ||y||_q^2 with q = p/(p-1) for p in (1, 2].

    This is the canonical (2a/(p-1))-smooth regularizer with respect to
    ||.||_q; its log-Laplace transform is correspondingly (p-1)/(2a)-strongly
    convex with respect to ||.||_p.
    """

    kind = "lq-squared"

    def __init__(self, p: float, a: float, dim: int, shift: float = 0.0,
                 domain=None):
        if not 1.0 < p <= 2.0:
            raise ValueError("p must lie in (1, 2]")
        if a <= 0:
            raise ValueError("a must be positive")
        self.p = float(p)
        self.a = float(a)
        self.q = p / (p - 1.0)
        super().__init__(dim, shift, domain)

    def smoothness_constant(self) -> float:
        return 2.0 * self.a / (self.p - 1.0)

    def _r(self, Y):
        return np.sum(np.abs(Y) ** self.q, axis=-1)

    def _value(self, Y):
        return self.a * self._r(Y) ** (2.0 / self.q)

    def _grad(self, Y):
        q = self.q
        r = self._r(Y)
        u = np.sign(Y) * np.abs(Y) ** (q - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = 2.0 * self.a * r[:, None] ** (2.0 / q - 1.0) * u
        return np.where(r[:, None] > 0.0, g, 0.0)

    def _hess(self, Y):
        q = self.q
        n, d = Y.shape
        r = self._r(Y)
        u = np.sign(Y) * np.abs(Y) ** (q - 1.0)
        H = np.zeros((n, d, d))
        pos = r > 0.0
        if np.any(pos):
            rp = r[pos]
            up = u[pos]
            diag = np.abs(Y[pos]) ** (q - 2.0)
            t1 = 2.0 * self.a * (q - 1.0) * rp[:, None] ** (2.0 / q - 1.0)
            H[pos] = t1[..., None] * np.eye(d) * diag[:, None, :]
            t2 = 2.0 * self.a * (2.0 / q - 1.0) * q * rp ** (2.0 / q - 2.0)
            H[pos] += t2[:, None, None] * np.einsum("ni,nj->nij", up, up)
        return H

    def params(self):
        return {"p": self.p, "a": self.a}


class SeparablePotential(Potential):
    """Sum of independent 1-D potentials: phi(y) = sum_i comp_i(y_i) + shift."""

    kind = "separable-1d"

    def __init__(self, components, shift: float = 0.0, domain=None):
        comps = list(components)
        if any(c.dim != 1 for c in comps):
            raise ValueError("components must be one-dimensional")
        self.components = comps
        super().__init__(len(comps), shift, domain)

    def _value(self, Y):
        return sum(np.asarray(c.value(Y[:, i])) for i, c in enumerate(self.components))

    def _grad(self, Y):
        return np.stack([np.asarray(c.grad(Y[:, i]))[:, 0]
                         for i, c in enumerate(self.components)], axis=-1)

    def _hess(self, Y):
        n, d = Y.shape
        H = np.zeros((n, d, d))
        for i, c in enumerate(self.components):
            H[:, i, i] = np.asarray(c.hess(Y[:, i]))[:, 0, 0]
        return H

    def params(self):
        return {"components": [c.to_json() for c in self.components]}


class LipschitzMixturePotential(Potential):
    """Average of per-index loss oracles: phi(y) = mean_i f_i(y) + shift.

    The linear family stores a (n_components, dim) gradient matrix; arbitrary
    callables are also accepted (then the potential is not serializable).
    ``lipschitz_bound`` is measured in the norm dual to ``p_norm``.
    """

    kind = "lipschitz-mixture"

    def __init__(self, dim: int, loss_grads=None, callables=None,
                 p_norm: float = 2.0, shift: float = 0.0, domain=None):
        if (loss_grads is None) == (callables is None):
            raise ValueError("provide exactly one of loss_grads / callables")
        self.p_norm = float(p_norm)
        self.loss_grads = None
        self.callables = None
        if loss_grads is not None:
            self.loss_grads = np.atleast_2d(np.asarray(loss_grads, dtype=float))
            self._mean_grad = self.loss_grads.mean(axis=0)
        else:
            self.callables = list(callables)
        super().__init__(dim, shift, domain)

    @property
    def n_components(self) -> int:
        return (len(self.loss_grads) if self.loss_grads is not None
                else len(self.callables))

    def lipschitz_bound(self) -> float:
        if self.loss_grads is None:
            raise NotImplementedError("no bound available for callable losses")
        p = self.p_norm
        q = np.inf if p == 1.0 else p / (p - 1.0)
        if q == np.inf:
            norms = np.max(np.abs(self.loss_grads), axis=1)
        else:
            norms = np.sum(np.abs(self.loss_grads) ** q, axis=1) ** (1.0 / q)
        return float(norms.max())

    def component_value(self, i: int, y):
        Y, single = self._as_batch(y)
        if self.loss_grads is not None:
            v = Y @ self.loss_grads[i]
        else:
            v = np.array([self.callables[i](row) for row in Y])
        return float(v[0]) if single else v

    def _value(self, Y):
        if self.loss_grads is not None:
            return Y @ self._mean_grad
        return np.mean([[c(row) for c in self.callables] for row in Y], axis=1)

    def _grad(self, Y):
        if self.loss_grads is None:
            raise NotImplementedError("callable losses expose no gradient")
        return np.broadcast_to(self._mean_grad, Y.shape).copy()

    def _hess(self, Y):
        if self.loss_grads is None:
            raise NotImplementedError("callable losses expose no Hessian")
        d = self.dim
        return np.zeros((Y.shape[0], d, d))

    def params(self):
        if self.loss_grads is None:
            raise NotImplementedError("callable losses are not serializable")
        return {"loss_grads": self.loss_grads.tolist(), "p_norm": self.p_norm}


class SumPotential(Potential):
    """Weighted sum of potentials on a common space (plumbing for composite
    targets such as loss + regularizer)."""

    kind = "sum"

    def __init__(self, parts, weights=None, shift: float = 0.0, domain=None):
        parts = list(parts)
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError("parts must share a dimension")
        self.parts = parts
        self.weights = (np.ones(len(parts)) if weights is None
                        else np.asarray(weights, dtype=float))
        if domain is None:
            owned = [p.domain for p in parts if p.domain is not None]
            domain = owned[0] if owned else None
        super().__init__(dims.pop(), shift, domain)

    def _value(self, Y):
        tot = np.zeros(Y.shape[0])
        for w, p in zip(self.weights, self.parts):
            Yp, _ = p._as_batch(Y if p.dim > 1 else Y[:, 0])
            tot = tot + w * (p._value(Yp) + p.shift)
        return tot

    def _grad(self, Y):
        tot = np.zeros_like(Y)
        for w, p in zip(self.weights, self.parts):
            Yp, _ = p._as_batch(Y if p.dim > 1 else Y[:, 0])
            tot = tot + w * p._grad(Yp)
        return tot

    def _hess(self, Y):
        d = Y.shape[1]
        tot = np.zeros((Y.shape[0], d, d))
        for w, p in zip(self.weights, self.parts):
            Yp, _ = p._as_batch(Y if p.dim > 1 else Y[:, 0])
            tot = tot + w * p._hess(Yp)
        return tot

    def kinks_1d(self):
        ks = []
        for p in self.parts:
            ks.extend(p.kinks_1d())
        return tuple(sorted(set(ks)))

    def tail_slopes(self):
        lefts, rights = zip(*(p.tail_slopes() for p in self.parts))
        return (float(np.dot(self.weights, lefts)),
                float(np.dot(self.weights, rights)))

    def params(self):
        return {"parts": [p.to_json() for p in self.parts],
                "weights": self.weights.tolist()}


class CallablePotential(Potential):
    """Potential wrapping plain callables (used for transform-induced terms
    like tau * psi); not serializable."""

    kind = "callable"

    def __init__(self, dim, fn, grad_fn=None, hess_fn=None, shift=0.0,
                 kinks=(), tail=(np.inf, np.inf), domain=None):
        self._fn = fn
        self._grad_fn = grad_fn
        self._hess_fn = hess_fn
        self._kinks = tuple(kinks)
        self._tail = tail
        super().__init__(dim, shift, domain)

    def _value(self, Y):
        return np.asarray(self._fn(Y), dtype=float)

    def _grad(self, Y):
        if self._grad_fn is None:
            raise NotImplementedError("no gradient registered")
        return np.asarray(self._grad_fn(Y), dtype=float)

    def _hess(self, Y):
        if self._hess_fn is None:
            raise NotImplementedError("no Hessian registered")
        return np.asarray(self._hess_fn(Y), dtype=float)

    def kinks_1d(self):
        return self._kinks

    def tail_slopes(self):
        return self._tail


# ---------------------------------------------------------------------------
# operations


def make_gaussian(mean, cov) -> GaussianPotential:
    """Normalized Gaussian potential (the only closed-form normalizer)."""
    return GaussianPotential(mean, cov)


@dataclass
class EvalBundle:
    value: float
    grad: np.ndarray
    hess: np.ndarray


def eval_bundle(pot: Potential, y) -> EvalBundle:
    return EvalBundle(pot.value(y), pot.grad(y), pot.hess(y))


@dataclass
class NormalizationCertificate:
    log_mass: float           # log int exp(-phi) before the shift
    quad_certificate: float   # change under panel doubling (0 for closed form)
    tail_drop: float          # truncation depth in log-density units
    method: str


def log_mass(pot: Potential, *, drop: float = _DROP, cert_tol: float = 1e-10):
    """log int exp(-phi) with a doubling certificate."""
    if isinstance(pot, GaussianPotential):
        return pot.canonical_shift() - pot.shift, 0.0, "closed-form"
    if isinstance(pot, SeparablePotential):
        tot, cert = -pot.shift, 0.0
        for c in pot.components:
            m, e, _ = log_mass(c, drop=drop, cert_tol=cert_tol)
            tot, cert = tot + m, cert + e
        return tot, cert, "separable-1d-quadrature"
    if pot.dim == 1:
        res = log_integral_1d(lambda y: -np.asarray(pot.value(y)),
                              breaks=pot.kinks_1d(), drop=drop,
                              cert_tol=cert_tol)
        return res.value, res.certificate, "quadrature-1d"
    if pot.dim <= 3:
        if pot.domain is not None:
            lo, hi = pot.domain.bounding_box()
        else:
            # truncation radius per axis from a coarse axis scan
            lo, hi = _axis_box(pot, drop)
        val, cert = tensor_log_integral(lambda Y: -np.asarray(pot.value(Y)),
                                        lo, hi, certify=True)
        return val, cert, "tensor-quadrature"
    raise NotImplementedError("normalization needs dim <= 3 or special structure")


def _axis_box(pot: Potential, drop: float):
    center = np.zeros(pot.dim)
    v0 = pot.value(center)
    los, his = [], []
    for i in range(pot.dim):
        def along(t, i=i):
            P = np.zeros((t.size, pot.dim))
            P[:, i] = t
            return np.asarray(pot.value(P))
        r = 1.0
        while np.min(along(np.array([-r, r])) - v0) < drop and r < 1e6:
            r *= 2.0
        los.append(-r)
        his.append(r)
    return np.array(los), np.array(his)


def normalize(pot: Potential, *, drop: float = _DROP, cert_tol: float = 1e-10):
    """Shift the potential so its density integrates to one.

    Returns (normalized potential, certificate); applying it twice moves the
    shift by at most the quadrature certificate.
    """
    mass, cert, method = log_mass(pot, drop=drop, cert_tol=cert_tol)
    return pot.with_shift(mass), NormalizationCertificate(mass, cert, drop, method)


# ---------------------------------------------------------------------------
# serialization

_KINDS = {}


def _register(cls, builder):
    _KINDS[cls.kind] = builder


_register(GaussianPotential,
          lambda p, d, s, dom: GaussianPotential(p["mean"], p["cov"], shift=s,
                                                 domain=dom))
_register(AbsPower1D,
          lambda p, d, s, dom: AbsPower1D(p["power"], p["scale"], shift=s,
                                          domain=dom))
_register(Tabulated1D,
          lambda p, d, s, dom: Tabulated1D(p["xs"], p["vals"], shift=s))
_register(LqSquaredPotential,
          lambda p, d, s, dom: LqSquaredPotential(p["p"], p["a"], d, shift=s,
                                                  domain=dom))
_register(LipschitzMixturePotential,
          lambda p, d, s, dom: LipschitzMixturePotential(
              d, loss_grads=p["loss_grads"], p_norm=p["p_norm"], shift=s,
              domain=dom))


def _build_separable(p, d, s, dom):
    comps = [potential_from_json(c) for c in p["components"]]
    return SeparablePotential(comps, shift=s, domain=dom)


def _build_sum(p, d, s, dom):
    parts = [potential_from_json(c) for c in p["parts"]]
    return SumPotential(parts, weights=p["weights"], shift=s, domain=dom)


_KINDS["separable-1d"] = _build_separable
_KINDS["sum"] = _build_sum


def potential_from_json(obj: dict) -> Potential:
    kind = obj["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown potential kind {kind!r}")
    dom = _domain_from_json(obj.get("domain"))
    return _KINDS[kind](obj["params"], obj["dim"], obj["shift"], dom)
