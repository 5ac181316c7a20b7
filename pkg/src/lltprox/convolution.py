"""Iterated self-convolution of a normalized 1-D density, with spline caches.

The j-fold convolved density of ``exp(-phi)`` realizes the potential of a sum
of j independent draws.  Each level is computed pointwise by kink-aware
Gauss-Legendre quadrature against the previous level; the first level uses
exact callables on both sides so no interpolation error compounds.  Grids are
graded (geometrically refined) around known kinks: a cubic spline through a
kink would otherwise ring at the 1e-3 level.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import panel_nodes

LOG_TINY = -700.0


def graded_grid(lo: float, hi: float, n_uniform: int, kinks=(), cluster: int = 28):
    """Uniform grid plus geometric refinement toward each kink."""
    pts = [np.linspace(lo, hi, n_uniform)]
    for k in kinks:
        if lo < k < hi:
            off = np.geomspace(1e-6, 1.0, cluster)
            pts.extend([k + off, k - off, np.array([k])])
    xs = np.unique(np.concatenate(pts))
    return xs[(xs >= lo) & (xs <= hi)]


class LogDensityTable:
    """log-density on [lo, hi]: exact callable or cubic spline of grid values."""

    def __init__(self, lo, hi, *, fn=None, xs=None, vals=None, kinks=()):
        self.lo, self.hi = float(lo), float(hi)
        self.kinks = tuple(kinks)
        self._fn = fn
        self._sp = CubicSpline(xs, vals) if fn is None else None

    def logpdf(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.full(y.shape, -np.inf)
        ok = (y >= self.lo) & (y <= self.hi)
        if np.any(ok):
            out[ok] = self._fn(y[ok]) if self._fn is not None else self._sp(y[ok])
        return out


def _convolve(base: LogDensityTable, other: LogDensityTable,
              n_uniform: int, panels: int, order: int) -> LogDensityTable:
    lo, hi = base.lo + other.lo, base.hi + other.hi
    grade_at = set(base.kinks) | set(other.kinks) | {0.0}
    ys = graded_grid(lo, hi, n_uniform, sorted(grade_at))
    out = np.empty(ys.shape)
    for i, y in enumerate(ys):
        zlo, zhi = max(base.lo, y - other.hi), min(base.hi, y - other.lo)
        if zhi <= zlo:
            out[i] = LOG_TINY
            continue
        brk = ([k for k in base.kinks if zlo < k < zhi]
               + [y - k for k in other.kinks if zlo < y - k < zhi])
        # wide overlap windows need more panels or exponential tails
        # slip between the Gauss-Legendre nodes
        n_pan = min(max(panels, int(np.ceil((zhi - zlo) / 4.0))), 160)
        z, w = panel_nodes(zlo, zhi, n_pan, order, breaks=brk)
        lf = base.logpdf(z) + other.logpdf(y - z)
        m = lf.max()
        if not np.isfinite(m):
            out[i] = LOG_TINY
            continue
        s = float(np.dot(w, np.exp(lf - m)))
        out[i] = m + np.log(s) if s > 0 else LOG_TINY
    out = np.maximum(out, LOG_TINY)
    # at the exact support endpoints the overlap is empty and the value
    # bottoms out at LOG_TINY; splining through such a cliff rings by
    # hundreds of log-units, so trim those endpoints off first
    keep = out > LOG_TINY + 1.0
    if np.any(keep):
        i0 = int(np.argmax(keep))
        i1 = len(keep) - int(np.argmax(keep[::-1])) - 1
        ys, out = ys[i0:i1 + 1], out[i0:i1 + 1]
    # the convolved density can stay non-smooth where component kinks align
    out_kinks = sorted({bk + ok for bk in base.kinks for ok in other.kinks})
    return LogDensityTable(ys[0], ys[-1], xs=ys, vals=out, kinks=out_kinks)


class SelfConvolution:
    """Lazy cache of the 1..tau-fold self-convolutions of ``exp(-phi)``.

    ``logpdf_base`` must be vectorized; ``support`` is the interval outside
    which the base density is negligible (or exactly zero); ``kinks`` list the
    non-smooth points of the base log-density.
    """

    def __init__(self, logpdf_base, support, kinks=(), n_uniform: int = 3001,
                 panels: int = 20, order: int = 12):
        lo, hi = support
        self._levels = [LogDensityTable(lo, hi, fn=logpdf_base, kinks=kinks)]
        self._n_uniform = n_uniform
        self._panels = panels
        self._order = order

    def level(self, j: int) -> LogDensityTable:
        """Density table of the j-fold convolution (j >= 1)."""
        if j < 1:
            raise ValueError("convolution level must be >= 1")
        while len(self._levels) < j:
            nxt = _convolve(self._levels[0], self._levels[-1],
                            self._n_uniform, self._panels, self._order)
            self._levels.append(nxt)
        return self._levels[j - 1]

    def logpdf(self, j: int, y):
        return self.level(j).logpdf(y)

    def potential_value(self, j: int, y):
        """Convolved potential (negative log-density) of the j-fold sum."""
        return -self.logpdf(j, y)
