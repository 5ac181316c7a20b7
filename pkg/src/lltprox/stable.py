"""One-sided stable densities, used as scale mixtures for lq-type potentials.

For 0 < s < 1 the function ``exp(-r^s)`` is completely monotone in r, with
mixing density ``g_s``: ``exp(-lam^s) = int_0^inf exp(-lam t) g_s(t) dt``.
``g_s`` is evaluated by Zolotarev's non-oscillatory integral representation
for small arguments and the convergent expansion at infinity for large ones.
Oscillatory (Pollard-type) representations are avoided on purpose: they lose
all precision for s > 1/2.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

_SERIES_SWITCH = 2.0


def _zolotarev_a(theta: np.ndarray, s: float) -> np.ndarray:
    # increasing on (0, pi), a(0+) = s^{s/(1-s)} (1-s), a(pi-) = +inf
    st = np.sin(s * theta)
    s1t = np.sin((1.0 - s) * theta)
    return st ** (s / (1.0 - s)) * s1t / np.sin(theta) ** (1.0 / (1.0 - s))


def _logpdf_integral(s: float, x: float) -> float:
    c = x ** (-s / (1.0 - s))

    def f(theta):
        a = _zolotarev_a(np.asarray([theta]), s)[0]
        return a * np.exp(-c * a)

    val, _ = quad(f, 0.0, np.pi, limit=200, epsabs=0.0, epsrel=1e-12)
    if val <= 0.0:
        return -np.inf
    return (np.log(s) - np.log(np.pi * (1.0 - s))
            - np.log(x) / (1.0 - s) + np.log(val))


def _logpdf_series(s: float, x: float, kmax: int = 120) -> float:
    k = np.arange(1, kmax + 1)
    logmag = gammaln(k * s + 1.0) - gammaln(k + 1.0) - (k * s + 1.0) * np.log(x)
    sgn = (-1.0) ** (k + 1) * np.sin(np.pi * k * s)
    m = logmag.max()
    tot = np.sum(sgn * np.exp(logmag - m))
    if tot <= 0.0:
        return -np.inf
    return m + np.log(tot) - np.log(np.pi)


def one_sided_stable_logpdf(s: float, t) -> np.ndarray:
    """log g_s(t) for the standard one-sided stable law, vectorized in t."""
    if not 0.0 < s < 1.0:
        raise ValueError("stability index must be in (0, 1)")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.full(t.shape, -np.inf)
    for i, ti in enumerate(t):
        if ti <= 0.0:
            continue
        if ti >= _SERIES_SWITCH:
            out[i] = _logpdf_series(s, ti)
        else:
            out[i] = _logpdf_integral(s, ti)
    return out


def scaled_mixture_logpdf(s: float, a: float, t) -> np.ndarray:
    """log of the mixing density for ``exp(-a r^s)``:
    ``exp(-a lam^s) = int exp(-lam t) g(t) dt`` with g(t) = g_s(t/a^{1/s})/a^{1/s}."""
    scale = a ** (1.0 / s)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return one_sided_stable_logpdf(s, t / scale) - np.log(scale)
