"""Sampling toolkit for tilted-measure localization and the log-Laplace-transform
proximal sampler.

The package is organised around one object: a convex potential ``phi`` with
normalized density ``exp(-phi)``.  Its log-Laplace transform
``psi(x) = log int exp(<x,y> - phi(y)) dy`` is the cumulant generating
function of that density, and every sampler here alternates between tilts of
``exp(-phi)`` and tilts of a target measure reweighted by ``exp(-tau*psi)``.

Modules
-------
potentials     convex potential variants and normalization
quadrature     certified 1-D log-domain integration and inverse-CDF sampling
convolution    self-convolution tables for explicit increment sums
stable         overflow-safe log-domain primitives
llt            log-Laplace transforms, tilted-density samplers
localization   additive-increment localization process and its renormalized potentials
prox           the alternating forward/backward proximal sampler
gibbs          discrete two-block Gibbs operators and their spectra
dp             parameter planner for private ERM/SCO sampling schedules
diagnostics    divergences, identity checkers, two-sample tests
acceptance     end-to-end verification criteria used by the CLI and test suite
cli            batch driver and the ``lltprox`` console entry point
"""

__version__ = "0.1.0"

from . import (acceptance, cli, convolution, diagnostics, dp,  # noqa: F401
               gibbs, llt, localization, potentials, prox, quadrature,
               stable)
