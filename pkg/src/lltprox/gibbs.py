"""Finite-state two-component Gibbs dynamics as explicit matrices.

A joint probability matrix ``P`` over states (i, j) induces the conditional-
expectation channels

    K  = R^-1 P    (functions of j -> functions of i)
    K' = C^-1 P^T  (functions of i -> functions of j)

with R, C the diagonal marginals.  One full Gibbs sweep on the first
component is ``P_X = K K'``.  Everything spectral happens in the symmetrized
coordinates B = R^-1/2 P C^-1/2, whose singular values tie the one-sweep
contraction to the square of the half-sweep contraction: the chain forgets
variance exactly twice as fast (in exponent) as either channel alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12


class SupportError(ValueError):
    """A marginal carries a zero entry; conditionals are undefined."""


@dataclass(frozen=True)
class DiscreteJoint:
    """Validated joint matrix with cached marginals."""

    P: np.ndarray
    r: np.ndarray = field(init=False)
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2:
            raise ValueError("joint must be a matrix")
        if np.any(P < 0.0):
            raise ValueError("joint entries must be nonnegative")
        if abs(P.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"joint mass {P.sum()!r} is not 1")
        r = P.sum(axis=1)
        c = P.sum(axis=0)
        if np.any(r <= 0.0) or np.any(c <= 0.0):
            raise SupportError("zero marginal: prune the state, don't hide it")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)

    @property
    def shape(self):
        return self.P.shape

    def symmetrized(self) -> np.ndarray:
        """B = R^-1/2 P C^-1/2; top singular pair is (sqrt r, sqrt c)."""
        return self.P / np.sqrt(np.outer(self.r, self.c))


def joint_from_csv(path) -> DiscreteJoint:
    P = np.loadtxt(path, delimiter=",", ndmin=2)
    return DiscreteJoint(P)


def random_joint(rng: np.random.Generator, n: int, m: int,
                 concentration: float = 1.0) -> DiscreteJoint:
    """Dirichlet-weighted random joint with full support."""
    P = rng.gamma(concentration, size=(n, m)) + 1e-12
    return DiscreteJoint(P / P.sum())


# ---------------------------------------------------------------------------
# operators


def build_operators(j: DiscreteJoint):
    """(K, K', P_X, P_Y) as dense matrices."""
    K = j.P / j.r[:, None]
    K_dag = j.P.T / j.c[:, None]
    return K, K_dag, K @ K_dag, K_dag @ K


def spectral_gap(j: DiscreteJoint) -> tuple[float, float]:
    """Second eigenvalue of the sweep P_X and its gap, via the symmetric
    similarity R^1/2 P_X R^-1/2 = B B^T."""
    B = j.symmetrized()
    try:
        evals = np.linalg.eigvalsh(B @ B.T)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise ArithmeticError(f"defective eigensolve: {exc}") from exc
    lam2 = float(evals[-2]) if evals.size > 1 else 0.0
    lam2 = min(max(lam2, 0.0), 1.0)
    return lam2, 1.0 - lam2


def channel_contraction(j: DiscreteJoint) -> tuple[float, float]:
    """Worst-case variance retention of each half sweep.

    forward: sup over mean-zero g of Var[Kg]/Var[g];
    backward: the same for K'.  Computed as squared top singular values of B
    (resp. B^T) with the constant direction projected out of the domain, so
    the two values come from two different SVD problems.
    """
    B = j.symmetrized()
    sr = np.sqrt(j.r)
    sc = np.sqrt(j.c)
    Qc = np.eye(len(sc)) - np.outer(sc, sc)
    Qr = np.eye(len(sr)) - np.outer(sr, sr)
    forward = float(np.linalg.svd(B @ Qc, compute_uv=False)[0]) ** 2
    backward = float(np.linalg.svd(B.T @ Qr, compute_uv=False)[0]) ** 2
    return forward, backward


def mean_zero_check(j: DiscreteJoint, f: np.ndarray, g: np.ndarray,
                    tol: float = 1e-10) -> tuple[float, float]:
    """Means of Kg (under r) and K'f (under c) for mean-zero inputs."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if abs(float(j.r @ f)) > tol * max(1.0, np.abs(f).max()):
        raise ValueError("f is not mean-zero under the row marginal")
    if abs(float(j.c @ g)) > tol * max(1.0, np.abs(g).max()):
        raise ValueError("g is not mean-zero under the column marginal")
    K, K_dag, _, _ = build_operators(j)
    return float(j.r @ (K @ g)), float(j.c @ (K_dag @ f))


def variance_ratio(j: DiscreteJoint, f: np.ndarray) -> float:
    """Var(P_X f)/Var(f) under the row marginal."""
    _, _, P_X, _ = build_operators(j)
    f = np.asarray(f, dtype=float)
    fc = f - j.r @ f
    num = float(j.r @ (P_X @ fc - j.r @ (P_X @ fc)) ** 2)
    den = float(j.r @ fc ** 2)
    if den == 0.0:
        raise ValueError("constant test function has no variance")
    return num / den


def analyze(j: DiscreteJoint) -> dict:
    """Everything the report needs: spectrum, channel sups, sanity checks."""
    K, K_dag, P_X, P_Y = build_operators(j)
    lam2, gap = spectral_gap(j)
    fwd, bwd = channel_contraction(j)
    RP = j.r[:, None] * P_X
    checks = {
        "row_sums": float(np.abs(P_X.sum(axis=1) - 1.0).max()),
        "reversibility": float(np.abs(RP - RP.T).max()),
        "stationarity": float(np.abs(j.r @ P_X - j.r).max()),
        "sup_equality": abs(fwd - bwd),
        "sup_vs_lambda2": max(abs(fwd - lam2), abs(bwd - lam2)),
    }
    return {"lambda2": lam2, "gap": gap, "forward_sup": fwd,
            "backward_sup": bwd, "checks": checks}
