"""Simplex-constrained squared-hinge QPs for per-forest tree weights.

For a forest with per-tree class-0 probabilities ``p0`` on the training
pairs, row ``r`` of the P matrix is ``z_r * (2 * p0[r] - 1)`` with
``z_r = -m`` for similar pairs (y = 0) and ``+m`` for dissimilar ones.  The
weights minimize

    J(w) = sum_r max(0, P[r] @ w) ** 2 + lam * ||w||^2

over the unit simplex.  A positive margin ``P[r] @ w`` means the weighted
forest leans towards the wrong class for pair ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, DataError, InvariantError
from .forest import SIMPLEX_TOL, check_simplex

STEP0 = 1.0
SHRINK = 0.5
ARMIJO_C = 1e-4
MIN_STEP = 1e-30


@dataclass(frozen=True)
class QPConfig:
    """Solver settings.  ``lam`` is the ridge strength (``lambda`` in configs)."""

    lam: float = 0.01
    max_iter: int = 10000
    tol: float = 1e-8
    z_multiplier: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not np.isfinite(self.z_multiplier) or self.z_multiplier == 0:
            raise ConfigError(f"z_multiplier must be finite and non-zero, got {self.z_multiplier}")

    def to_dict(self) -> dict:
        return {"lambda": float(self.lam), "max_iter": int(self.max_iter),
                "tol": float(self.tol), "z_multiplier": float(self.z_multiplier)}


def build_p_matrix(probs, y, z_multiplier: float = 1.0) -> np.ndarray:
    """Signed margins ``z_r * (p0 - p1)`` for a (pairs x trees) class-0 matrix."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y)
    if probs.ndim != 2:
        raise DataError(f"probability matrix must be 2-D, got shape {probs.shape}")
    if y.shape != (probs.shape[0],):
        raise DataError(f"{y.size} labels for {probs.shape[0]} probability rows")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("pair labels must be 0 or 1")
    z = np.where(y == 0, -float(z_multiplier), float(z_multiplier))
    return z[:, None] * (2.0 * probs - 1.0)


def _check_pw(P, w):
    P = np.asarray(P, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if P.ndim != 2:
        raise DataError(f"P must be 2-D, got shape {P.shape}")
    if w.shape != (P.shape[1],):
        raise DataError(f"weight vector of length {w.size} for {P.shape[1]} trees")
    return P, w


def objective(P, w, lam: float) -> float:
    P, w = _check_pw(P, w)
    h = np.maximum(P @ w, 0.0)
    return float(h @ h + lam * (w @ w))


def gradient(P, w, lam: float) -> np.ndarray:
    P, w = _check_pw(P, w)
    h = np.maximum(P @ w, 0.0)
    return 2.0 * (h @ P) + 2.0 * lam * w


def joint_objective(Ps, ws, lam: float) -> float:
    """Coupled objective over all forests of a level: sum of per-forest terms.

    Written out directly (one hinge sum and one ridge term per forest) so it
    can serve as an independent check on the decomposition.
    """
    total = 0.0
    for P, w in zip(Ps, ws, strict=True):
        P, w = _check_pw(P, w)
        m = P @ w
        total += float(np.sum(np.where(m > 0, m * m, 0.0))) + lam * float(np.sum(w * w))
    return total


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` by sort and threshold."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DataError("project_simplex needs a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise DataError("project_simplex got a non-finite entry")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def _emit(w: np.ndarray) -> np.ndarray:
    if w.min() < -1e-12:
        raise InvariantError(f"simplex violation: solver produced weight {w.min():.3g}")
    w = np.where(w < 0, 0.0, w)
    w = w / w.sum()
    check_simplex(w, SIMPLEX_TOL, "solver output")
    return w


def solve_weights(P, cfg: QPConfig | None = None, w0=None):
    """Minimize the squared-hinge objective over the simplex.

    Projected gradient descent with Armijo backtracking along the
    projection arc.  Returns ``(w, trace)`` where ``trace[0]`` is the
    objective at ``w0`` (uniform by default) and each later entry is the
    objective after one accepted step.
    """
    cfg = cfg or QPConfig()
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] == 0:
        raise DataError(f"P must be a 2-D matrix with at least one column, got {P.shape}")
    if not np.all(np.isfinite(P)):
        raise DataError("P contains non-finite entries")
    T = P.shape[1]
    w = np.full(T, 1.0 / T) if w0 is None else np.array(w0, dtype=np.float64)
    if w.shape != (T,):
        raise DataError(f"w0 of length {w.size} for {T} trees")
    check_simplex(w, SIMPLEX_TOL, "w0")
    lam = float(cfg.lam)

    # On the simplex P[r] @ w <= max(P[r]), so rows with no positive entry
    # never contribute to the hinge term and can be dropped exactly.
    keep = P.max(axis=1) > 0 if P.shape[0] else np.zeros(0, dtype=bool)
    A = np.ascontiguousarray(P[keep])

    w, trace, n_iter = _kernels.pgd_simplex(A, w, lam, int(cfg.max_iter), float(cfg.tol),
                                            STEP0, SHRINK, ARMIJO_C, MIN_STEP)
    if n_iter < 0:
        raise InvariantError("non-finite gradient")
    return _emit(w), trace


def solve_all(items, y, cfg: QPConfig | None = None) -> list:
    """One independent QP per forest.

    ``items`` holds ``(forest, probs)`` pairs where ``probs`` is the forest's
    (pairs x trees) class-0 matrix on the rows labelled by ``y``.
    """
    cfg = cfg or QPConfig()
    y = np.asarray(y)
    out = []
    for _, probs in items:
        P = build_p_matrix(probs, y, cfg.z_multiplier)
        w, _ = solve_weights(P, cfg)
        out.append(w)
    return out
