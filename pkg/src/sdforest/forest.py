"""Forests of pair trees with simplex-constrained tree weights.

A forest's class vector for a pair vector ``x`` is ``v_c = sum_t w_t p_tc(x)``
with ``w`` on the unit simplex.  Uniform weights reproduce the plain
per-forest average of a deep-forest cascade.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import _kernels
from ._seeding import derive_seed
from .errors import DataError, InvariantError
from .trees import RANDOM_FOREST, TreeConfig, _as_matrix, fit_tree

SIMPLEX_TOL = 1e-9


def check_simplex(w, tol: float = SIMPLEX_TOL, where: str = "") -> None:
    w = np.asarray(w, dtype=np.float64)
    loc = f" ({where})" if where else ""
    if w.ndim != 1 or w.size == 0:
        raise InvariantError(f"simplex violation{loc}: weights must be a non-empty vector")
    if not np.all(np.isfinite(w)):
        raise InvariantError(f"simplex violation{loc}: non-finite weight")
    if w.min() < 0:
        raise InvariantError(f"simplex violation{loc}: negative weight {w.min():.3g}")
    if abs(w.sum() - 1.0) > tol:
        raise InvariantError(f"simplex violation{loc}: weights sum to {w.sum():.12g}")


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple
    kind: str
    weights: np.ndarray

    def __post_init__(self):
        trees = tuple(self.trees)
        if not trees:
            raise DataError("a forest needs at least one tree")
        widths = {t.width for t in trees}
        if len(widths) != 1:
            raise InvariantError(f"trees disagree on input width: {sorted(widths)}")
        w = np.array(self.weights, dtype=np.float64)
        if w.shape != (len(trees),):
            raise DataError(f"{w.size} weights for {len(trees)} trees")
        check_simplex(w)
        w.setflags(write=False)
        object.__setattr__(self, "trees", trees)
        object.__setattr__(self, "weights", w)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def width(self) -> int:
        return self.trees[0].width

    @cached_property
    def is_uniform(self) -> bool:
        """True when every weight is exactly equal (the plain-average case)."""
        return bool(np.all(self.weights == self.weights[0]))

    @cached_property
    def _packed(self):
        sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
        roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

        def shift(a, off):
            return np.where(a >= 0, a + off, -1)

        feature = np.concatenate([t.feature for t in self.trees]).astype(np.int64)
        threshold = np.concatenate([t.threshold for t in self.trees])
        left = np.concatenate([shift(t.left.astype(np.int64), o) for t, o in zip(self.trees, roots)])
        right = np.concatenate([shift(t.right.astype(np.int64), o) for t, o in zip(self.trees, roots)])
        p0 = np.concatenate([t.p0 for t in self.trees])
        return feature, threshold, left, right, p0, roots

    def tree_probabilities(self, X) -> np.ndarray:
        """ProbMatrix: entry (r, t) is tree t's class-0 probability on row r."""
        X = _as_matrix(X, self.width)
        feature, threshold, left, right, p0, roots = self._packed
        return _kernels.tree_class0(X, feature, threshold, left, right, p0, roots)

    def class0_from_probs(self, probs: np.ndarray) -> np.ndarray:
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if self.is_uniform:
            v0 = _kernels.mean_rows(probs)
        else:
            v0 = _kernels.weighted_rows(probs, self.weights)
        return np.clip(v0, 0.0, 1.0)

    def class_vectors(self, X) -> np.ndarray:
        """(rows x 2) class vectors ``(v_0, v_1)`` under the forest's weights."""
        v0 = self.class0_from_probs(self.tree_probabilities(X))
        return np.stack([v0, 1.0 - v0], axis=1)

    def uniform_class_vectors(self, X) -> np.ndarray:
        """Plain tree average, ignoring the stored weights."""
        v0 = np.clip(_kernels.mean_rows(self.tree_probabilities(X)), 0.0, 1.0)
        return np.stack([v0, 1.0 - v0], axis=1)


def fit_forest(X, y, kind: str = RANDOM_FOREST, T: int = 100, seed: int = 0,
               tree_config: TreeConfig | None = None) -> Forest:
    """Fit ``T`` trees of one kind; tree ``t`` uses seed ``derive_seed(seed, t)``.

    Weights start uniform.
    """
    if T < 1:
        raise DataError(f"a forest needs T >= 1 trees, got {T}")
    cfg = TreeConfig(kind=kind) if tree_config is None else replace(tree_config, kind=kind)
    X = np.ascontiguousarray(X, dtype=np.float64)
    trees = tuple(fit_tree(X, y, cfg, derive_seed(seed, t)) for t in range(T))
    return Forest(trees, cfg.kind, np.full(T, 1.0 / T))


def tree_probabilities(f: Forest, X) -> np.ndarray:
    return f.tree_probabilities(X)


def weighted_class_vector(f: Forest, x) -> np.ndarray:
    """Class vector ``(v_0, v_1)`` of a single pair vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != f.width:
        raise DataError(f"expected vector of width {f.width}, got shape {x.shape}")
    return f.class_vectors(x[None, :])[0]


def set_weights(f: Forest, w) -> Forest:
    """Copy of ``f`` with weights ``w``; rejects vectors off the unit simplex."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (f.n_trees,):
        raise DataError(f"{w.size} weights for {f.n_trees} trees")
    check_simplex(w)
    return Forest(f.trees, f.kind, w)
