"""Gini random-subspace trees and completely-random trees on pair vectors.

Both kinds store, at each leaf, the class proportions of the training rows
that reached it.  Routing sends ``x[f] <= threshold`` to the left child.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from ._seeding import make_rng
from .errors import ConfigError, DataError

RANDOM_FOREST = "random_forest"
COMPLETE_RANDOM = "complete_random"
KINDS = (RANDOM_FOREST, COMPLETE_RANDOM)


@dataclass(frozen=True)
class TreeConfig:
    """Growth settings for one tree kind.

    ``mtry=None`` resolves to ``ceil(sqrt(width))`` at fit time and
    ``bootstrap=None`` to True for random-forest trees, False for
    completely-random ones.  ``max_depth=None`` grows until the stop rules
    fire.
    """

    kind: str = RANDOM_FOREST
    mtry: int | None = None
    min_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool | None = None
    laplace: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown tree kind {self.kind!r}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {self.max_depth}")

    def resolved(self, width: int) -> "TreeConfig":
        mtry = self.mtry
        if mtry is None:
            mtry = math.ceil(math.sqrt(width))
        if self.kind == RANDOM_FOREST and not 1 <= mtry <= width:
            raise ConfigError(f"mtry {mtry} outside [1, {width}]")
        bootstrap = self.bootstrap
        if bootstrap is None:
            bootstrap = self.kind == RANDOM_FOREST
        return replace(self, mtry=mtry, bootstrap=bootstrap)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mtry": self.mtry, "min_leaf": self.min_leaf,
                "max_depth": self.max_depth, "bootstrap": self.bootstrap,
                "laplace": self.laplace}


@dataclass(frozen=True, eq=False)
class TreeNode:
    """View of one node: internal (``feature``, ``threshold``, children) or leaf."""

    feature: int | None = None
    threshold: float | None = None
    left: int | None = None
    right: int | None = None
    distribution: tuple | None = None

    @property
    def is_leaf(self) -> bool:
        return self.distribution is not None


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Array-backed binary tree.  Node 0 is the root; ``feature == -1`` marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    p0: np.ndarray
    width: int
    config: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0

    def __post_init__(self):
        for name, dt in (("feature", np.int32), ("threshold", np.float64), ("left", np.int32),
                         ("right", np.int32), ("p0", np.float64)):
            a = np.ascontiguousarray(getattr(self, name), dtype=dt)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature < 0))

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def node(self, k: int) -> TreeNode:
        if self.feature[k] < 0:
            p = float(self.p0[k])
            return TreeNode(distribution=(p, 1.0 - p))
        return TreeNode(int(self.feature[k]), float(self.threshold[k]),
                        int(self.left[k]), int(self.right[k]))

    def apply(self, X) -> np.ndarray:
        """Leaf index of every row."""
        X = _as_matrix(X, self.width)
        roots = np.zeros(1, np.int64)
        return _kernels.route_leaves(X, self.feature, self.threshold, self.left,
                                     self.right, roots)[:, 0]

    def predict_class0(self, X) -> np.ndarray:
        X = _as_matrix(X, self.width)
        roots = np.zeros(1, np.int64)
        return _kernels.tree_class0(X, self.feature, self.threshold, self.left,
                                    self.right, self.p0, roots)[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        p = self.predict_class0(X)
        return np.stack([p, 1.0 - p], axis=1)

    def same_structure(self, other: "DecisionTree") -> bool:
        return (self.width == other.width
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("feature", "threshold", "left", "right", "p0")))


def _as_matrix(X, width: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != width:
        raise DataError(f"expected input width {width}, got shape {X.shape}")
    return np.ascontiguousarray(X)


def fit_tree(X, y, cfg: TreeConfig | None = None, seed: int = 0) -> DecisionTree:
    """Grow one tree on concatenated pair vectors ``X`` with labels ``y`` in {0, 1}.

    Random-forest trees pick the best Gini split among ``mtry`` features
    drawn without replacement (thresholds at midpoints of adjacent distinct
    values); completely-random trees pick one feature and a threshold
    uniform in the node's value range.  Only features that vary inside a
    node are eligible.  Growth stops at pure nodes, nodes with fewer than
    ``2 * min_leaf`` rows, nodes where no feature varies, or ``max_depth``.
    """
    cfg = cfg or TreeConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"fit_tree needs a non-empty 2-D matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DataError(f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} rows")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("tree labels must be 0 or 1")
    n, width = X.shape
    cfg = cfg.resolved(width)
    rng = make_rng(seed)
    if cfg.bootstrap:
        rows = rng.integers(0, n, size=n).astype(np.int64)
    else:
        rows = np.arange(n, dtype=np.int64)
    U = rng.random((2 * n - 1, max(cfg.mtry if cfg.kind == RANDOM_FOREST else 0, 3)))
    max_depth = -1 if cfg.max_depth is None else cfg.max_depth
    y = y.astype(np.int64)
    if cfg.kind == RANDOM_FOREST:
        Xr = np.ascontiguousarray(X[rows].T)
        order = np.argsort(Xr, axis=1)
        grown = _kernels.grow_gini_tree(Xr, y[rows], order, cfg.mtry, cfg.min_leaf, max_depth,
                                        cfg.laplace, U)
    else:
        grown = _kernels.grow_random_tree(X, y, rows, cfg.min_leaf, max_depth, cfg.laplace, U)
    feat, thr, lft, rgt, p0, n_nodes = grown
    return DecisionTree(feat[:n_nodes], thr[:n_nodes], lft[:n_nodes], rgt[:n_nodes],
                        p0[:n_nodes], width, cfg, int(seed))


def predict_distribution(t: DecisionTree, x) -> np.ndarray:
    """Leaf class distribution ``(p0, p1)`` for a single vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != t.width:
        raise DataError(f"expected vector of width {t.width}, got shape {x.shape}")
    return t.predict_proba(x)[0]
