"""Greedy level-wise training of the pair cascade and pair inference.

Each level holds ``M`` forest slots (first half Gini random forests, second
half completely-random forests), each replicated over ``cv_folds`` folds.
The forest in fold ``f`` is trained on the other folds' pairs; its tree
weights come from the QP on its own held-out pairs, and those held-out
pairs get their augmented features from it.  At inference a slot's class
vector is the plain average of its fold forests' weighted class vectors.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ._seeding import derive_seed, make_rng
from .data import PairDataset
from .errors import ConfigError, DataError, InvariantError
from .forest import Forest, fit_forest, set_weights
from .scanning import ScanConfig, Scanners, fit_scanners
from .trees import COMPLETE_RANDOM, RANDOM_FOREST
from .weightopt import QPConfig, build_p_matrix, objective, solve_weights

log = logging.getLogger(__name__)

REPLACE = "replace"
ACCUMULATE = "accumulate"
CONSTANT = "constant"
DOUBLING = "doubling"

SIMILAR = "similar"
DISSIMILAR = "dissimilar"
UNDETERMINED = "undetermined"

# seed-derivation paths that are not forest fits (forest paths start with level >= 1)
_VAL_STREAM = (0, 0)
_FOLD_STREAM = (0, 1)
_SCAN_STREAM = (0, 2)

CONFIG_KEYS = ("max_levels", "forests_per_level", "trees_per_forest", "cv_folds", "lambda",
               "z_schedule", "augmentation", "val_fraction", "epsilon_gain", "tau",
               "scanning", "qp", "seed", "baseline")


@dataclass(frozen=True)
class CascadeConfig:
    max_levels: int = 5
    forests_per_level: int = 4
    trees_per_forest: int = 100
    cv_folds: int = 3
    qp: QPConfig = field(default_factory=QPConfig)
    z_schedule: str = CONSTANT
    augmentation: str = REPLACE
    val_fraction: float = 0.2
    epsilon_gain: float = 0.0
    tau: float = 0.0
    seed: int = 0
    baseline: bool = False
    scanning: ScanConfig = field(default_factory=ScanConfig)

    def __post_init__(self):
        def bad(msg):
            raise ConfigError(msg)

        for name in ("max_levels", "forests_per_level", "trees_per_forest", "cv_folds", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                bad(f"{name} must be an integer, got {v!r}")
        if self.max_levels < 1:
            bad(f"max_levels must be >= 1, got {self.max_levels}")
        if self.forests_per_level < 2 or self.forests_per_level % 2:
            bad(f"forests_per_level must be even and >= 2, got {self.forests_per_level}")
        if self.trees_per_forest < 1:
            bad(f"trees_per_forest must be >= 1, got {self.trees_per_forest}")
        if self.cv_folds < 2:
            bad(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.z_schedule not in (CONSTANT, DOUBLING):
            bad(f"z_schedule must be 'constant' or 'doubling', got {self.z_schedule!r}")
        if self.augmentation not in (REPLACE, ACCUMULATE):
            bad(f"augmentation must be 'replace' or 'accumulate', got {self.augmentation!r}")
        if not 0.0 <= self.val_fraction <= 0.5:
            bad(f"val_fraction must lie in [0, 0.5], got {self.val_fraction}")
        if not np.isfinite(self.epsilon_gain):
            bad("epsilon_gain must be finite")
        if not (np.isfinite(self.tau) and self.tau >= 0):
            bad(f"tau must be finite and >= 0, got {self.tau}")
        if not isinstance(self.qp, QPConfig):
            bad("qp must be a QPConfig")
        if not isinstance(self.scanning, ScanConfig):
            bad("scanning must be a ScanConfig")

    def slot_kind(self, k: int) -> str:
        return RANDOM_FOREST if k < self.forests_per_level // 2 else COMPLETE_RANDOM

    def z_multiplier(self, level: int) -> float:
        """P-matrix multiplier at 1-based ``level``."""
        m = self.qp.z_multiplier
        if self.z_schedule == DOUBLING:
            m *= 2.0 ** (level - 1)
        return m

    def to_dict(self) -> dict:
        return {"max_levels": int(self.max_levels),
                "forests_per_level": int(self.forests_per_level),
                "trees_per_forest": int(self.trees_per_forest),
                "cv_folds": int(self.cv_folds),
                "lambda": float(self.qp.lam),
                "qp": {"tol": float(self.qp.tol), "max_iter": int(self.qp.max_iter),
                       "z_multiplier": float(self.qp.z_multiplier)},
                "z_schedule": self.z_schedule,
                "augmentation": self.augmentation,
                "val_fraction": float(self.val_fraction),
                "epsilon_gain": float(self.epsilon_gain),
                "tau": float(self.tau),
                "seed": int(self.seed),
                "baseline": bool(self.baseline),
                "scanning": self.scanning.to_dict()}

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "CascadeConfig":
        """Build from the JSON config layout; unknown keys are rejected."""
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        d = {**d, **{k: v for k, v in overrides.items() if v is not None}}
        extra = set(d) - set(CONFIG_KEYS)
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        qp_in = d.pop("qp", None) or {}
        if not isinstance(qp_in, dict):
            raise ConfigError("'qp' must be an object")
        qp_extra = set(qp_in) - {"tol", "max_iter", "z_multiplier", "lambda"}
        if qp_extra:
            raise ConfigError(f"unknown qp keys: {sorted(qp_extra)}")
        lam = d.pop("lambda", qp_in.get("lambda", QPConfig.lam))
        try:
            qp = QPConfig(lam=float(lam), max_iter=qp_in.get("max_iter", QPConfig.max_iter),
                          tol=float(qp_in.get("tol", QPConfig.tol)),
                          z_multiplier=float(qp_in.get("z_multiplier", QPConfig.z_multiplier)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad qp settings: {exc}") from exc
        scan_in = d.pop("scanning", None) or {}
        if not isinstance(scan_in, dict):
            raise ConfigError("'scanning' must be an object")
        try:
            scanning = ScanConfig.from_dict(scan_in)
            return cls(qp=qp, scanning=scanning, **d)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc


@dataclass(frozen=True)
class PairVerdict:
    diff: float
    label: str


def verdict_label(diff: float, tau: float) -> str:
    """``similar`` if diff >= tau, ``dissimilar`` if diff < 0, else ``undetermined``."""
    if diff >= tau:
        return SIMILAR
    if diff < 0:
        return DISSIMILAR
    return UNDETERMINED


@dataclass(frozen=True, eq=False)
class Level:
    """One cascade level: ``forests[slot][fold]``.

    ``base_width`` is the width of the level-1 input (raw pair plus any
    scanned block), needed by the replace augmentation.
    """

    forests: tuple
    input_width: int
    base_width: int
    augmentation: str = REPLACE

    def __post_init__(self):
        grid = tuple(tuple(row) for row in self.forests)
        if not grid or not grid[0]:
            raise DataError("a level needs at least one slot and one fold")
        n_folds = len(grid[0])
        for k, row in enumerate(grid):
            if len(row) != n_folds:
                raise DataError(f"slot {k} has {len(row)} folds, expected {n_folds}")
            for f, forest in enumerate(row):
                if forest.width != self.input_width:
                    raise InvariantError(f"forest (slot {k}, fold {f}) has width {forest.width}, "
                                         f"level input width is {self.input_width}")
        if self.augmentation not in (REPLACE, ACCUMULATE):
            raise DataError(f"unknown augmentation {self.augmentation!r}")
        object.__setattr__(self, "forests", grid)

    @property
    def n_slots(self) -> int:
        return len(self.forests)

    @property
    def n_folds(self) -> int:
        return len(self.forests[0])

    @property
    def output_width(self) -> int:
        keep = self.base_width if self.augmentation == REPLACE else self.input_width
        return keep + 2 * self.n_slots

    def class0(self, X) -> np.ndarray:
        """(rows x slots) fold-averaged weighted class-0 probabilities."""
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.n_slots))
        for k, row in enumerate(self.forests):
            s = np.zeros(X.shape[0])
            for forest in row:
                s = s + forest.class_vectors(X)[:, 0]
            out[:, k] = s / self.n_folds
        return out


def class_block(V0: np.ndarray) -> np.ndarray:
    """Interleave ``(v0, v1)`` per slot: width ``2 * slots``."""
    n, M = V0.shape
    out = np.empty((n, 2 * M))
    out[:, 0::2] = V0
    out[:, 1::2] = 1.0 - V0
    return out


def _extend(X: np.ndarray, V0: np.ndarray, base_width: int, augmentation: str) -> np.ndarray:
    keep = X[:, :base_width] if augmentation == REPLACE else X
    return np.hstack([keep, class_block(V0)])


def augment(x_pair, level: Level) -> np.ndarray:
    """Next-level input for one pair vector or a (rows x width) batch."""
    x = np.asarray(x_pair, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != level.input_width:
        raise DataError(f"expected width {level.input_width}, got shape {x.shape}")
    out = _extend(X, level.class0(X), level.base_width, level.augmentation)
    return out[0] if single else out


def _diff(V0: np.ndarray) -> np.ndarray:
    """sum_k v0 - sum_k v1, summed in slot order."""
    s0 = np.zeros(V0.shape[0])
    s1 = np.zeros(V0.shape[0])
    for k in range(V0.shape[1]):
        s0 = s0 + V0[:, k]
        s1 = s1 + (1.0 - V0[:, k])
    return s0 - s1


@dataclass(frozen=True, eq=False)
class SDFModel:
    levels: tuple
    config: CascadeConfig
    d: int
    scanners: Scanners | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise InvariantError("a model needs at least one level")
        object.__setattr__(self, "levels", levels)
        if self.scanners is not None and self.scanners.d != self.d:
            raise InvariantError(f"scanners expect d={self.scanners.d}, model d={self.d}")
        width = self.base_width
        for q, lv in enumerate(levels, start=1):
            if lv.input_width != width:
                raise InvariantError(f"level {q} input width {lv.input_width}, expected {width}")
            if lv.base_width != self.base_width:
                raise InvariantError(f"level {q} base width {lv.base_width}, "
                                     f"expected {self.base_width}")
            if lv.augmentation != self.config.augmentation:
                raise InvariantError(f"level {q} augmentation {lv.augmentation!r} does not match config")
            if lv.n_slots != self.config.forests_per_level or lv.n_folds != self.config.cv_folds:
                raise InvariantError(f"level {q} grid {lv.n_slots}x{lv.n_folds} does not match config")
            width = lv.output_width

    @property
    def base_width(self) -> int:
        return 2 * self.d + (self.scanners.out_width if self.scanners is not None else 0)

    def base_features(self, Xa, Xb) -> np.ndarray:
        Xa = np.atleast_2d(np.asarray(Xa, dtype=np.float64))
        Xb = np.atleast_2d(np.asarray(Xb, dtype=np.float64))
        if Xa.shape != Xb.shape or Xa.shape[1] != self.d:
            raise DataError(f"model expects {self.d} features per member, "
                            f"got {Xa.shape} and {Xb.shape}")
        parts = [Xa, Xb]
        if self.scanners is not None:
            parts.append(self.scanners.transform(Xa, Xb))
        return np.hstack(parts)

    def final_class0(self, Xa, Xb) -> np.ndarray:
        X = self.base_features(Xa, Xb)
        for lv in self.levels[:-1]:
            X = augment(X, lv)
        return self.levels[-1].class0(X)

    def predict_diffs(self, Xa, Xb) -> np.ndarray:
        return _diff(self.final_class0(Xa, Xb))

    def truncated(self, n_levels: int) -> "SDFModel":
        return replace(self, levels=self.levels[:n_levels])


def predict_pair(model: SDFModel, a, b) -> PairVerdict:
    fa = np.asarray(getattr(a, "features", a), dtype=np.float64)
    fb = np.asarray(getattr(b, "features", b), dtype=np.float64)
    if fa.ndim != 1 or fa.shape != fb.shape:
        raise DataError(f"pair members differ in shape: {fa.shape} vs {fb.shape}")
    diff = float(model.predict_diffs(fa[None, :], fb[None, :])[0])
    return PairVerdict(diff, verdict_label(diff, model.config.tau))


def predict_batch(model: SDFModel, pairs: PairDataset, tau: float | None = None) -> list:
    tau = model.config.tau if tau is None else tau
    if len(pairs) == 0:
        return []
    X = pairs.X
    diffs = model.predict_diffs(X[pairs.i], X[pairs.j])
    return [PairVerdict(float(v), verdict_label(float(v), tau)) for v in diffs]


def uniform_predict_diffs(model: SDFModel, Xa, Xb) -> np.ndarray:
    """Plain deep-forest inference: every forest is a flat tree average.

    Stored weights are ignored.  Kept separate from the weighted path so the
    two can be checked against each other.
    """
    X = model.base_features(Xa, Xb)
    V0 = None
    for q, lv in enumerate(model.levels):
        V0 = np.empty((X.shape[0], lv.n_slots))
        for k in range(lv.n_slots):
            acc = np.zeros(X.shape[0])
            for forest in lv.forests[k]:
                acc = acc + forest.uniform_class_vectors(X)[:, 0]
            V0[:, k] = acc / lv.n_folds
        if q + 1 < len(model.levels):
            keep = X[:, :lv.base_width] if lv.augmentation == REPLACE else X
            X = np.hstack([keep, class_block(V0)])
    s0 = np.zeros(X.shape[0])
    s1 = np.zeros(X.shape[0])
    for k in range(V0.shape[1]):
        s0 = s0 + V0[:, k]
        s1 = s1 + (1.0 - V0[:, k])
    return s0 - s1


def uniform_predict_pair(model: SDFModel, a, b) -> PairVerdict:
    fa = np.asarray(getattr(a, "features", a), dtype=np.float64)
    fb = np.asarray(getattr(b, "features", b), dtype=np.float64)
    diff = float(uniform_predict_diffs(model, fa[None, :], fb[None, :])[0])
    return PairVerdict(diff, verdict_label(diff, model.config.tau))


def accuracy(diffs, y, tau: float = 0.0) -> float:
    """Share of pairs whose verdict matches ``y``; undetermined counts as wrong."""
    diffs = np.asarray(diffs)
    y = np.asarray(y)
    if diffs.size == 0:
        return 0.0
    correct = ((diffs >= tau) & (y == 0)) | ((diffs < 0) & (y == 1))
    return float(np.mean(correct))


# ---------------------------------------------------------------------------
# training

class ForestCache:
    """Memo of fitted forests keyed by a digest of their training inputs.

    Lets several cascades trained on the same split (the uniform baseline
    and weighted variants) share forests wherever their inputs coincide.
    """

    def __init__(self):
        self._store = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(X, y, kind, T, seed) -> bytes:
        h = hashlib.blake2b(digest_size=20)
        h.update(np.ascontiguousarray(X).view(np.uint8))
        h.update(np.ascontiguousarray(y, dtype=np.int8).view(np.uint8))
        h.update(repr((X.shape, kind, int(T), int(seed))).encode())
        return h.digest()

    def fit(self, X, y, kind, T, seed) -> Forest:
        k = self.key(X, y, kind, T, seed)
        f = self._store.get(k)
        if f is None:
            self.misses += 1
            f = fit_forest(X, y, kind, T, seed)
            self._store[k] = f
        else:
            self.hits += 1
        return f


def _stratified_holdout(y, fraction, seed) -> np.ndarray:
    """Boolean mask of held-out rows, ``round(fraction * n_c)`` per label."""
    rng = make_rng(seed, *_VAL_STREAM)
    mask = np.zeros(y.shape[0], dtype=bool)
    if fraction <= 0:
        return mask
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        k = int(round(fraction * rows.size))
        if k:
            mask[rng.permutation(rows)[:k]] = True
    return mask


def _stratified_folds(y, n_folds, seed, level) -> np.ndarray:
    rng = make_rng(seed, *_FOLD_STREAM, level)
    fold = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for c in (0, 1):
        rows = rng.permutation(np.flatnonzero(y == c))
        fold[rows] = (np.arange(rows.size) + offset) % n_folds
        offset += rows.size
    return fold


def train_cascade(train: PairDataset, cfg: CascadeConfig | None = None,
                  cache: ForestCache | None = None) -> SDFModel:
    """Greedy level-by-level training with best-prefix termination."""
    cfg = cfg or CascadeConfig()
    if len(train) == 0:
        raise DataError("no training pairs")
    y_all = np.asarray(train.y, dtype=np.int64)
    if np.unique(y_all).size < 2:
        raise DataError("training pairs must contain both similar and dissimilar pairs")
    X = np.asarray(train.X, dtype=np.float64)
    d = X.shape[1]
    Xa_all, Xb_all = X[train.i], X[train.j]

    held = _stratified_holdout(y_all, cfg.val_fraction, cfg.seed)
    fit_rows, val_rows = np.flatnonzero(~held), np.flatnonzero(held)
    y = y_all[fit_rows]
    yv = y_all[val_rows]
    if np.unique(y).size < 2:
        raise DataError("fit portion lacks one of the labels; too few pairs")
    if fit_rows.size < cfg.cv_folds:
        raise DataError(f"{fit_rows.size} fit pairs cannot fill {cfg.cv_folds} folds")

    scanners = None
    if cfg.scanning.enabled:
        scanners = fit_scanners(Xa_all[fit_rows], Xb_all[fit_rows], y, cfg.scanning,
                                derive_seed(cfg.seed, *_SCAN_STREAM))
    parts = [Xa_all, Xb_all] + ([scanners.transform(Xa_all, Xb_all)] if scanners else [])
    base = np.hstack(parts)
    base_width = base.shape[1]
    Xf = base[fit_rows]
    Xv = base[val_rows]

    levels, trace, qp_log = [], [], []
    best_acc, best_q = -np.inf, 0
    M, F, T = cfg.forests_per_level, cfg.cv_folds, cfg.trees_per_forest
    for q in range(1, cfg.max_levels + 1):
        fold = _stratified_folds(y, F, cfg.seed, q)
        if np.bincount(fold, minlength=F).min() == 0:
            raise DataError(f"empty fold: {y.size} fit pairs for {F} folds")
        zmult = cfg.z_multiplier(q)
        grid = []
        V0 = np.empty((y.size, M))
        for k in range(M):
            kind = cfg.slot_kind(k)
            row = []
            for f in range(F):
                inside, out = fold != f, fold == f
                seed = derive_seed(cfg.seed, q, k, f)
                if cache is not None:
                    forest = cache.fit(Xf[inside], y[inside], kind, T, seed)
                else:
                    forest = fit_forest(Xf[inside], y[inside], kind, T, seed)
                probs = forest.tree_probabilities(Xf[out])
                P = build_p_matrix(probs, y[out], zmult)
                j0 = objective(P, forest.weights, cfg.qp.lam)
                entry = {"level": q, "slot": k, "fold": f, "objective_uniform": j0}
                if cfg.baseline:
                    entry.update(objective_final=j0, iterations=0)
                else:
                    w, tr = solve_weights(P, cfg.qp)
                    forest = set_weights(forest, w)
                    entry.update(objective_final=objective(P, w, cfg.qp.lam),
                                 iterations=len(tr) - 1)
                qp_log.append(entry)
                V0[out, k] = forest.class0_from_probs(probs)
                row.append(forest)
            grid.append(tuple(row))
        level = Level(tuple(grid), Xf.shape[1], base_width, cfg.augmentation)
        levels.append(level)

        Vv = level.class0(Xv)
        acc = accuracy(_diff(Vv), yv, cfg.tau) if val_rows.size else None
        trace.append(acc)
        log.info("level %d: validation accuracy %s", q, acc)
        if val_rows.size:
            if acc - best_acc <= cfg.epsilon_gain:
                break
            best_acc, best_q = acc, q
        else:
            best_q = q
        if q < cfg.max_levels:
            Xf = _extend(Xf, V0, base_width, cfg.augmentation)
            Xv = _extend(Xv, Vv, base_width, cfg.augmentation)

    metadata = {"seed": int(cfg.seed), "train_pair_count": int(len(train)),
                "fit_pair_count": int(fit_rows.size), "validation_pair_count": int(val_rows.size),
                "validation_trace": trace, "qp": [e for e in qp_log if e["level"] <= best_q]}
    return SDFModel(tuple(levels[:best_q]), cfg, d, scanners, metadata)
