"""Datasets, similar/dissimilar pair generation, pair concatenation and splits.

Pairs carry label ``y = 0`` when both members share a class (similar) and
``y = 1`` otherwise.  Individual class labels are only ever compared for
equality; everything downstream of :func:`generate_pairs` sees pair labels
alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._seeding import make_rng
from .errors import DataError


@dataclass(frozen=True)
class Sample:
    features: np.ndarray
    id: int

    @property
    def d(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class Pair:
    i: int
    j: int
    y: int

    def __post_init__(self):
        if self.i == self.j:
            raise DataError(f"pair indices must differ, got ({self.i}, {self.j})")
        if self.y not in (0, 1):
            raise DataError(f"pair label must be 0 or 1, got {self.y}")


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix ``X`` (n x d) plus one opaque string label per row."""

    X: np.ndarray
    labels: tuple

    def __post_init__(self):
        X = _frozen(self.X, np.float64)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite values")
        labels = tuple(str(v) for v in self.labels)
        if len(labels) != X.shape[0]:
            raise DataError(f"{len(labels)} labels for {X.shape[0]} samples")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def sample(self, i: int) -> Sample:
        return Sample(self.X[i], int(i))

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(len(self))]

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))


@dataclass(frozen=True, eq=False)
class PairDataset:
    """Index pairs into ``source`` with binary similarity labels.

    Stored column-wise (``i``, ``j``, ``y`` arrays); ``pairs`` materializes
    :class:`Pair` objects when needed.
    """

    i: np.ndarray
    j: np.ndarray
    y: np.ndarray
    source: LabeledDataset | np.ndarray = field(repr=False)

    def __post_init__(self):
        i = _frozen(self.i, np.int64)
        j = _frozen(self.j, np.int64)
        y = _frozen(self.y, np.int8)
        if not (i.shape == j.shape == y.shape) or i.ndim != 1:
            raise DataError("pair columns must be 1-D arrays of equal length")
        n = self.n_samples
        if i.size and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= n):
            raise DataError(f"pair index out of range for {n} samples")
        if np.any(i == j):
            raise DataError("pair with identical indices")
        if np.any((y != 0) & (y != 1)):
            raise DataError("pair labels must be 0 or 1")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "y", y)

    @property
    def X(self) -> np.ndarray:
        return self.source.X if isinstance(self.source, LabeledDataset) else self.source

    @property
    def n_samples(self) -> int:
        return int(self.X.shape[0])

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def __iter__(self) -> Iterator[Pair]:
        for a, b, c in zip(self.i, self.j, self.y):
            yield Pair(int(a), int(b), int(c))

    @property
    def pairs(self) -> list[Pair]:
        return list(self)

    @property
    def similar(self) -> np.ndarray:
        """Row indices of the similar set S (y = 0)."""
        return np.flatnonzero(self.y == 0)

    @property
    def dissimilar(self) -> np.ndarray:
        """Row indices of the dissimilar set D (y = 1)."""
        return np.flatnonzero(self.y == 1)

    def subset(self, rows) -> "PairDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return PairDataset(self.i[rows], self.j[rows], self.y[rows], self.source)

    def concatenated(self) -> np.ndarray:
        """Matrix of concatenated pair vectors, one row per pair (width 2d)."""
        X = self.X
        if X.shape[1] == 0:
            raise DataError("cannot concatenate zero-width samples")
        return np.hstack([X[self.i], X[self.j]])


# ---------------------------------------------------------------------------
# CSV input

def _parse_label_column(label_column, ncols: int) -> int | None:
    if label_column is None or label_column == "none":
        return None
    if label_column == "last":
        return ncols - 1
    try:
        idx = int(label_column)
    except (TypeError, ValueError):
        raise DataError(f"label column must be an index, 'last' or 'none', got {label_column!r}")
    if idx < 0:
        idx += ncols
    if not 0 <= idx < ncols:
        raise DataError(f"label column {label_column} out of range for {ncols} columns")
    return idx


def load_csv(path, label_column="last", has_header: bool = False) -> LabeledDataset:
    """Read a comma-separated numeric table with one label column.

    ``label_column`` is a zero-based index, ``"last"``, or ``"none"`` for
    unlabeled files (every sample then gets the empty label).  Errors name
    the 1-based file row and 0-based column.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    first = 1 if has_header else 0
    body = [(n + 1, r) for n, r in enumerate(rows) if n >= first and any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")
    ncols = len(body[0][1])
    lab = _parse_label_column(label_column, ncols)
    feats, labels = [], []
    for lineno, row in body:
        if len(row) != ncols:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {ncols}")
        vals = []
        for c, cell in enumerate(row):
            if c == lab:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {lineno}, column {c}: non-numeric value {cell!r}")
            if not math.isfinite(v):
                raise DataError(f"{path}: row {lineno}, column {c}: non-finite value {cell!r}")
            vals.append(v)
        feats.append(vals)
        labels.append(row[lab].strip() if lab is not None else "")
    X = np.array(feats, dtype=np.float64).reshape(len(feats), ncols - (lab is not None))
    return LabeledDataset(X, tuple(labels))


# ---------------------------------------------------------------------------
# Pair generation

def _class_index(labels: Sequence[str]):
    names, inverse = np.unique(np.asarray(labels, dtype=object).astype(str), return_inverse=True)
    return names, inverse.astype(np.int64)


def _sample_combos(rng, count, total, draw, enumerate_all, replace):
    """Draw ``count`` unordered index combinations.

    ``draw(k)`` returns k uniform combinations (possibly repeated) as an
    (k, 2) array with i < j; ``enumerate_all()`` lists every combination.
    """
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    if replace:
        return draw(count)
    if count > total:
        raise DataError(f"requested {count} distinct pairs but only {total} exist")
    if 2 * count > total:
        allc = enumerate_all()
        return allc[rng.choice(total, size=count, replace=False)]
    seen = set()
    out = []
    while len(out) < count:
        for a, b in draw(2 * (count - len(out))):
            key = (int(a), int(b))
            if key not in seen:
                seen.add(key)
                out.append(key)
                if len(out) == count:
                    break
    return np.array(out, dtype=np.int64)


def generate_pairs(ds: LabeledDataset, n: int, balance: float = 0.5, seed: int = 0,
                   replace: bool | None = None) -> PairDataset:
    """Sample ``n`` labeled pairs, ``round(n * balance)`` of them similar.

    Similar pairs are uniform over same-class combinations, dissimilar
    pairs uniform over cross-class combinations.  ``(i, j)`` and ``(j, i)``
    are the same combination; each emitted pair gets a random orientation.
    With ``replace=None`` combinations are drawn without replacement when
    enough exist and with replacement otherwise; ``replace=False`` makes a
    shortage an error.
    """
    if n < 2:
        raise DataError(f"need at least 2 pairs, got n={n}")
    if not 0.0 <= balance <= 1.0:
        raise DataError(f"balance must lie in [0, 1], got {balance}")
    names, cls = _class_index(ds.labels)
    if len(names) < 2:
        raise DataError("pair generation needs at least 2 distinct classes")
    rng = make_rng(seed)
    n_sim = int(round(n * balance))
    n_dis = n - n_sim

    members = [np.flatnonzero(cls == c) for c in range(len(names))]
    sizes = np.array([m.size for m in members], dtype=np.int64)
    within = sizes * (sizes - 1) // 2
    total_sim = int(within.sum())
    N = len(cls)
    total_dis = N * (N - 1) // 2 - total_sim
    if n_sim > 0 and total_sim == 0:
        raise DataError("no class has 2 members, cannot form similar pairs")

    def draw_sim(k):
        c = rng.choice(len(names), size=k, p=within / total_sim)
        a = (rng.random(k) * sizes[c]).astype(np.int64)
        b = (rng.random(k) * (sizes[c] - 1)).astype(np.int64)
        b = b + (b >= a)
        ia = np.array([members[cc][x] for cc, x in zip(c, a)], dtype=np.int64)
        ib = np.array([members[cc][x] for cc, x in zip(c, b)], dtype=np.int64)
        return np.sort(np.stack([ia, ib], axis=1), axis=1)

    def all_sim():
        out = [np.stack(np.triu_indices(m.size, 1), axis=1) for m in members]
        return np.concatenate([m[o] for m, o in zip(members, out)])

    def draw_dis(k):
        out = np.empty((0, 2), dtype=np.int64)
        while out.shape[0] < k:
            a = rng.integers(0, N, size=2 * k)
            b = rng.integers(0, N, size=2 * k)
            ok = cls[a] != cls[b]
            out = np.concatenate([out, np.sort(np.stack([a[ok], b[ok]], axis=1), axis=1)])
        return out[:k]

    def all_dis():
        a, b = np.triu_indices(N, 1)
        ok = cls[a] != cls[b]
        return np.stack([a[ok], b[ok]], axis=1)

    def pick(count, total, draw, enum):
        use_replace = replace if replace is not None else count > total
        return _sample_combos(rng, count, total, draw, enum, use_replace)

    sim = pick(n_sim, total_sim, draw_sim, all_sim)
    dis = pick(n_dis, total_dis, draw_dis, all_dis)
    combos = np.concatenate([sim, dis])
    y = np.concatenate([np.zeros(n_sim, np.int8), np.ones(n_dis, np.int8)])
    flip = rng.random(n) < 0.5
    combos[flip] = combos[flip][:, ::-1]
    order = rng.permutation(n)
    return PairDataset(combos[order, 0], combos[order, 1], y[order], ds)


def n_test_pairs(n_train: int) -> int:
    """Number of test pairs drawn alongside ``n_train`` training pairs."""
    return -(-2 * n_train // 3)


def split_pairs(pd: PairDataset, n_train: int, seed: int = 0) -> tuple[PairDataset, PairDataset]:
    """Random disjoint split into ``n_train`` training and ceil(2N/3) test pairs."""
    n_test = n_test_pairs(n_train)
    if n_train < 1 or len(pd) < n_train + n_test:
        raise DataError(f"need {n_train + n_test} pairs for N={n_train}, have {len(pd)}")
    perm = make_rng(seed).permutation(len(pd))
    return pd.subset(perm[:n_train]), pd.subset(perm[n_train:n_train + n_test])


def concatenate_pair(a, b) -> np.ndarray:
    """Features of ``a`` followed by features of ``b`` (length 2d)."""
    fa = np.asarray(a.features if isinstance(a, Sample) else a, dtype=np.float64)
    fb = np.asarray(b.features if isinstance(b, Sample) else b, dtype=np.float64)
    if fa.ndim != 1 or fb.ndim != 1 or fa.shape != fb.shape:
        raise DataError(f"dimension mismatch: {fa.shape} vs {fb.shape}")
    if fa.size == 0:
        raise DataError("cannot concatenate zero-width samples")
    return np.concatenate([fa, fb])


# ---------------------------------------------------------------------------
# Pair files

def save_pairs(pd: PairDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "y"])
        for a, b, c in zip(pd.i, pd.j, pd.y):
            w.writerow([int(a), int(b), int(c)])


def load_pairs(path, source) -> PairDataset:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["i", "j", "y"]:
        raise DataError(f"{path}: expected header 'i,j,y'")
    cols = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected 3")
        try:
            cols.append([int(c) for c in row])
        except ValueError:
            raise DataError(f"{path}: row {lineno}: non-integer entry in {row}")
    arr = np.array(cols, dtype=np.int64).reshape(-1, 3)
    return PairDataset(arr[:, 0], arr[:, 1], arr[:, 2], source)
