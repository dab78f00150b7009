"""Paired multi-grained scanning.

The same window slides over both members of a pair; at every position the
two slices are concatenated into one window pair and labelled with the
pair's similarity label.  Per window size a Gini forest and a
completely-random forest (uniform weights) turn every window pair into two
class vectors, and the concatenation of all of them is appended to the raw
pair vector as cascade input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._seeding import derive_seed
from .errors import ConfigError, DataError
from .forest import fit_forest
from .trees import COMPLETE_RANDOM, RANDOM_FOREST

log = logging.getLogger(__name__)

VECTOR_1D = "vector_1d"
IMAGE_2D = "image_2d"
DIVISORS_1D = (16, 9, 4)
DIVISORS_2D = (4, 3, 2)
SCAN_KINDS = (RANDOM_FOREST, COMPLETE_RANDOM)


@dataclass(frozen=True)
class ScanConfig:
    """Window layout.  Sizes are ``n // div`` for each divisor, where ``n`` is
    the vector length (1-D) or the shorter image side (2-D)."""

    enabled: bool = False
    shape: str = VECTOR_1D
    height: int | None = None
    width: int | None = None
    divisors: tuple | None = None
    stride: int = 1
    trees_per_forest: int = 100

    def __post_init__(self):
        if self.shape not in (VECTOR_1D, IMAGE_2D):
            raise ConfigError(f"unknown scanning shape {self.shape!r}")
        if self.shape == IMAGE_2D and self.enabled:
            if not (isinstance(self.height, int) and isinstance(self.width, int)
                    and self.height >= 1 and self.width >= 1):
                raise ConfigError("image_2d scanning needs positive integer height and width")
        if self.stride != 1:
            raise ConfigError("only stride 1 is supported")
        if self.trees_per_forest < 1:
            raise ConfigError(f"scanning trees_per_forest must be >= 1, got {self.trees_per_forest}")
        if self.divisors is not None:
            divs = tuple(int(v) for v in self.divisors)
            if not divs or any(v < 1 for v in divs):
                raise ConfigError(f"scanning divisors must be positive integers, got {self.divisors}")
            object.__setattr__(self, "divisors", divs)

    @property
    def resolved_divisors(self) -> tuple:
        if self.divisors is not None:
            return self.divisors
        return DIVISORS_2D if self.shape == IMAGE_2D else DIVISORS_1D

    def to_dict(self) -> dict:
        return {"enabled": bool(self.enabled), "shape": self.shape, "height": self.height,
                "width": self.width,
                "divisors": None if self.divisors is None else list(self.divisors),
                "stride": self.stride, "trees_per_forest": int(self.trees_per_forest)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScanConfig":
        known = {"enabled", "shape", "height", "width", "divisors", "stride", "trees_per_forest"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scanning keys: {sorted(extra)}")
        d = dict(d)
        if d.get("divisors") is not None:
            d["divisors"] = tuple(d["divisors"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class WindowPair:
    """``offset`` is ``(start,)`` for vectors and ``(row, col)`` for images."""

    offset: tuple
    size: int
    values: np.ndarray


def _grid(cfg: ScanConfig, d: int) -> tuple[int, int]:
    if cfg.shape == IMAGE_2D:
        if cfg.height * cfg.width != d:
            raise DataError(f"image {cfg.height}x{cfg.width} does not match {d} features")
        return cfg.height, cfg.width
    return 1, d


def window_sizes(cfg: ScanConfig, d: int) -> list[int]:
    """Retained window sizes (side lengths for images), deduplicated, ascending.

    Sizes below 2 or beyond the available extent are skipped with a warning.
    """
    h, w = _grid(cfg, d)
    n = min(h, w) if cfg.shape == IMAGE_2D else d
    out = []
    for div in cfg.resolved_divisors:
        L = n // div
        if L < 2:
            log.warning("scanning window %d // %d = %d is below 2, skipped", n, div, L)
        elif L > n:
            log.warning("scanning window %d exceeds extent %d, skipped", L, n)
        elif L not in out:
            out.append(L)
    return sorted(out)


def n_positions(cfg: ScanConfig, d: int, L: int) -> int:
    h, w = _grid(cfg, d)
    if cfg.shape == IMAGE_2D:
        return (h - L + 1) * (w - L + 1)
    return d - L + 1


def _windows(X: np.ndarray, cfg: ScanConfig, L: int) -> np.ndarray:
    """(rows, positions, window length) view, positions row-major."""
    n, d = X.shape
    if cfg.shape == IMAGE_2D:
        h, w = _grid(cfg, d)
        v = sliding_window_view(X.reshape(n, h, w), (L, L), axis=(1, 2))
        return v.reshape(n, (h - L + 1) * (w - L + 1), L * L)
    return sliding_window_view(X, L, axis=1)


def _pair_windows(Xa, Xb, cfg, L) -> np.ndarray:
    return np.concatenate([_windows(Xa, cfg, L), _windows(Xb, cfg, L)], axis=2)


def _check_members(a, b, d=None) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.shape != b.shape or a.ndim != 2:
        raise DataError(f"pair members differ in shape: {a.shape} vs {b.shape}")
    if d is not None and a.shape[1] != d:
        raise DataError(f"expected {d} features per member, got {a.shape[1]}")
    return np.ascontiguousarray(a), np.ascontiguousarray(b)


def extract_window_pairs(a, b, cfg: ScanConfig) -> dict[int, list[WindowPair]]:
    """Window pairs of one pair, keyed by window size."""
    fa = np.asarray(getattr(a, "features", a), dtype=np.float64)
    fb = np.asarray(getattr(b, "features", b), dtype=np.float64)
    if fa.ndim != 1 or fa.shape != fb.shape:
        raise DataError(f"pair members differ in shape: {fa.shape} vs {fb.shape}")
    d = fa.shape[0]
    sizes = window_sizes(cfg, d)
    if not sizes:
        raise DataError(f"no usable window size for {d} features")
    h, w = _grid(cfg, d)
    out = {}
    for L in sizes:
        vals = _pair_windows(fa[None, :], fb[None, :], cfg, L)[0]
        if cfg.shape == IMAGE_2D:
            offs = [(r, c) for r in range(h - L + 1) for c in range(w - L + 1)]
        else:
            offs = [(s,) for s in range(d - L + 1)]
        out[L] = [WindowPair(o, L, np.array(v)) for o, v in zip(offs, vals)]
    return out


@dataclass(frozen=True, eq=False)
class Scanners:
    """Fitted scanning forests: for each window size, one forest per kind."""

    config: ScanConfig
    d: int
    sizes: tuple
    forests: tuple  # forests[s] = (random_forest, complete_random) for sizes[s]

    def __post_init__(self):
        if len(self.sizes) != len(self.forests):
            raise DataError("one forest pair per window size required")
        for L, fs in zip(self.sizes, self.forests):
            if len(fs) != len(SCAN_KINDS):
                raise DataError("each window size needs exactly two scanning forests")
            width = 2 * (L * L if self.config.shape == IMAGE_2D else L)
            for f in fs:
                if f.width != width:
                    raise DataError(f"scanning forest width {f.width}, expected {width} for size {L}")

    @property
    def out_width(self) -> int:
        return sum(4 * n_positions(self.config, self.d, L) for L in self.sizes)

    def transform(self, Xa, Xb) -> np.ndarray:
        """Scanned class vectors for member matrices (rows x d) of a batch of pairs.

        Ordering: window size, then position, then forest, then class.
        """
        Xa, Xb = _check_members(Xa, Xb, self.d)
        n = Xa.shape[0]
        blocks = []
        for L, fs in zip(self.sizes, self.forests):
            W = _pair_windows(Xa, Xb, self.config, L)
            npos = W.shape[1]
            flat = W.reshape(n * npos, W.shape[2])
            parts = []
            for f in fs:
                v0 = f.class_vectors(flat)[:, 0].reshape(n, npos)
                parts.append(v0)
                parts.append(1.0 - v0)
            blocks.append(np.stack(parts, axis=2).reshape(n, 4 * npos))
        if not blocks:
            return np.zeros((n, 0))
        return np.concatenate(blocks, axis=1)


def fit_scanners(Xa, Xb, y, cfg: ScanConfig, seed: int = 0) -> Scanners:
    """Fit the scanning forests on every window pair of the given pairs.

    ``Xa`` and ``Xb`` hold the first and second members row by row.
    """
    if not cfg.enabled:
        raise ConfigError("fit_scanners called with scanning disabled")
    Xa, Xb = _check_members(Xa, Xb)
    y = np.asarray(y)
    if y.shape != (Xa.shape[0],):
        raise DataError(f"{y.size} labels for {Xa.shape[0]} pairs")
    d = Xa.shape[1]
    sizes = window_sizes(cfg, d)
    if not sizes:
        raise DataError(f"no usable window size for {d} features")
    forests = []
    for s, L in enumerate(sizes):
        W = _pair_windows(Xa, Xb, cfg, L)
        npos = W.shape[1]
        flat = np.ascontiguousarray(W.reshape(-1, W.shape[2]))
        yy = np.repeat(y, npos)
        forests.append(tuple(fit_forest(flat, yy, kind, cfg.trees_per_forest,
                                        derive_seed(seed, s, k))
                             for k, kind in enumerate(SCAN_KINDS)))
    return Scanners(cfg, d, tuple(sizes), tuple(forests))


def transform_pair(a, b, scanners: Scanners | None) -> np.ndarray:
    """Cascade input for one pair: raw concatenation, then the scanned block."""
    fa = np.asarray(getattr(a, "features", a), dtype=np.float64)
    fb = np.asarray(getattr(b, "features", b), dtype=np.float64)
    if fa.ndim != 1 or fa.shape != fb.shape:
        raise DataError(f"pair members differ in shape: {fa.shape} vs {fb.shape}")
    raw = np.concatenate([fa, fb])
    if scanners is None:
        return raw
    return np.concatenate([raw, scanners.transform(fa[None, :], fb[None, :])[0]])
