"""Repetition harness comparing the weighted cascade with the uniform baseline.

Every repetition draws fresh pairs, splits them into N training and
ceil(2N/3) test pairs, and trains one baseline cascade plus one weighted
cascade per ridge strength, all on the same split with the same tree
seeds, so the accuracy gap is due to the weights alone.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._seeding import derive_seed
from .cascade import CascadeConfig, ForestCache, accuracy, train_cascade
from .data import LabeledDataset, generate_pairs, n_test_pairs, split_pairs
from .errors import ConfigError

GCF = "gcf"
SDF = "sdf"
MODES = (GCF, SDF, "both")


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    T_values: tuple = (100,)
    N_values: tuple = (100, 500, 1000, 2000)
    repetitions: int = 20
    seed: int = 0
    lambdas: tuple = (0.01,)
    mode: str = "both"
    tau: float = 0.0
    balance: float = 0.5
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.T_values or any(int(t) < 1 for t in self.T_values):
            raise ConfigError("T values must be positive integers")
        if not self.N_values or any(int(n) < 2 for n in self.N_values):
            raise ConfigError("N values must be integers >= 2")
        if not self.lambdas or any(not np.isfinite(v) or v < 0 for v in self.lambdas):
            raise ConfigError("lambda values must be finite and >= 0")
        if not 0.0 <= self.balance <= 1.0:
            raise ConfigError(f"balance must lie in [0, 1], got {self.balance}")
        for key in ("trees_per_forest", "seed", "baseline", "lambda", "tau"):
            if key in self.overrides:
                raise ConfigError(f"{key!r} is set by the experiment itself, not by overrides")
        object.__setattr__(self, "T_values", tuple(int(t) for t in self.T_values))
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))

    def to_dict(self) -> dict:
        return {"dataset": str(self.dataset), "T_values": list(self.T_values),
                "N_values": list(self.N_values), "repetitions": int(self.repetitions),
                "seed": int(self.seed), "lambdas": list(self.lambdas), "mode": self.mode,
                "tau": float(self.tau), "balance": float(self.balance),
                "overrides": self.overrides}


@dataclass
class Cell:
    T: int
    N: int
    mode: str
    lam: float | None
    accuracies: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        a = np.asarray(self.accuracies)
        return float(a.std(ddof=1)) if a.size > 1 else 0.0

    def to_dict(self) -> dict:
        return {"T": self.T, "N": self.N, "mode": self.mode, "lambda": self.lam,
                "accuracies": [float(v) for v in self.accuracies],
                "mean": self.mean, "std": self.std}


@dataclass
class AccuracyReport:
    spec: ExperimentSpec
    cells: list
    runtime: float | None = None

    def cell(self, T, N, mode, lam=None) -> Cell:
        """A single cell; weighted mode without ``lam`` gives the tuned cell."""
        if mode == SDF and lam is None:
            return self.tuned(T, N)
        for c in self.cells:
            if c.T == T and c.N == N and c.mode == mode and (mode == GCF or c.lam == lam):
                return c
        raise KeyError((T, N, mode, lam))

    def tuned(self, T, N) -> Cell:
        """Weighted cell with the best mean accuracy over the lambda grid."""
        cands = [c for c in self.cells if c.T == T and c.N == N and c.mode == SDF]
        if not cands:
            raise KeyError((T, N, SDF))
        best = cands[0]
        for c in cands[1:]:
            if c.mean > best.mean:
                best = c
        return best

    def to_dict(self, timings: bool = False) -> dict:
        out = {"spec": self.spec.to_dict(), "cells": [c.to_dict() for c in self.cells]}
        tuned = []
        for T in self.spec.T_values:
            for N in self.spec.N_values:
                row = {"T": T, "N": N}
                if self.spec.mode in (GCF, "both"):
                    row["gcf_mean"] = self.cell(T, N, GCF).mean
                if self.spec.mode in (SDF, "both"):
                    best = self.tuned(T, N)
                    row["sdf_mean"] = best.mean
                    row["sdf_lambda"] = best.lam
                tuned.append(row)
        out["summary"] = tuned
        if timings and self.runtime is not None:
            out["runtime_seconds"] = self.runtime
        return out

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=1) + "\n"

    def table(self) -> str:
        """Text table: one row per N, a ``gcF / SDF`` column per T."""
        head = ["N"] + [f"T={T}" for T in self.spec.T_values]
        rows = [head]
        for N in self.spec.N_values:
            row = [str(N)]
            for T in self.spec.T_values:
                parts = []
                if self.spec.mode in (GCF, "both"):
                    parts.append(f"{self.cell(T, N, GCF).mean:.3f}")
                if self.spec.mode in (SDF, "both"):
                    parts.append(f"{self.tuned(T, N).mean:.3f}")
                row.append(" / ".join(parts))
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        label = {GCF: "gcF", SDF: "SDF", "both": "gcF / SDF"}[self.spec.mode]
        lines = [f"mean accuracy ({label}), {self.spec.repetitions} repetitions"]
        for r in rows:
            lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        return "\n".join(lines)


def run_experiment(spec: ExperimentSpec, ds: LabeledDataset,
                   base: CascadeConfig | None = None, progress=None) -> AccuracyReport:
    """Run every (repetition, N, T) cell; ``progress`` gets one string per cell."""
    t0 = time.perf_counter()
    base = base or CascadeConfig.from_dict(dict(spec.overrides))
    base = replace(base, tau=spec.tau)
    cells = {}

    def cell(T, N, mode, lam):
        key = (T, N, mode, lam)
        if key not in cells:
            cells[key] = Cell(T, N, mode, lam)
        return cells[key]

    for T in spec.T_values:
        for N in spec.N_values:
            if spec.mode in (GCF, "both"):
                cell(T, N, GCF, None)
            if spec.mode in (SDF, "both"):
                for lam in spec.lambdas:
                    cell(T, N, SDF, lam)

    for r in range(spec.repetitions):
        for N in spec.N_values:
            pairs = generate_pairs(ds, N + n_test_pairs(N), spec.balance,
                                   derive_seed(spec.seed, r, N, 0))
            train, test = split_pairs(pairs, N, derive_seed(spec.seed, r, N, 1))
            Xa, Xb = test.X[test.i], test.X[test.j]
            for T in spec.T_values:
                cache = ForestCache()
                cfg = replace(base, trees_per_forest=T, seed=derive_seed(spec.seed, r, N, 2))
                runs = []
                if spec.mode in (GCF, "both"):
                    runs.append((GCF, None, replace(cfg, baseline=True)))
                if spec.mode in (SDF, "both"):
                    for lam in spec.lambdas:
                        runs.append((SDF, lam, replace(cfg, baseline=False,
                                                        qp=replace(cfg.qp, lam=lam))))
                for mode, lam, c in runs:
                    model = train_cascade(train, c, cache)
                    acc = accuracy(model.predict_diffs(Xa, Xb), test.y, spec.tau)
                    cell(T, N, mode, lam).accuracies.append(acc)
                    if progress is not None:
                        tag = mode if lam is None else f"{mode}(lambda={lam:g})"
                        progress(f"rep {r + 1}/{spec.repetitions} N={N} T={T} {tag}: "
                                 f"{acc:.4f} ({len(model.levels)} levels)")
    return AccuracyReport(spec, list(cells.values()), time.perf_counter() - t0)
