"""JSON model files.

Layout (``format_version`` 1)::

    {"format_version": 1, "d": 7, "config": {...}, "metadata": {...},
     "scanning": null | {"config": {...}, "d": 7, "sizes": [...],
                         "forests": [[forest, forest], ...]},
     "levels": [{"input_width": 14, "base_width": 14, "augmentation": "replace",
                 "forests": [[forest, ...per fold], ...per slot]}, ...]}

    forest: {"kind": ..., "weights": [...], "trees": [tree, ...]}
    tree:   {"width": w, "seed": s, "config": {...},
             "nodes": [{"f": 3, "thr": 0.25, "l": 1, "r": 2}, {"dist": [p0, p1]}, ...]}

Node 0 is the root and children always carry larger indices than their
parent.  Keys are sorted and floats written in shortest round-trip form, so
equal models give byte-identical files and reloading is bit-exact.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .cascade import CascadeConfig, Level, SDFModel
from .errors import ConfigError, DataError, InvariantError, ModelFormatError
from .forest import Forest, check_simplex
from .scanning import ScanConfig, Scanners
from .trees import KINDS, DecisionTree, TreeConfig

FORMAT_VERSION = 1
DIST_TOL = 1e-12


# ---------------------------------------------------------------------------
# encoding

def _tree_to_json(t: DecisionTree) -> dict:
    nodes = []
    for k in range(t.n_nodes):
        if t.feature[k] < 0:
            p = float(t.p0[k])
            nodes.append({"dist": [p, 1.0 - p]})
        else:
            nodes.append({"f": int(t.feature[k]), "thr": float(t.threshold[k]),
                          "l": int(t.left[k]), "r": int(t.right[k])})
    return {"width": int(t.width), "seed": int(t.seed), "config": t.config.to_dict(),
            "nodes": nodes}


def _forest_to_json(f: Forest) -> dict:
    return {"kind": f.kind, "weights": [float(v) for v in f.weights],
            "trees": [_tree_to_json(t) for t in f.trees]}


def model_to_json(m: SDFModel) -> dict:
    scan = None
    if m.scanners is not None:
        s = m.scanners
        scan = {"config": s.config.to_dict(), "d": int(s.d), "sizes": [int(L) for L in s.sizes],
                "forests": [[_forest_to_json(f) for f in fs] for fs in s.forests]}
    levels = [{"input_width": int(lv.input_width), "base_width": int(lv.base_width),
               "augmentation": lv.augmentation,
               "forests": [[_forest_to_json(f) for f in row] for row in lv.forests]}
              for lv in m.levels]
    return {"format_version": FORMAT_VERSION, "d": int(m.d), "config": m.config.to_dict(),
            "metadata": m.metadata, "scanning": scan, "levels": levels}


def dumps_model(m: SDFModel) -> str:
    try:
        return json.dumps(model_to_json(m), sort_keys=True, separators=(",", ":"),
                          allow_nan=False) + "\n"
    except ValueError as exc:
        raise InvariantError(f"model holds a non-finite value: {exc}") from exc


def save_model(m: SDFModel, path) -> None:
    text = dumps_model(m)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write model to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# decoding

def _need(obj, key, typ, where):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object")
    if key not in obj:
        raise ModelFormatError(f"{where}: missing key {key!r}")
    v = obj[key]
    if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise ModelFormatError(f"{where}.{key}: expected an integer")
    if typ is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
        raise ModelFormatError(f"{where}.{key}: expected a number")
    if typ in (list, dict, str) and not isinstance(v, typ):
        raise ModelFormatError(f"{where}.{key}: expected {typ.__name__}")
    return v


def _tree_from_json(obj, where) -> DecisionTree:
    width = _need(obj, "width", int, where)
    seed = _need(obj, "seed", int, where)
    cfg_in = _need(obj, "config", dict, where)
    nodes = _need(obj, "nodes", list, where)
    if width < 1:
        raise ModelFormatError(f"{where}: width must be positive")
    if not nodes:
        raise ModelFormatError(f"{where}: tree has no nodes")
    try:
        cfg = TreeConfig(**cfg_in)
    except (TypeError, ConfigError) as exc:
        raise ModelFormatError(f"{where}.config: {exc}") from exc
    n = len(nodes)
    feature = np.full(n, -1, np.int32)
    threshold = np.zeros(n)
    left = np.full(n, -1, np.int32)
    right = np.full(n, -1, np.int32)
    p0 = np.zeros(n)
    parents = np.zeros(n, np.int64)
    for k, node in enumerate(nodes):
        here = f"{where}.nodes[{k}]"
        if not isinstance(node, dict):
            raise ModelFormatError(f"{here}: expected an object")
        if "dist" in node:
            if set(node) != {"dist"}:
                raise ModelFormatError(f"{here}: leaf must hold only 'dist'")
            dist = node["dist"]
            if (not isinstance(dist, list) or len(dist) != 2
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in dist)):
                raise ModelFormatError(f"{here}: dist must be two numbers")
            a, b = float(dist[0]), float(dist[1])
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0) or abs(a + b - 1.0) > DIST_TOL:
                raise ModelFormatError(f"{here}: leaf distribution {dist} is not normalized")
            p0[k] = a
        else:
            if set(node) != {"f", "thr", "l", "r"}:
                raise ModelFormatError(f"{here}: internal node needs exactly f, thr, l, r")
            f = _need(node, "f", int, here)
            thr = _need(node, "thr", float, here)
            lc = _need(node, "l", int, here)
            rc = _need(node, "r", int, here)
            if not 0 <= f < width:
                raise ModelFormatError(f"{here}: feature {f} outside [0, {width})")
            if not math.isfinite(thr):
                raise ModelFormatError(f"{here}: non-finite threshold")
            for c in (lc, rc):
                if not k < c < n:
                    raise ModelFormatError(f"{here}: child {c} must lie in ({k}, {n})")
                parents[c] += 1
            if lc == rc:
                raise ModelFormatError(f"{here}: both children are node {lc}")
            feature[k], threshold[k], left[k], right[k] = f, thr, lc, rc
    if parents[0] != 0 or np.any(parents[1:] != 1):
        raise ModelFormatError(f"{where}: nodes do not form a single tree")
    return DecisionTree(feature, threshold, left, right, p0, width, cfg, seed)


def _forest_from_json(obj, where) -> Forest:
    kind = _need(obj, "kind", str, where)
    if kind not in KINDS:
        raise ModelFormatError(f"{where}: unknown forest kind {kind!r}")
    weights = _need(obj, "weights", list, where)
    trees_in = _need(obj, "trees", list, where)
    if not trees_in:
        raise ModelFormatError(f"{where}: forest has no trees")
    if len(weights) != len(trees_in):
        raise ModelFormatError(f"{where}: {len(weights)} weights for {len(trees_in)} trees")
    try:
        w = np.array(weights, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{where}: weights must be numbers") from exc
    try:
        check_simplex(w, where=where)
    except InvariantError as exc:
        raise ModelFormatError(str(exc)) from exc
    trees = tuple(_tree_from_json(t, f"{where}.trees[{i}]") for i, t in enumerate(trees_in))
    for i, t in enumerate(trees):
        if t.config.kind != kind:
            raise ModelFormatError(f"{where}.trees[{i}]: tree kind {t.config.kind!r} "
                                   f"in a {kind!r} forest")
    try:
        return Forest(trees, kind, w)
    except (InvariantError, DataError) as exc:
        raise ModelFormatError(f"{where}: {exc}") from exc


def model_from_json(obj) -> SDFModel:
    if not isinstance(obj, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r} "
                               f"(expected {FORMAT_VERSION})")
    d = _need(obj, "d", int, "model")
    if d < 1:
        raise ModelFormatError("model.d must be positive")
    try:
        cfg = CascadeConfig.from_dict(_need(obj, "config", dict, "model"))
    except ConfigError as exc:
        raise ModelFormatError(f"model.config: {exc}") from exc
    metadata = _need(obj, "metadata", dict, "model")

    scanners = None
    scan = obj.get("scanning")
    if scan is not None:
        try:
            scfg = ScanConfig.from_dict(_need(scan, "config", dict, "scanning"))
        except (ConfigError, TypeError) as exc:
            raise ModelFormatError(f"scanning.config: {exc}") from exc
        sizes = _need(scan, "sizes", list, "scanning")
        fs_in = _need(scan, "forests", list, "scanning")
        forests = tuple(tuple(_forest_from_json(f, f"scanning size {s}, forest {i}")
                              for i, f in enumerate(fs))
                        for s, fs in enumerate(fs_in))
        try:
            scanners = Scanners(scfg, _need(scan, "d", int, "scanning"),
                                tuple(int(L) for L in sizes), forests)
        except (DataError, InvariantError) as exc:
            raise ModelFormatError(f"scanning: {exc}") from exc

    levels = []
    for q, lv in enumerate(_need(obj, "levels", list, "model"), start=1):
        where = f"level {q}"
        grid_in = _need(lv, "forests", list, where)
        grid = tuple(tuple(_forest_from_json(f, f"level {q}, slot {k}, fold {j}")
                           for j, f in enumerate(row))
                     for k, row in enumerate(grid_in))
        try:
            levels.append(Level(grid, _need(lv, "input_width", int, where),
                                _need(lv, "base_width", int, where),
                                _need(lv, "augmentation", str, where)))
        except (DataError, InvariantError) as exc:
            raise ModelFormatError(f"{where}: {exc}") from exc
    try:
        return SDFModel(tuple(levels), cfg, d, scanners, metadata)
    except (DataError, InvariantError) as exc:
        raise ModelFormatError(f"model: {exc}") from exc


def loads_model(text: str) -> SDFModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_json(obj)


def load_model(path) -> SDFModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    try:
        return loads_model(text)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
