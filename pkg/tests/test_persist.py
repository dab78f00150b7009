import copy
import json
from dataclasses import replace

import numpy as np
import pytest

from sdforest.cascade import CascadeConfig, train_cascade
from sdforest.errors import DataError, ModelFormatError
from sdforest.persist import dumps_model, load_model, loads_model, model_to_json, save_model
from sdforest.scanning import ScanConfig

CFG = CascadeConfig(trees_per_forest=5, max_levels=2, seed=3)


@pytest.fixture(scope="module")
def trained():
    from conftest import blobs
    from sdforest.data import generate_pairs, split_pairs
    pd = generate_pairs(blobs(0), 150, seed=1)
    train, test = split_pairs(pd, 90, seed=2)
    return train_cascade(train, CFG), test


def _diffs(m, test):
    return m.predict_diffs(test.X[test.i], test.X[test.j])


def test_round_trip_is_exact(trained, tmp_path):
    m, test = trained
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    np.testing.assert_array_equal(_diffs(back, test), _diffs(m, test))
    assert dumps_model(back) == path.read_text()
    assert back.config == m.config and back.metadata == m.metadata


def test_round_trip_with_scanning(small_split):
    train, test = small_split
    cfg = replace(CFG, scanning=ScanConfig(enabled=True, divisors=(2,), trees_per_forest=3))
    m = train_cascade(train, cfg)
    back = loads_model(dumps_model(m))
    np.testing.assert_array_equal(_diffs(back, test), _diffs(m, test))


def test_file_is_canonical_json(trained):
    m, _ = trained
    text = dumps_model(m)
    obj = json.loads(text)
    assert obj["format_version"] == 1
    assert text == json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _first_forest(obj):
    return obj["levels"][0]["forests"][0][0]


def _first_internal(tree):
    return next(k for k, n in enumerate(tree["nodes"]) if "f" in n)


def _corrupt(obj, how):
    o = copy.deepcopy(obj)
    forest = _first_forest(o)
    tree = forest["trees"][0]
    leaf = next(n for n in tree["nodes"] if "dist" in n)
    k = _first_internal(tree)
    if how == "version":
        o["format_version"] = 2
    elif how == "weights_sum":
        forest["weights"][0] += 0.5
    elif how == "weights_negative":
        forest["weights"][0] = -0.1
        forest["weights"][1] += 0.1
    elif how == "weights_count":
        forest["weights"].pop()
    elif how == "leaf_dist":
        leaf["dist"] = [0.7, 0.7]
    elif how == "child_backwards":
        tree["nodes"][k]["l"] = k
    elif how == "feature_range":
        tree["nodes"][k]["f"] = tree["width"]
    elif how == "kind":
        forest["kind"] = "gradient_boosting"
    elif how == "width_chain":
        o["levels"][1]["input_width"] += 1
    elif how == "augmentation":
        o["levels"][0]["augmentation"] = "accumulate"
    elif how == "missing_key":
        del o["d"]
    elif how == "config_key":
        o["config"]["bogus"] = 1
    elif how == "extra_node_key":
        leaf["extra"] = 1
    elif how == "no_levels":
        o["levels"] = []
    return o


@pytest.mark.parametrize("how", ["version", "weights_sum", "weights_negative", "weights_count",
                                 "leaf_dist", "child_backwards", "feature_range", "kind",
                                 "width_chain", "augmentation", "missing_key", "config_key",
                                 "extra_node_key", "no_levels"])
def test_corrupted_files_rejected(trained, how):
    m, _ = trained
    bad = _corrupt(model_to_json(m), how)
    with pytest.raises(ModelFormatError):
        loads_model(json.dumps(bad))


def test_simplex_violation_names_location(trained):
    m, _ = trained
    bad = _corrupt(model_to_json(m), "weights_sum")
    with pytest.raises(ModelFormatError, match=r"simplex violation \(level 1, slot 0, fold 0\)"):
        loads_model(json.dumps(bad))
    with pytest.raises(ModelFormatError, match="unsupported format_version"):
        loads_model(json.dumps(_corrupt(model_to_json(m), "version")))


def test_shared_child_rejected(trained):
    m, _ = trained
    o = model_to_json(m)
    tree = _first_forest(o)["trees"][0]
    k = _first_internal(tree)
    tree["nodes"][k]["r"] = tree["nodes"][k]["l"]
    with pytest.raises(ModelFormatError):
        loads_model(json.dumps(o))


def test_not_json_and_io_errors(tmp_path):
    with pytest.raises(ModelFormatError):
        loads_model("{not json")
    with pytest.raises(ModelFormatError):
        loads_model("[1, 2]")
    with pytest.raises(DataError):
        load_model(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{}")
    with pytest.raises(ModelFormatError, match="bad.json"):
        load_model(p)
