"""Deep-forest metric learning on concatenated example pairs with learned tree weights."""

from .cascade import (CascadeConfig, Level, PairVerdict, SDFModel, augment, predict_batch,
                      predict_pair, train_cascade, uniform_predict_pair)
from .data import (LabeledDataset, Pair, PairDataset, Sample, concatenate_pair,
                   generate_pairs, load_csv, split_pairs)
from .errors import ConfigError, DataError, InvariantError, ModelFormatError, SDFError
from .forest import Forest, fit_forest, set_weights, tree_probabilities, weighted_class_vector
from .persist import load_model, save_model
from .scanning import ScanConfig, extract_window_pairs, fit_scanners, transform_pair
from .trees import DecisionTree, TreeConfig, fit_tree, predict_distribution
from .weightopt import (QPConfig, build_p_matrix, objective, project_simplex, solve_all,
                        solve_weights)

__version__ = "0.1.0"

__all__ = [
    "CascadeConfig", "ConfigError", "DataError", "DecisionTree", "Forest", "InvariantError",
    "LabeledDataset", "Level", "ModelFormatError", "Pair", "PairDataset", "PairVerdict",
    "QPConfig", "SDFError", "SDFModel", "Sample", "ScanConfig", "TreeConfig", "augment",
    "build_p_matrix", "concatenate_pair", "extract_window_pairs", "fit_forest", "fit_scanners",
    "fit_tree", "generate_pairs", "load_csv", "load_model", "objective", "predict_batch",
    "predict_distribution", "predict_pair", "project_simplex", "save_model", "set_weights",
    "solve_all", "solve_weights", "split_pairs", "train_cascade", "transform_pair",
    "tree_probabilities", "uniform_predict_pair", "weighted_class_vector",
]
