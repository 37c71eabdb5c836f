"""Structured regression forest mapping appearance descriptors to motion patches."""

from .forest import (StructuredForest, forest_predict_patch, merge_forests, predict_flow_image,
                     train_forest, tree_seeds)
from .modelio import dumps_model, load_model, loads_model, save_model
from .splits import (SplitRecord, SplitResult, SplitType, best_split, best_split_arrays,
                     draw_candidate, node_variance, split_response, split_values)
from .tree import GrowthTrace, RegressionTree, grow_tree

__all__ = [
    "GrowthTrace", "RegressionTree", "SplitRecord", "SplitResult", "SplitType",
    "StructuredForest", "best_split", "best_split_arrays", "draw_candidate", "dumps_model",
    "forest_predict_patch", "grow_tree", "load_model", "loads_model", "merge_forests",
    "node_variance", "predict_flow_image", "save_model", "split_response", "split_values",
    "train_forest", "tree_seeds",
]
