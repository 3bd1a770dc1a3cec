"""Regression random forests built for inference, not just prediction.

Subsample-based ensembles with a grouped variance estimator, normal-theory
confidence intervals, chi-square tests for feature effects and
interactions, a tree-swap permutation test, a catalog of variable
importance measures (including the known-biased classics), and simulation
harnesses that reproduce the associated empirical phenomena at desk scale.
"""

from .data import (
    Dataset,
    StrataSpec,
    augment_noise,
    conditional_permute_feature,
    default_strata,
    draw_subsample,
    drop_feature,
    from_arrays,
    load_csv,
    permute_feature,
)
from .forest import (
    Forest,
    ForestParams,
    fit_forest,
    load_model,
    oob_error,
    predict,
    predict_matrix,
    save_model,
)
from .importance import (
    ImportanceReport,
    impurity_importance,
    oob_permutation_importance,
    rebuild_importance,
)
from .inference import (
    Moments,
    PairedForests,
    TestResult,
    Transform,
    chi2_test,
    confidence_interval,
    estimate_moments,
    fit_paired,
    paired_difference_test,
    test_effect,
    test_interaction,
    tree_swap_test,
)
from .tree import Tree, TreeParams, best_split, fit_tree, predict_tree, split_gains

__all__ = [
    "Dataset",
    "StrataSpec",
    "augment_noise",
    "conditional_permute_feature",
    "default_strata",
    "draw_subsample",
    "drop_feature",
    "from_arrays",
    "load_csv",
    "permute_feature",
    "Forest",
    "ForestParams",
    "fit_forest",
    "load_model",
    "oob_error",
    "predict",
    "predict_matrix",
    "save_model",
    "ImportanceReport",
    "impurity_importance",
    "oob_permutation_importance",
    "rebuild_importance",
    "Moments",
    "PairedForests",
    "TestResult",
    "Transform",
    "chi2_test",
    "confidence_interval",
    "estimate_moments",
    "fit_paired",
    "paired_difference_test",
    "test_effect",
    "test_interaction",
    "tree_swap_test",
    "Tree",
    "TreeParams",
    "best_split",
    "fit_tree",
    "predict_tree",
    "split_gains",
]

__version__ = "0.1.0"
