"""
Linker Module
Signature → grade linking: random forest (low/high), LASSO regression, LOO cross-validation.
"""
from .data import LabeledSignature, SignatureDataset, as_dataset, binary_label
from .forest import Tree, ForestModel, best_split, grow_tree, fit_forest, fit_forest_arrays
from .lasso import LassoModel, soft_threshold, lasso_objective, fit_lasso, fit_lasso_arrays, select_alpha
from .metrics import METRIC_KEYS, ConfusionMetrics, confusion_metrics
from .importance import ImportanceTable, importance_stability
from .crossval import (
    FoldPrediction, FoldFailure, GradeSummary, MetricsReport, MajorityClassifier,
    forest_factory, majority_factory, fold_seed, loo_cv,
)
from .reports import metrics_document, write_metrics_json, write_importance, write_regression
