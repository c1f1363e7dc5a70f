"""
Leave-One-Out Cross-Validation
Binary low/high forest classification and LASSO grade regression, each
trained on n−1 cases and scored on the held-out one.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr
from sklearn.model_selection import LeaveOneOut

from config.settings import settings
from config.logger_config import setup_logger
from utils.concurrency import run_concurrently
from utils.errors import DegenerateLabelError, InputError, PipelineError
from .data import DataLike, SignatureDataset, as_dataset
from .forest import fit_forest_arrays
from .importance import ImportanceTable, importance_stability
from .lasso import fit_lasso_arrays, select_alpha
from .metrics import ConfusionMetrics, confusion_metrics

logger = setup_logger("CrossVal", settings.log_level)

Task = Literal["binary_forest", "grade_lasso"]
DEFAULT_ALPHA_GRID = (0.001, 0.01, 0.05, 0.1, 0.5)


@dataclass(frozen=True)
class FoldPrediction:
    fold: int
    case_id: str
    truth: float
    predicted: float


@dataclass(frozen=True)
class FoldFailure:
    fold: int
    case_id: str
    reason: str


@dataclass
class GradeSummary:
    grade: int
    count: int
    mean: float
    sd: float


@dataclass
class MetricsReport:
    task: str
    n_folds: int
    predictions: List[FoldPrediction] = field(default_factory=list)
    failures: List[FoldFailure] = field(default_factory=list)
    metrics: Optional[ConfusionMetrics] = None
    importance: Optional[ImportanceTable] = None
    alphas: List[float] = field(default_factory=list)
    spearman: Optional[float] = None
    per_grade: List[GradeSummary] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return bool(self.failures)


class MajorityClassifier:
    """Predicts the training majority class (low on ties)."""
    importance = None

    def __init__(self, y: np.ndarray):
        counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=2)
        self.label = int(np.argmax(counts))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], self.label, dtype=np.int64)


ClassifierFactory = Callable[[np.ndarray, np.ndarray, int], object]


def forest_factory(n_trees: int = 100, mtry: Optional[int] = None) -> ClassifierFactory:
    def build(X: np.ndarray, y: np.ndarray, seed: int):
        return fit_forest_arrays(X, y, n_trees, mtry, seed)
    return build


def majority_factory(X: np.ndarray, y: np.ndarray, seed: int) -> MajorityClassifier:
    return MajorityClassifier(y)


def fold_seed(master_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([master_seed, fold]).generate_state(1)[0])


def _binary_fold(dataset: SignatureDataset, factory: ClassifierFactory, seed: int, fold: int, train, test):
    y = dataset.labels
    case_id = dataset.case_ids[test[0]]
    if np.unique(y[train]).size < 2:
        return FoldFailure(fold, case_id, "training set holds a single class")
    try:
        model = factory(dataset.X[train], y[train], fold_seed(seed, fold))
    except PipelineError as e:
        return FoldFailure(fold, case_id, str(e))
    predicted = int(model.predict(dataset.X[test])[0])
    importance = getattr(model, "importance", None)
    return FoldPrediction(fold, case_id, float(y[test[0]]), float(predicted)), importance


def _lasso_fold(dataset: SignatureDataset, grid: Sequence[float], max_iter: int, tol: float, fold: int, train, test):
    grades = dataset.grades.astype(np.float64)
    case_id = dataset.case_ids[test[0]]
    try:
        alpha = select_alpha(dataset.X[train], grades[train], grid, max_iter, tol)
        model = fit_lasso_arrays(dataset.X[train], grades[train], alpha, max_iter, tol)
    except PipelineError as e:
        return FoldFailure(fold, case_id, str(e))
    predicted = float(model.predict(dataset.X[test])[0])
    return FoldPrediction(fold, case_id, float(grades[test[0]]), predicted), alpha


def grade_summary(predictions: Sequence[FoldPrediction]) -> List[GradeSummary]:
    summary = []
    truths = np.array([p.truth for p in predictions])
    values = np.array([p.predicted for p in predictions])
    for grade in sorted(set(int(t) for t in truths)):
        chosen = values[truths == grade]
        sd = float(chosen.std(ddof=1)) if chosen.size >= 2 else 0.0
        summary.append(GradeSummary(grade, int(chosen.size), float(chosen.mean()), sd))
    return summary


def loo_cv(
    data: DataLike,
    task: Task,
    seed: int = 0,
    n_trees: int = 100,
    mtry: Optional[int] = None,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    max_iter: int = 10000,
    tol: float = 1e-8,
    top_n: int = 4,
    workers: int = 1,
    classifier_factory: Optional[ClassifierFactory] = None,
) -> MetricsReport:
    """
    One fold per case. Failed folds are recorded, excluded from scoring and
    flag the report. Fold seeds derive from ``seed`` and the fold index only.
    """
    dataset = as_dataset(data)
    n = len(dataset)
    if n < 3:
        raise InputError(f"leave-one-out needs at least 3 cases, got {n}")
    splits = list(enumerate(LeaveOneOut().split(dataset.X)))
    report = MetricsReport(task, n)

    if task == "binary_forest":
        factory = classifier_factory or forest_factory(n_trees, mtry)
        outcomes = run_concurrently(
            lambda item: _binary_fold(dataset, factory, seed, item[0], *item[1]), splits, workers
        )
        importances = []
        for outcome in outcomes:
            if isinstance(outcome, FoldFailure):
                report.failures.append(outcome)
                continue
            prediction, importance = outcome
            report.predictions.append(prediction)
            if importance is not None:
                importances.append(importance)
        if not report.predictions:
            raise DegenerateLabelError("every fold failed; no held-out predictions")
        report.metrics = confusion_metrics(
            [int(p.predicted) for p in report.predictions], [int(p.truth) for p in report.predictions]
        )
        if importances:
            report.importance = importance_stability(np.vstack(importances), top_n)
    elif task == "grade_lasso":
        outcomes = run_concurrently(
            lambda item: _lasso_fold(dataset, alpha_grid, max_iter, tol, item[0], *item[1]), splits, workers
        )
        for outcome in outcomes:
            if isinstance(outcome, FoldFailure):
                report.failures.append(outcome)
                continue
            prediction, alpha = outcome
            report.predictions.append(prediction)
            report.alphas.append(alpha)
        if report.predictions:
            truths = [p.truth for p in report.predictions]
            values = [p.predicted for p in report.predictions]
            if np.ptp(truths) > 0 and np.ptp(values) > 0:
                report.spearman = float(spearmanr(truths, values)[0])
            report.per_grade = grade_summary(report.predictions)
    else:
        raise InputError(f"unknown task {task!r}")

    for failure in report.failures:
        logger.warning(f"⚠️ Fold {failure.fold} ({failure.case_id}) failed: {failure.reason}")
    return report
