"""
Forest, LASSO, metrics and leave-one-out linking of signatures to grade.
"""
import csv
import json

import numpy as np
import pytest

from modules.linker import (
    METRIC_KEYS, LabeledSignature, SignatureDataset, best_split, confusion_metrics, fit_forest,
    fit_forest_arrays, fit_lasso_arrays, fold_seed, importance_stability, lasso_objective, loo_cv,
    majority_factory, select_alpha, soft_threshold, write_importance, write_metrics_json, write_regression,
)
from modules.signature import Signature
from utils.errors import DegenerateLabelError, InputError


def _separable(n_per_class: int = 6) -> SignatureDataset:
    rng = np.random.default_rng(8)
    low = np.column_stack([rng.uniform(0.0, 0.2, n_per_class), rng.uniform(0, 1, n_per_class)])
    high = np.column_stack([rng.uniform(0.8, 1.0, n_per_class), rng.uniform(0, 1, n_per_class)])
    grades = [0, 1] * (n_per_class // 2) + [2, 3] * (n_per_class // 2)
    return SignatureDataset(
        [f"case_{i}" for i in range(2 * n_per_class)], np.vstack([low, high]), np.array(grades)
    )


# ============== LASSO ==============

def test_soft_threshold():
    assert soft_threshold(2.0, 0.5) == 1.5
    assert soft_threshold(-2.0, 0.5) == -1.5
    assert soft_threshold(0.3, 0.5) == 0.0


@pytest.mark.parametrize("alpha, expected", [(0.0, 2.0), (0.5, 1.5), (2.0, 0.0), (3.0, 0.0)])
def test_lasso_single_feature_closed_form(alpha, expected):
    model = fit_lasso_arrays(np.array([[1.0], [-1.0]]), np.array([2.0, -2.0]), alpha)
    assert model.coef[0] == pytest.approx(expected, abs=1e-12)
    assert model.intercept == 0.0
    assert model.predict(np.array([[1.0]]))[0] == pytest.approx(expected, abs=1e-12)


def test_lasso_objective_never_increases():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((20, 5))
    y = X @ np.array([1.0, 0.0, -2.0, 0.5, 0.0]) + 0.1 * rng.standard_normal(20)
    model = fit_lasso_arrays(X, y, 0.05)
    history = model.objective_history
    for before, after in zip(history, history[1:]):
        assert after <= before + 1e-12
    Z = model.standardize(X)
    assert lasso_objective(Z, y, model.coef, model.intercept, 0.05) == pytest.approx(history[-1])


def _grid_minimum(Z, y, alpha, center, half_width, step):
    axis = np.arange(-half_width, half_width + step / 2, step)
    b1, b2 = np.meshgrid(center[0] + axis, center[1] + axis, indexing="ij")
    coefs = np.stack([b1.ravel(), b2.ravel()], axis=1)
    residual = y[None, :] - y.mean() - coefs @ Z.T
    values = np.sum(residual ** 2, axis=1) / (2 * y.size) + alpha * np.abs(coefs).sum(axis=1)
    best = int(np.argmin(values))
    return float(values[best]), coefs[best]


def test_lasso_matches_grid_search_on_small_problems():
    rng = np.random.default_rng(21)
    for _ in range(20):
        X = rng.standard_normal((4, 2))
        y = rng.standard_normal(4)
        alpha = float(rng.uniform(0.2, 0.6))
        model = fit_lasso_arrays(X, y, alpha, max_iter=100000, tol=1e-10)
        Z = model.standardize(X)
        found = lasso_objective(Z, y, model.coef, model.intercept, alpha)
        coarse, center = _grid_minimum(Z, y, alpha, (0.0, 0.0), 6.0, 0.02)
        fine, _ = _grid_minimum(Z, y, alpha, center, 0.1, 0.0005)
        assert found <= min(coarse, fine) + 1e-12
        assert abs(found - fine) <= 2e-3


def test_lasso_constant_column_stays_zero():
    X = np.column_stack([np.arange(6.0), np.full(6, 3.0)])
    model = fit_lasso_arrays(X, np.arange(6.0), 0.0)
    assert model.coef[1] == 0.0


def test_lasso_rejects_bad_input():
    with pytest.raises(InputError):
        fit_lasso_arrays(np.zeros((1, 2)), np.zeros(1), 0.1)
    with pytest.raises(InputError):
        fit_lasso_arrays(np.zeros((3, 2)), np.zeros(3), -1.0)


def test_select_alpha_prefers_small_penalty_on_clean_data():
    X = np.linspace(0, 1, 10)[:, None]
    assert select_alpha(X, 3 * X[:, 0], [2.0, 0.001]) == 0.001


def test_select_alpha_without_room_for_inner_folds_takes_first_value():
    assert select_alpha(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), [0.5, 0.01]) == 0.5
    with pytest.raises(InputError):
        select_alpha(np.zeros((4, 1)), np.zeros(4), [])


def test_lasso_large_alpha_zeroes_every_coefficient():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((15, 4))
    y = X @ np.array([1.5, -0.5, 0.0, 2.0]) + rng.standard_normal(15)
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    alpha_max = float(np.max(np.abs(Z.T @ (y - y.mean()))) / y.size)

    at_max = fit_lasso_arrays(X, y, alpha_max * (1 + 1e-9))
    np.testing.assert_array_equal(at_max.coef, np.zeros(4))
    assert at_max.predict(X) == pytest.approx(np.full(15, y.mean()))
    assert np.any(fit_lasso_arrays(X, y, 0.9 * alpha_max).coef != 0.0)


# ============== METRICS ==============

def test_confusion_metrics_known_counts():
    truths = [1] * 9 + [0] * 5
    predictions = [1] * 7 + [0] * 2 + [0] * 3 + [1] * 2
    m = confusion_metrics(predictions, truths)
    assert (m.tp, m.fn, m.tn, m.fp) == (7, 2, 3, 2)
    assert m.sensitivity == pytest.approx(7 / 9, abs=1e-12)
    assert m.specificity == pytest.approx(0.6, abs=1e-12)
    assert m.accuracy == pytest.approx(10 / 14, abs=1e-12)
    assert m.f1 == pytest.approx(7 / 9, abs=1e-12)
    assert set(m.as_dict()) == set(METRIC_KEYS)


def test_confusion_metrics_zero_division_is_flagged():
    m = confusion_metrics([0, 0], [0, 0])
    assert m.sensitivity == 0.0
    assert "sensitivity" in m.zero_division
    assert m.specificity == 1.0


def test_confusion_metrics_rejects_mismatch():
    with pytest.raises(InputError):
        confusion_metrics([0, 1], [0])


# ============== FOREST ==============

def test_best_split_picks_midpoint():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    feature, threshold, decrease = best_split(X, y, [0])
    assert (feature, threshold) == (0, 1.5)
    assert decrease == pytest.approx(2.0)


def test_forest_on_separable_data():
    dataset = _separable()
    forest = fit_forest(dataset, n_trees=25, seed=3)
    np.testing.assert_array_equal(forest.predict(dataset.X), dataset.labels)
    assert forest.importance.sum() == pytest.approx(1.0)
    assert forest.importance[0] > forest.importance[1]


def test_forest_is_seed_deterministic_across_workers():
    dataset = _separable()
    serial = fit_forest_arrays(dataset.X, dataset.labels, 10, seed=5)
    threaded = fit_forest_arrays(dataset.X, dataset.labels, 10, seed=5, workers=4)
    np.testing.assert_array_equal(serial.importance, threaded.importance)


def test_forest_credits_all_importance_to_sole_separating_feature():
    rng = np.random.default_rng(10)
    labels = np.repeat([0, 1], 10)
    X = np.column_stack([labels + rng.uniform(0.0, 0.5, 20), rng.uniform(0, 1, 20)])
    forest = fit_forest_arrays(X, labels, n_trees=20, mtry=2, seed=1)
    assert forest.importance[0] == 1.0
    assert forest.importance[1] == 0.0


def test_forest_ignores_monotone_feature_transforms():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((30, 3))
    labels = (X[:, 0] + X[:, 1] + 0.5 * rng.standard_normal(30) > 0).astype(int)
    plain = fit_forest_arrays(X, labels, n_trees=15, seed=4)

    warped_X = X.copy()
    warped_X[:, 1] = np.exp(2.0 * X[:, 1])
    warped = fit_forest_arrays(warped_X, labels, n_trees=15, seed=4)
    np.testing.assert_array_equal(plain.importance, warped.importance)
    for a, b in zip(plain.trees, warped.trees):
        assert (a.feature, a.left, a.right) == (b.feature, b.left, b.right)

    # midpoint thresholds map onto midpoints only under affine maps, so out-of-bag
    # points keep their side of every split
    scaled_X = X.copy()
    scaled_X[:, 1] = 4.0 * X[:, 1] + 1.0
    scaled = fit_forest_arrays(scaled_X, labels, n_trees=15, seed=4)
    np.testing.assert_array_equal(plain.predict(X), scaled.predict(scaled_X))


def test_forest_single_class_is_degenerate():
    with pytest.raises(DegenerateLabelError):
        fit_forest_arrays(np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_importance_stability():
    table = importance_stability(np.array([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3]]), top_n=2)
    np.testing.assert_allclose(table.mean, [0.3, 0.45, 0.25])
    np.testing.assert_allclose(table.top_freq, [0.5, 1.0, 0.5])
    np.testing.assert_allclose(table.top1_freq, [0.5, 0.5, 0.0])
    assert table.modal_pair == (0, 1)
    assert table.modal_pair_freq == 0.5
    assert table.ranking().tolist() == [1, 0, 2]


def test_importance_stability_random_ranks_are_uniform():
    per_fold = np.random.default_rng(13).uniform(size=(4000, 10))
    table = importance_stability(per_fold, top_n=4)
    np.testing.assert_allclose(table.top_freq, 0.4, atol=0.05)
    np.testing.assert_allclose(table.top1_freq, 0.1, atol=0.03)


# ============== CROSS-VALIDATION ==============

def test_fold_seed_depends_on_fold_only():
    assert fold_seed(0, 3) == fold_seed(0, 3)
    assert fold_seed(0, 3) != fold_seed(0, 4)


def test_loo_forest_separable_is_perfect():
    report = loo_cv(_separable(), "binary_forest", seed=1, n_trees=15)
    assert report.n_folds == 12
    assert report.metrics.accuracy == 1.0
    assert not report.flagged
    assert report.importance.n_folds == 12


def test_loo_forest_is_worker_invariant():
    dataset = _separable()
    serial = loo_cv(dataset, "binary_forest", seed=2, n_trees=8)
    threaded = loo_cv(dataset, "binary_forest", seed=2, n_trees=8, workers=3)
    assert serial.predictions == threaded.predictions
    np.testing.assert_array_equal(serial.importance.per_fold, threaded.importance.per_fold)


def test_loo_flags_single_class_folds():
    data = [LabeledSignature(f"c{i}", np.array([i / 4, 1 - i / 4]), 0) for i in range(4)]
    data.append(LabeledSignature("high", np.array([0.9, 0.1]), 3))
    report = loo_cv(data, "binary_forest", n_trees=5)
    assert report.flagged
    assert [f.case_id for f in report.failures] == ["high"]
    assert len(report.predictions) == 4


def test_loo_majority_baseline():
    report = loo_cv(_separable(), "binary_forest", classifier_factory=majority_factory)
    assert report.importance is None
    assert report.metrics.accuracy == 0.0


def test_loo_needs_three_cases():
    data = [LabeledSignature("a", np.array([0.5, 0.5]), 0), LabeledSignature("b", np.array([0.2, 0.8]), 3)]
    with pytest.raises(InputError):
        loo_cv(data, "grade_lasso")


def test_loo_lasso_tracks_grade():
    rng = np.random.default_rng(4)
    grades = np.repeat([0, 1, 2, 3], 3)
    share = 0.2 + 0.2 * grades + rng.uniform(-0.02, 0.02, grades.size)
    dataset = SignatureDataset([f"g{i}" for i in range(grades.size)], np.column_stack([share, 1 - share]), grades)
    report = loo_cv(dataset, "grade_lasso", alpha_grid=[0.001, 0.01], tol=1e-10)
    assert len(report.predictions) == 12
    assert len(report.alphas) == 12
    assert report.spearman > 0.9
    assert [g.grade for g in report.per_grade] == [0, 1, 2, 3]


def test_loo_lasso_on_three_cases():
    dataset = SignatureDataset(["a", "b", "c"], np.array([[0.1], [0.5], [0.9]]), np.array([0, 1, 3]))
    report = loo_cv(dataset, "grade_lasso", alpha_grid=[0.01, 0.1])
    assert not report.failures
    assert [p.case_id for p in report.predictions] == ["a", "b", "c"]
    assert report.alphas == [0.01, 0.01, 0.01]
    assert [g.grade for g in report.per_grade] == [0, 1, 3]


def test_dataset_from_signatures_needs_grades():
    with pytest.raises(InputError):
        SignatureDataset.from_signatures([Signature("a", np.array([1.0]), 1, None)])


# ============== REPORTS ==============

def test_report_files(tmp_path):
    binary = loo_cv(_separable(), "binary_forest", n_trees=5)
    regression = loo_cv(_separable(), "grade_lasso", alpha_grid=[0.01])
    write_metrics_json(tmp_path / "metrics.json", binary, regression)
    document = json.loads((tmp_path / "metrics.json").read_text())
    assert set(document["metrics"]) == {"accuracy", "sensitivity", "specificity", "f1"}
    assert document["grade_lasso"]["n_folds"] == 12
    assert "top1_freq" in document["binary_forest"]["importance"]["clusters"][0]

    write_importance(tmp_path, binary.importance)
    with open(tmp_path / "importance.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["cluster", "mean", "sd", "top4_freq"]
    assert all(len(row) == 4 for row in rows)
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    assert (tmp_path / "importance.svg").read_text().startswith("<svg")
    assert (tmp_path / "importance.png").read_bytes()[:4] == b"\x89PNG"

    write_regression(tmp_path, regression)
    assert len((tmp_path / "regression.csv").read_text().splitlines()) == 13
