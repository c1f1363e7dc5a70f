"""
LASSO Regression
Cyclic coordinate descent with soft-thresholding on standardized features.

Objective: (1/2n)‖y − b − Zβ‖² + α‖β‖₁ with Z the population-standardized
design; the intercept b is mean(y).
"""
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from sklearn.model_selection import KFold

from config.settings import settings
from config.logger_config import setup_logger
from utils.errors import ConvergenceError, InputError
from .data import DataLike, as_dataset

logger = setup_logger("Lasso", settings.log_level)

# inner K-fold needs ≥ 2 training samples per fold
MIN_INNER_CV = 3


@dataclass
class LassoModel:
    coef: np.ndarray        # per standardized feature
    intercept: float
    alpha: float
    mean: np.ndarray
    std: np.ndarray
    n_sweeps: int = 0
    objective_history: List[float] = field(default_factory=list)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        scale = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (X - self.mean) / scale, 0.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + self.standardize(X) @ self.coef


def soft_threshold(value: float, alpha: float) -> float:
    return float(np.sign(value) * max(abs(value) - alpha, 0.0))


def lasso_objective(Z: np.ndarray, y: np.ndarray, coef: np.ndarray, intercept: float, alpha: float) -> float:
    residual = y - intercept - Z @ coef
    return float(residual @ residual / (2 * y.size) + alpha * np.sum(np.abs(coef)))


def fit_lasso_arrays(X: np.ndarray, y: np.ndarray, alpha: float,
                     max_iter: int = 10000, tol: float = 1e-8) -> LassoModel:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2 or y.size != n:
        raise InputError(f"LASSO needs at least 2 samples with matching targets, got X {X.shape}, y {y.shape}")
    if alpha < 0:
        raise InputError(f"alpha must be ≥ 0, got {alpha}")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    model = LassoModel(np.zeros(p), float(y.mean()), float(alpha), mean, std)
    Z = model.standardize(X)
    active = np.flatnonzero(std > 0)

    coef = model.coef
    residual = y - model.intercept
    model.objective_history.append(lasso_objective(Z, y, coef, model.intercept, alpha))
    change = np.inf
    for sweep in range(1, max_iter + 1):
        change = 0.0
        for j in active:
            old = coef[j]
            # standardized columns satisfy (1/n)·z_jᵀz_j = 1
            rho = Z[:, j] @ residual / n + old
            coef[j] = soft_threshold(rho, alpha)
            if coef[j] != old:
                residual -= Z[:, j] * (coef[j] - old)
                change = max(change, abs(coef[j] - old))
        model.objective_history.append(lasso_objective(Z, y, coef, model.intercept, alpha))
        model.n_sweeps = sweep
        if change < tol:
            return model
    raise ConvergenceError(f"LASSO (alpha={alpha:g}) did not converge in {max_iter} sweeps", change)


def fit_lasso(data: DataLike, alpha: float, max_iter: int = 10000, tol: float = 1e-8) -> LassoModel:
    """Regress grade (as a real number) on the signature."""
    dataset = as_dataset(data)
    return fit_lasso_arrays(dataset.X, dataset.grades.astype(np.float64), alpha, max_iter, tol)


def select_alpha(X: np.ndarray, y: np.ndarray, grid: Sequence[float],
                 max_iter: int = 10000, tol: float = 1e-8) -> float:
    """
    Grid value with the lowest inner K-fold (K = min(5, n)) mean squared error; first wins ties.
    Below MIN_INNER_CV samples an inner fold would train on a single case, so the first grid
    value is returned without scoring.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(grid) == 0:
        raise InputError("alpha grid is empty")
    if y.size < MIN_INNER_CV:
        logger.debug(f"{y.size} training case(s): inner CV skipped, alpha={grid[0]:g}")
        return float(grid[0])
    folds = list(KFold(n_splits=min(5, y.size)).split(X))
    best_alpha, best_mse = None, np.inf
    for alpha in grid:
        squared = 0.0
        for train, test in folds:
            model = fit_lasso_arrays(X[train], y[train], alpha, max_iter, tol)
            squared += float(np.sum((model.predict(X[test]) - y[test]) ** 2))
        mse = squared / y.size
        logger.debug(f"alpha={alpha:g} inner mse={mse:.6f}")
        if mse < best_mse:
            best_alpha, best_mse = float(alpha), mse
    return best_alpha
