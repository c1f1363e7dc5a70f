"""
Finite-Difference Gradient Checking
Central differences compared coordinate by coordinate against analytic gradients.
"""
from dataclasses import dataclass
from typing import Callable, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .layers import (
    Tensor,
    conv2d, conv2d_backward,
    dense, dense_backward,
    maxpool2, maxpool2_backward,
    mse,
    relu, relu_backward,
    sigmoid, sigmoid_backward,
    upsample2, upsample2_backward,
)

DEFAULT_EPSILON = 1e-3
ABS_TOL = 1e-6
REL_TOL = 1e-4


@dataclass
class GradCheckReport:
    """Per-coordinate deviations of analytic from numerical gradients."""
    abs_dev: np.ndarray
    rel_dev: np.ndarray
    n_skipped: int = 0

    @property
    def n_checked(self) -> int:
        return int(self.abs_dev.size)

    @property
    def max_abs(self) -> float:
        return float(self.abs_dev.max()) if self.abs_dev.size else 0.0

    @property
    def max_rel(self) -> float:
        return float(self.rel_dev.max()) if self.rel_dev.size else 0.0

    def within(self, abs_tol: float = ABS_TOL, rel_tol: float = REL_TOL) -> bool:
        """Each coordinate passes the looser of the absolute and relative bounds."""
        return bool(np.all((self.abs_dev <= abs_tol) | (self.rel_dev <= rel_tol)))


def finite_diff_check(
    fn: Callable[..., float],
    inputs: Sequence[Tensor],
    analytic: Sequence[Tensor],
    epsilon: float = DEFAULT_EPSILON,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    pattern: Optional[Callable[..., Hashable]] = None,
) -> GradCheckReport:
    """
    Compare ``analytic[i]`` with central differences of the scalar ``fn(*inputs)``.

    ``masks`` optionally restricts coordinates per input (boolean masks).
    ``pattern`` optionally fingerprints the piecewise-linear regime (relu signs,
    pool winners); coordinates whose ± perturbation changes it are skipped.
    Inputs are copied to float64 and never modified.
    """
    work = [np.array(x, dtype=np.float64, copy=True) for x in inputs]
    base_pattern = pattern(*work) if pattern is not None else None
    abs_devs: List[float] = []
    rel_devs: List[float] = []
    skipped = 0

    for idx, (x, grad) in enumerate(zip(work, analytic)):
        if grad.shape != x.shape:
            raise ValueError(f"analytic gradient {idx} has shape {grad.shape}, input has {x.shape}")
        mask = None if masks is None else masks[idx]
        flat = x.reshape(-1)
        grad_flat = np.asarray(grad, dtype=np.float64).reshape(-1)
        coords = range(flat.size) if mask is None else np.flatnonzero(np.asarray(mask).reshape(-1))
        for c in coords:
            original = flat[c]
            flat[c] = original + epsilon
            f_plus = fn(*work)
            p_plus = pattern(*work) if pattern is not None else None
            flat[c] = original - epsilon
            f_minus = fn(*work)
            p_minus = pattern(*work) if pattern is not None else None
            flat[c] = original
            if pattern is not None and (p_plus != base_pattern or p_minus != base_pattern):
                skipped += 1
                continue
            numeric = (f_plus - f_minus) / (2 * epsilon)
            dev = abs(numeric - grad_flat[c])
            abs_devs.append(dev)
            rel_devs.append(dev / max(abs(numeric), abs(grad_flat[c]), 1e-300))

    return GradCheckReport(np.asarray(abs_devs), np.asarray(rel_devs), skipped)


def check_layer(
    forward: Callable,
    backward: Callable,
    inputs: Sequence[Tensor],
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> GradCheckReport:
    """
    Check a ``(forward, backward)`` kernel pair.

    The output is projected on a fixed random tensor so the check runs on a
    scalar; the analytic side is ``backward(projection, cache)``.
    """
    inputs = [np.asarray(x, dtype=np.float64) for x in inputs]
    out, cache = forward(*inputs)
    projection = np.random.default_rng(seed).standard_normal(out.shape)
    grads = backward(projection, cache)
    analytic = [grads.d_input] + list(grads.d_params)

    def scalar(*xs):
        return float(np.sum(forward(*xs)[0] * projection))

    return finite_diff_check(scalar, inputs[:len(analytic)], analytic, epsilon, masks)


def _separated(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Random values with pairwise gaps ≥ 0.04 so no ±epsilon step flips a pool winner."""
    size = int(np.prod(shape))
    return (rng.permutation(size) * 0.05 + rng.uniform(0, 0.01, size)).reshape(shape) - size * 0.025


def layer_suite(seed: int, epsilon: float = DEFAULT_EPSILON) -> List[Tuple[str, GradCheckReport]]:
    """Gradient checks for every kernel at one random smooth point."""
    rng = np.random.default_rng(seed)
    results: List[Tuple[str, GradCheckReport]] = []

    x = rng.standard_normal((2, 5, 5))
    k = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    results.append(("conv2d", check_layer(conv2d, conv2d_backward, [x, k, b], epsilon, seed)))

    results.append(("maxpool2", check_layer(maxpool2, maxpool2_backward, [_separated(rng, (2, 4, 4))], epsilon, seed)))
    results.append(("upsample2", check_layer(upsample2, upsample2_backward, [rng.standard_normal((2, 3, 3))], epsilon, seed)))

    w = rng.standard_normal((3, 4))
    results.append(("dense", check_layer(dense, dense_backward, [rng.standard_normal(4), w, rng.standard_normal(3)], epsilon, seed)))

    r = rng.standard_normal((3, 6))
    results.append(("relu", check_layer(relu, relu_backward, [r], epsilon, seed, masks=[np.abs(r) > 0.1])))
    results.append(("sigmoid", check_layer(sigmoid, sigmoid_backward, [rng.standard_normal((3, 6))], epsilon, seed)))

    pred, target = rng.standard_normal((2, 7)), rng.standard_normal((2, 7))
    _, grad = mse(pred, target)
    report = finite_diff_check(lambda p: mse(p, target)[0], [pred], [grad], epsilon)
    results.append(("mse", report))
    return results
