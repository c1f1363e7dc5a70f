"""
Layer Kernels
Convolution, pooling, upsampling, dense, activations and MSE with analytic
backward passes.

Every kernel accepts a batch (N×C×H×W, or N×n for dense) or a single
sample (C×H×W, or n) and returns ``(output, cache)``; the matching
``*_backward(d_out, cache)`` returns a ``LayerGrad`` whose shapes mirror the
forward inputs. Kernels are dtype-generic: float32 for training, float64 for
gradient checks.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Tuple

import numpy as np
from scipy.special import expit

from utils.errors import InvalidShapeError

Tensor = np.ndarray


@dataclass
class LayerGrad:
    """Gradients of a layer w.r.t. its input and its parameters (in parameter order)."""
    d_input: Tensor
    d_params: List[Tensor] = field(default_factory=list)


def _batched(x: Tensor, rank: int, op: str) -> Tuple[Tensor, bool]:
    """View a single sample of the given rank as a batch of one."""
    if x.ndim == rank:
        return x[None], True
    if x.ndim == rank + 1:
        return x, False
    raise InvalidShapeError(f"{op}: expected {rank}-d sample or {rank + 1}-d batch, got shape {x.shape}")


def _unbatched(x: Tensor, single: bool) -> Tensor:
    return x[0] if single else x


# ============== CONVOLUTION (3×3, zero padding 1, stride 1) ==============

class ConvCache(NamedTuple):
    padded: Tensor
    kernels: Tensor
    single: bool


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tuple[Tensor, ConvCache]:
    """Same-size 3×3 cross-correlation plus bias."""
    xb, single = _batched(x, 3, "conv2d")
    if kernels.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise InvalidShapeError(f"conv2d: kernels must be C_out×C_in×3×3, got {kernels.shape}")
    c_out, c_in = kernels.shape[:2]
    if xb.shape[1] != c_in:
        raise InvalidShapeError(f"conv2d: input has {xb.shape[1]} channels, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise InvalidShapeError(f"conv2d: bias must have shape ({c_out},), got {bias.shape}")

    n, _, h, w = xb.shape
    dtype = np.result_type(xb, kernels, bias)
    padded = np.pad(xb.astype(dtype, copy=False), ((0, 0), (0, 0), (1, 1), (1, 1)))
    acc = np.zeros((n, h, w, c_out), dtype=dtype)
    for i in range(3):
        for j in range(3):
            acc += np.tensordot(padded[:, :, i:i + h, j:j + w], kernels[:, :, i, j], axes=([1], [1]))
    out = np.ascontiguousarray(acc.transpose(0, 3, 1, 2)) + bias[None, :, None, None]
    return _unbatched(out, single), ConvCache(padded, kernels, single)


def conv2d_backward(d_out: Tensor, cache: ConvCache) -> LayerGrad:
    padded, kernels, single = cache
    d = d_out[None] if single else d_out
    _, _, h, w = d.shape
    d_padded = np.zeros_like(padded)
    d_kernels = np.empty_like(kernels)
    for i in range(3):
        for j in range(3):
            window = padded[:, :, i:i + h, j:j + w]
            d_kernels[:, :, i, j] = np.tensordot(d, window, axes=([0, 2, 3], [0, 2, 3]))
            d_padded[:, :, i:i + h, j:j + w] += np.tensordot(
                d, kernels[:, :, i, j], axes=([1], [0])
            ).transpose(0, 3, 1, 2)
    d_bias = d.sum(axis=(0, 2, 3))
    d_input = d_padded[:, :, 1:-1, 1:-1]
    return LayerGrad(_unbatched(d_input, single), [d_kernels, d_bias])


# ============== POOLING / UPSAMPLING ==============

class PoolCache(NamedTuple):
    argmax: Tensor  # flat index 0..3 inside each 2×2 block, row-major
    input_shape: Tuple[int, ...]
    single: bool


def maxpool2(x: Tensor) -> Tuple[Tensor, PoolCache]:
    """Non-overlapping 2×2 max; ties resolve to the first position in scan order."""
    xb, single = _batched(x, 3, "maxpool2")
    n, c, h, w = xb.shape
    if h % 2 or w % 2:
        raise InvalidShapeError(f"maxpool2: spatial size must be even, got {h}×{w}")
    blocks = xb.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return _unbatched(out, single), PoolCache(_unbatched(argmax, single), xb.shape, single)


def maxpool2_backward(d_out: Tensor, cache: PoolCache) -> LayerGrad:
    argmax, shape, single = cache
    d = d_out[None] if single else d_out
    idx = argmax[None] if single else argmax
    n, c, h, w = shape
    d_blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=d.dtype)
    np.put_along_axis(d_blocks, idx[..., None], d[..., None], axis=-1)
    d_input = d_blocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
    return LayerGrad(_unbatched(d_input, single))


def upsample2(x: Tensor) -> Tuple[Tensor, bool]:
    """Nearest-neighbour 2× replication."""
    xb, single = _batched(x, 3, "upsample2")
    out = xb.repeat(2, axis=2).repeat(2, axis=3)
    return _unbatched(out, single), single


def upsample2_backward(d_out: Tensor, single: bool) -> LayerGrad:
    d = d_out[None] if single else d_out
    n, c, h2, w2 = d.shape
    d_input = d.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
    return LayerGrad(_unbatched(d_input, single))


# ============== DENSE / RESHAPE ==============

class DenseCache(NamedTuple):
    x: Tensor
    weights: Tensor
    single: bool


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tuple[Tensor, DenseCache]:
    """Affine map ``W x + b``."""
    xb, single = _batched(x, 1, "dense")
    if weights.ndim != 2 or weights.shape[1] != xb.shape[1]:
        raise InvalidShapeError(f"dense: weights {weights.shape} do not accept inputs of size {xb.shape[1]}")
    if bias.shape != (weights.shape[0],):
        raise InvalidShapeError(f"dense: bias must have shape ({weights.shape[0]},), got {bias.shape}")
    out = xb @ weights.T + bias
    return _unbatched(out, single), DenseCache(xb, weights, single)


def dense_backward(d_out: Tensor, cache: DenseCache) -> LayerGrad:
    xb, weights, single = cache
    d = d_out[None] if single else d_out
    return LayerGrad(_unbatched(d @ weights, single), [d.T @ xb, d.sum(axis=0)])


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tuple[Tensor, Tuple[int, ...]]:
    return x.reshape(shape), x.shape


def reshape_backward(d_out: Tensor, input_shape: Tuple[int, ...]) -> LayerGrad:
    return LayerGrad(d_out.reshape(input_shape))


# ============== ACTIVATIONS ==============

def relu(x: Tensor) -> Tuple[Tensor, Tensor]:
    out = np.maximum(x, 0)
    return out, out


def relu_backward(d_out: Tensor, out: Tensor) -> LayerGrad:
    # derivative at exactly 0 is 0
    return LayerGrad(d_out * (out > 0))


def sigmoid(x: Tensor) -> Tuple[Tensor, Tensor]:
    out = expit(x)
    return out, out


def sigmoid_backward(d_out: Tensor, out: Tensor) -> LayerGrad:
    return LayerGrad(d_out * out * (1 - out))


# ============== LOSS ==============

def mse(prediction: Tensor, target: Tensor) -> Tuple[float, Tensor]:
    """Mean squared error over all elements and its gradient w.r.t. the prediction."""
    if prediction.shape != target.shape:
        raise InvalidShapeError(f"mse: prediction {prediction.shape} vs target {target.shape}")
    diff = prediction - target
    value = float(np.mean(np.square(diff, dtype=np.float64)))
    return value, (2.0 / diff.size) * diff
