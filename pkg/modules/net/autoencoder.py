"""
Convolutional Autoencoder
Encoder f and decoder g assembled from tensor_core kernels, with a tape for
the analytic backward pass of the joint reconstruction + clustering loss.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from modules.tensor_core import (
    conv2d, conv2d_backward,
    dense, dense_backward,
    finite_diff_check, GradCheckReport,
    maxpool2, maxpool2_backward,
    mse,
    relu, relu_backward,
    reshape, reshape_backward,
    sigmoid, sigmoid_backward,
    upsample2, upsample2_backward,
)
from utils.errors import ConfigError, InvalidShapeError
from .architecture import TWIN_ARCH, AutoencoderParams, init_params

ENCODE_CHUNK = 512


@dataclass
class LossAndGrad:
    """Joint loss terms (batch means) and gradients in parameter order."""
    total: float
    recon: float
    cluster: float
    grads: List[np.ndarray]


# ============== FORWARD WITH TAPE ==============

def _as_batch(patches: np.ndarray, px: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(patches)
    if x.shape == (px, px):
        return x[None, None], True
    if x.ndim == 3 and x.shape[1:] == (px, px):
        return x[:, None], False
    if x.ndim == 4 and x.shape[1:] == (1, px, px):
        return x, False
    raise InvalidShapeError(f"expected {px}×{px} patch(es), got shape {x.shape}")


def _encoder_forward(params: AutoencoderParams, x: np.ndarray) -> Tuple[np.ndarray, list]:
    t = params.tensors
    tape = []
    h = x
    for stage in range(3):
        h, conv_cache = conv2d(h, t[2 * stage], t[2 * stage + 1])
        h, relu_cache = relu(h)
        h, pool_cache = maxpool2(h)
        tape.append((conv_cache, relu_cache, pool_cache))
    h, flat_shape = reshape(h, (h.shape[0], -1))
    z, dense_cache = dense(h, t[6], t[7])
    tape.append((flat_shape, dense_cache))
    return z, tape


def _decoder_forward(params: AutoencoderParams, z: np.ndarray) -> Tuple[np.ndarray, list]:
    t = params.tensors
    arch = params.arch
    tape = []
    h, dense_cache = dense(z, t[8], t[9])
    h, relu_cache = relu(h)
    h, flat_shape = reshape(h, (h.shape[0], arch.maps[2], arch.bottleneck_px, arch.bottleneck_px))
    tape.append((dense_cache, relu_cache, flat_shape))
    for stage in range(3):
        h, up_cache = upsample2(h)
        h, conv_cache = conv2d(h, t[10 + 2 * stage], t[11 + 2 * stage])
        if stage < 2:
            h, act_cache = relu(h)
        else:
            h, act_cache = sigmoid(h)
        tape.append((up_cache, conv_cache, act_cache))
    return h, tape


def _decoder_backward(d_out: np.ndarray, tape: list) -> Tuple[np.ndarray, List[np.ndarray]]:
    grads: List[np.ndarray] = [None] * 8
    d = d_out
    for stage in (2, 1, 0):
        up_cache, conv_cache, act_cache = tape[1 + stage]
        d = (sigmoid_backward if stage == 2 else relu_backward)(d, act_cache).d_input
        g = conv2d_backward(d, conv_cache)
        grads[2 + 2 * stage], grads[3 + 2 * stage] = g.d_params
        d = upsample2_backward(g.d_input, up_cache).d_input
    dense_cache, relu_cache, flat_shape = tape[0]
    d = reshape_backward(d, flat_shape).d_input
    d = relu_backward(d, relu_cache).d_input
    g = dense_backward(d, dense_cache)
    grads[0], grads[1] = g.d_params
    return g.d_input, grads


def _encoder_backward(d_z: np.ndarray, tape: list) -> List[np.ndarray]:
    grads: List[np.ndarray] = [None] * 8
    flat_shape, dense_cache = tape[3]
    g = dense_backward(d_z, dense_cache)
    grads[6], grads[7] = g.d_params
    d = reshape_backward(g.d_input, flat_shape).d_input
    for stage in (2, 1, 0):
        conv_cache, relu_cache, pool_cache = tape[stage]
        d = maxpool2_backward(d, pool_cache).d_input
        d = relu_backward(d, relu_cache).d_input
        g = conv2d_backward(d, conv_cache)
        grads[2 * stage], grads[2 * stage + 1] = g.d_params
        d = g.d_input
    return grads


# ============== PUBLIC API ==============

def encode(params: AutoencoderParams, patches: np.ndarray, chunk_size: int = ENCODE_CHUNK) -> np.ndarray:
    """Latent code(s): a single P×P patch gives a vector, a batch gives N×latent."""
    x, single = _as_batch(patches, params.arch.input_px)
    x = x.astype(params.dtype, copy=False)
    parts = [_encoder_forward(params, x[i:i + chunk_size])[0] for i in range(0, x.shape[0], chunk_size)]
    z = np.concatenate(parts) if parts else np.zeros((0, params.arch.latent), dtype=params.dtype)
    return z[0] if single else z


def decode(params: AutoencoderParams, codes: np.ndarray) -> np.ndarray:
    """Reconstruction(s) 1×P×P (or N×1×P×P) with values in (0, 1)."""
    z = np.asarray(codes)
    single = z.ndim == 1
    zb = z[None] if single else z
    if zb.ndim != 2 or zb.shape[1] != params.arch.latent:
        raise InvalidShapeError(f"latent code must have length {params.arch.latent}, got shape {z.shape}")
    out, _ = _decoder_forward(params, zb.astype(params.dtype, copy=False))
    return out[0] if single else out


def cluster_loss(z: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared distance to assigned centroids and its gradient w.r.t. z."""
    assignments = np.asarray(assignments)
    if assignments.shape != (z.shape[0],) or (assignments.size and (
            assignments.min() < 0 or assignments.max() >= centroids.shape[0])):
        raise InvalidShapeError("assignments must be one valid centroid index per latent code")
    diff = z - centroids[assignments].astype(z.dtype, copy=False)
    value = float(np.mean(np.sum(np.square(diff, dtype=np.float64), axis=1))) if z.shape[0] else 0.0
    return value, (2.0 / max(z.shape[0], 1)) * diff


def forward_loss_grad(
    params: AutoencoderParams,
    batch: np.ndarray,
    centroids: Optional[np.ndarray] = None,
    assignments: Optional[np.ndarray] = None,
    lam: float = 0.0,
) -> LossAndGrad:
    """
    Joint loss ``mean_i[ mse(g(f(x_i)), x_i) + λ‖f(x_i) − m_{s_i}‖² ]`` and its
    gradients. Centroids and assignments are constants here; the cluster term
    only reaches the encoder.
    """
    if lam < 0:
        raise ConfigError(f"lambda must be ≥ 0, got {lam}")
    x, _ = _as_batch(batch, params.arch.input_px)
    x = x.astype(params.dtype, copy=False)

    z, enc_tape = _encoder_forward(params, x)
    recon_out, dec_tape = _decoder_forward(params, z)
    recon, d_recon = mse(recon_out, x)
    d_z, dec_grads = _decoder_backward(d_recon, dec_tape)

    cluster = 0.0
    if lam > 0 or centroids is not None:
        if centroids is None or assignments is None:
            raise InvalidShapeError("centroids and assignments are required together")
        cluster, d_cluster = cluster_loss(z, centroids, assignments)
        if lam > 0:
            d_z = d_z + lam * d_cluster

    enc_grads = _encoder_backward(d_z, enc_tape)
    return LossAndGrad(recon + lam * cluster, recon, cluster, enc_grads + dec_grads)


# ============== GRADIENT CHECK ON THE SMALL TWIN ==============

def _kink_pattern(params: AutoencoderParams, x: np.ndarray) -> bytes:
    """Fingerprint of every relu sign and pool winner in one forward pass."""
    z, enc_tape = _encoder_forward(params, x)
    _, dec_tape = _decoder_forward(params, z)
    parts = []
    for conv_cache, relu_out, pool_cache in enc_tape[:3]:
        parts += [(relu_out > 0).tobytes(), pool_cache.argmax.tobytes()]
    parts.append((dec_tape[0][1] > 0).tobytes())
    for _, _, act in dec_tape[1:3]:
        parts.append((act > 0).tobytes())
    return b"|".join(parts)


def autoencoder_check(seed: int, epsilon: float = 1e-3, lam: float = 0.1, batch: int = 2) -> GradCheckReport:
    """Finite-difference check of every parameter of the twin network under the joint loss."""
    rng = np.random.default_rng(seed)
    params = init_params(seed, TWIN_ARCH, dtype=np.float64)
    for i in range(1, len(params.tensors), 2):
        params.tensors[i] = rng.normal(0.0, 0.1, params.tensors[i].shape)
    x = rng.uniform(0.0, 1.0, (batch, 1, TWIN_ARCH.input_px, TWIN_ARCH.input_px))
    centroids = rng.standard_normal((2, TWIN_ARCH.latent))
    assignments = np.arange(batch) % 2

    analytic = forward_loss_grad(params, x, centroids, assignments, lam).grads

    def loss(*tensors):
        return forward_loss_grad(AutoencoderParams(TWIN_ARCH, list(tensors)), x, centroids, assignments, lam).total

    def pattern(*tensors):
        return _kink_pattern(AutoencoderParams(TWIN_ARCH, list(tensors)), x)

    return finite_diff_check(loss, params.tensors, analytic, epsilon, pattern=pattern)
