"""
DCN Trainer
Reconstruction pretraining, k-means centroid initialization and the
alternating joint scheme (network step → reassignment → centroid update).
"""
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from config.settings import settings
from config.logger_config import setup_logger
from modules.kmeans import assign, kmeans_pp_seed, lloyd, sse, update_centroids
from modules.net import AutoencoderParams, decode, encode, forward_loss_grad
from modules.net.autoencoder import ENCODE_CHUNK
from modules.tensor_core import mse
from modules.volume_io import PatchSet
from utils.errors import ConfigError, DivergenceError, InputError
from .model import DcnModel, EpochRecord, TrainConfig, TrainLog
from .optimizer import Adam

logger = setup_logger("DCN", settings.log_level)

Patches = Union[PatchSet, np.ndarray]


class LossTerms(NamedTuple):
    recon: float
    cluster: float
    total: float


def _pixels(patches: Patches, dtype) -> np.ndarray:
    x = patches.pixels if isinstance(patches, PatchSet) else np.asarray(patches)
    if x.shape[0] == 0:
        raise InputError("patch set is empty")
    return x.astype(dtype, copy=False)


def _batches(rng: np.random.Generator, n: int, batch_size: int):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _mean_cluster_term(latents: np.ndarray, centroids: np.ndarray, assignments: np.ndarray) -> float:
    return sse(latents, centroids, assignments) / latents.shape[0]


def _mean_recon(params: AutoencoderParams, x: np.ndarray, latents: np.ndarray) -> float:
    """Per-patch reconstruction mse averaged over every patch, decoded in chunks."""
    squared = 0.0
    for start in range(0, x.shape[0], ENCODE_CHUNK):
        chunk = slice(start, start + ENCODE_CHUNK)
        value, _ = mse(decode(params, latents[chunk])[:, 0], x[chunk])
        squared += value * x[chunk].shape[0]
    return squared / x.shape[0]


# ============== PRETRAINING ==============

def pretrain(
    params: AutoencoderParams,
    patches: Patches,
    config: TrainConfig,
    log: Optional[TrainLog] = None,
) -> AutoencoderParams:
    """Reconstruction-only Adam training; returns new parameters, the input is untouched."""
    x = _pixels(patches, params.dtype)
    params = params.copy()
    if config.pretrain_epochs == 0:
        return params

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(params.tensors, config.learning_rate, config.adam_beta1, config.adam_beta2)

    for epoch in range(1, config.pretrain_epochs + 1):
        weighted = 0.0
        for batch in _batches(rng, x.shape[0], config.batch_size):
            result = forward_loss_grad(params, x[batch])
            if not np.isfinite(result.total):
                raise DivergenceError(epoch, config.learning_rate, "pretrain")
            optimizer.step(params.tensors, result.grads)
            weighted += result.recon * len(batch)
        recon = weighted / x.shape[0]
        logger.epoch(f"📉 pretrain {epoch}/{config.pretrain_epochs} recon={recon:.6f}")
        if log is not None:
            log.append(EpochRecord("pretrain", epoch, recon, 0.0, recon, 0.0))
    return params


# ============== CENTROID INITIALIZATION ==============

def init_centroids(
    params: AutoencoderParams,
    patches: Patches,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> Tuple[np.ndarray, np.ndarray]:
    """k-means++ seeding and Lloyd iterations on the latent codes of every patch."""
    latents = encode(params, _pixels(patches, params.dtype)).astype(np.float64)
    result = lloyd(latents, kmeans_pp_seed(latents, k, seed), max_iter, tol)
    logger.info(f"🎯 Latent k-means: k={k} cost={result.cost:.6g} after {result.n_iter} iteration(s)")
    return result.centroids, result.assignments


def initial_model(params: AutoencoderParams, patches: Patches, config: TrainConfig) -> DcnModel:
    """Centroids from latent k-means; counts start at the initial cluster sizes (at least 1)."""
    centroids, assignments = init_centroids(
        params, patches, config.k, config.seed, config.kmeans_max_iter, config.kmeans_tol
    )
    counts = np.maximum(np.bincount(assignments, minlength=config.k), 1).astype(np.int64)
    return DcnModel(params.copy(), centroids, counts)


# ============== JOINT TRAINING ==============

def online_centroid_update(centroids: np.ndarray, counts: np.ndarray, latents: np.ndarray, labels: np.ndarray) -> None:
    """In place, member by member: c_s += 1, m_s += (z − m_s) / c_s."""
    for zi, s in zip(latents, labels):
        counts[s] += 1
        centroids[s] += (zi - centroids[s]) / counts[s]


def joint_train(
    model: DcnModel,
    patches: Patches,
    config: TrainConfig,
    log: Optional[TrainLog] = None,
) -> Tuple[DcnModel, TrainLog]:
    """
    Alternating minimization of the joint loss.

    Each mini-batch: one Adam step on W, Z with (M, s) fixed. Online mode then
    reassigns the batch members and moves each one's centroid by 1/c_k.
    Batch mode instead reassigns every patch and runs one Lloyd mean step
    over the full data at epoch end. All assignments are refreshed at epoch end.

    Logged per epoch: reconstruction and cluster terms over all patches with
    the end-of-epoch network, centroids and assignments (as evaluate_loss).
    """
    if config.lam < 0:
        raise ConfigError(f"lambda must be ≥ 0, got {config.lam}")
    if model.centroids.shape[1] != model.params.arch.latent:
        raise InputError("centroid dimension does not match the latent size")

    log = log if log is not None else TrainLog()
    model = model.copy()
    params, centroids, counts = model.params, model.centroids, model.cluster_counts
    x = _pixels(patches, params.dtype)
    n = x.shape[0]

    latents = encode(params, x).astype(np.float64)
    assignments = assign(latents, centroids)

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(params.tensors, config.learning_rate, config.adam_beta1, config.adam_beta2)

    for epoch in range(1, config.joint_epochs + 1):
        start_assignments = assignments.copy()
        for batch in _batches(rng, n, config.batch_size):
            # (1) network step with M and s held fixed
            result = forward_loss_grad(params, x[batch], centroids, assignments[batch], config.lam)
            if not np.isfinite(result.total):
                raise DivergenceError(epoch, config.learning_rate, "joint")
            optimizer.step(params.tensors, result.grads)

            if config.centroid_update_mode == "online":
                # (2) reassign batch members, (3) count-damped centroid moves
                z = encode(params, x[batch]).astype(np.float64)
                labels = assign(z, centroids)
                assignments[batch] = labels
                online_centroid_update(centroids, counts, z, labels)

        latents = encode(params, x).astype(np.float64)
        if config.centroid_update_mode == "batch":
            assignments = assign(latents, centroids)
            centroids, _ = update_centroids(latents, assignments, centroids.shape[0])
        assignments = assign(latents, centroids)

        cluster = _mean_cluster_term(latents, centroids, assignments)
        recon = _mean_recon(params, x, latents.astype(params.dtype))
        total = recon + config.lam * cluster
        if not np.isfinite(total):
            raise DivergenceError(epoch, config.learning_rate, "joint")
        reassigned = float(np.mean(assignments != start_assignments))
        logger.epoch(
            f"🔁 joint {epoch}/{config.joint_epochs} recon={recon:.6f} cluster={cluster:.6f} "
            f"total={total:.6f} reassigned={reassigned:.3f}"
        )
        log.append(EpochRecord("joint", epoch, recon, cluster, total, reassigned))

    model.centroids = centroids
    return model, log


def train_dcn(
    params: AutoencoderParams,
    patches: Patches,
    config: TrainConfig,
) -> Tuple[DcnModel, TrainLog]:
    """Pretrain → latent k-means → joint training."""
    log = TrainLog()
    params = pretrain(params, patches, config, log)
    model = initial_model(params, patches, config)
    return joint_train(model, patches, config, log)


# ============== EVALUATION ==============

def evaluate_loss(model: DcnModel, patches: Patches, lam: float) -> LossTerms:
    """Loss terms over all patches with assignments recomputed as nearest centroid."""
    if lam < 0:
        raise ConfigError(f"lambda must be ≥ 0, got {lam}")
    x = _pixels(patches, model.params.dtype)
    latents = encode(model.params, x)
    recon = _mean_recon(model.params, x, latents)
    z64 = latents.astype(np.float64)
    cluster = _mean_cluster_term(z64, model.centroids, assign(z64, model.centroids))
    return LossTerms(recon, cluster, recon + lam * cluster)
