"""
Model Checkpoints
Header JSON line, then f32le parameters in layer order, then K×latent f32le centroids.
"""
import json
from pathlib import Path
from typing import NamedTuple

import numpy as np

from utils.errors import FormatError, PipelineIOError
from .architecture import AutoencoderParams, arch_by_name


class Checkpoint(NamedTuple):
    params: AutoencoderParams
    centroids: np.ndarray
    cluster_counts: np.ndarray


def write_checkpoint(path: Path, params: AutoencoderParams, centroids: np.ndarray, cluster_counts: np.ndarray) -> None:
    path = Path(path)
    arch = params.arch
    if centroids.ndim != 2 or centroids.shape[1] != arch.latent:
        raise FormatError(f"centroids must be K×{arch.latent}, got {centroids.shape}", "centroids")
    if len(cluster_counts) != centroids.shape[0]:
        raise FormatError("cluster_counts length differs from K", "cluster_counts")
    header = {
        "arch": arch.name,
        "k": int(centroids.shape[0]),
        "latent": arch.latent,
        "param_count": arch.param_count,
        "cluster_counts": [int(c) for c in cluster_counts],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write((json.dumps(header) + "\n").encode("utf-8"))
            f.write(params.flatten().astype("<f4").tobytes())
            f.write(np.ascontiguousarray(centroids, dtype="<f4").tobytes())
    except OSError as e:
        raise PipelineIOError(path, f"cannot write checkpoint: {e}") from e


def read_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise PipelineIOError(path, f"cannot read checkpoint: {e}") from e

    newline = blob.find(b"\n")
    if newline < 0:
        raise FormatError(f"{path}: missing checkpoint header", "header")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: header is not valid JSON ({e})", "header") from e

    arch = arch_by_name(header.get("arch"))
    k = header.get("k")
    if not isinstance(k, int) or k < 1:
        raise FormatError(f"{path}: k must be a positive integer", "k")
    if header.get("latent") != arch.latent:
        raise FormatError(f"{path}: latent {header.get('latent')} does not match {arch.name}", "latent")
    if header.get("param_count") != arch.param_count:
        raise FormatError(f"{path}: param_count {header.get('param_count')} does not match {arch.name}", "param_count")
    counts = header.get("cluster_counts", [1] * k)
    if not isinstance(counts, list) or len(counts) != k:
        raise FormatError(f"{path}: cluster_counts must list {k} values", "cluster_counts")

    payload = blob[newline + 1:]
    expected = (arch.param_count + k * arch.latent) * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}", "payload")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    params = AutoencoderParams.unflatten(arch, values[:arch.param_count])
    centroids = values[arch.param_count:].reshape(k, arch.latent).copy()
    return Checkpoint(params, centroids, np.asarray(counts, dtype=np.int64))
