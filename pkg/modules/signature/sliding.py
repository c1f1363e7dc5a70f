"""
Sliding-Window Signatures
Parse an ROI with windows of the training geometry, assign each accepted
window to its nearest centroid and count cluster proportions.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from config.logger_config import setup_logger
from modules.dcn import DcnModel
from modules.kmeans import assign
from modules.net import encode
from modules.volume_io import (
    ACCEPT_FRACTION, CaseRecord, RoiMask, Volume, WindowGeometry, check_pair,
    mask_fraction, normalize, read_mask, read_volume, resample, roi_slices,
)
from utils.concurrency import run_concurrently
from utils.errors import EmptyRoiError, PipelineError, SignatureBatchError

logger = setup_logger("Signature", settings.log_level)


@dataclass
class Signature:
    case_id: str
    proportions: np.ndarray
    window_count: int
    grade: Optional[int] = None

    @property
    def k(self) -> int:
        return int(self.proportions.size)


@dataclass(frozen=True)
class WindowLabel:
    slice_index: int
    cx_px: int
    cy_px: int
    cluster: int  # zero-based


@dataclass
class LabelMap:
    case_id: str
    windows: List[WindowLabel] = field(default_factory=list)

    def only(self, clusters: Sequence[int]) -> "LabelMap":
        """Windows whose cluster is in ``clusters`` (zero-based)."""
        keep = set(int(c) for c in clusters)
        return LabelMap(self.case_id, [w for w in self.windows if w.cluster in keep])


def window_centers(extent: int, width_px: float, stride_px: int) -> List[int]:
    """Integer corner positions at which a window of ``width_px`` fits inside ``extent``."""
    first = math.ceil(width_px / 2)
    return [c for c in range(first, extent + 1, stride_px) if c + width_px / 2 <= extent]


def proportions_from_labels(labels: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=k)[:k]
    return counts / counts.sum()


def _slice_windows(
    model: DcnModel,
    volume: Volume,
    mask: RoiMask,
    z: int,
    geometry: WindowGeometry,
    stride_px: int,
    accept_fraction: float,
) -> List[WindowLabel]:
    nx, ny, _ = volume.dims
    slice2d = volume.voxels[z].astype(np.float64)
    mask2d = mask.voxels[z]
    centers: List[Tuple[int, int]] = []
    pixels: List[np.ndarray] = []
    for cy in window_centers(ny, geometry.height_px, stride_px):
        for cx in window_centers(nx, geometry.width_px, stride_px):
            rows, cols = geometry.sample_coords(cx, cy)
            if mask_fraction(mask2d, rows, cols) < accept_fraction:
                continue
            centers.append((cx, cy))
            pixels.append(np.clip(resample(slice2d, rows, cols), 0.0, 1.0))
    if not pixels:
        return []
    latents = encode(model.params, np.stack(pixels)).astype(np.float64)
    labels = assign(latents, model.centroids)
    return [WindowLabel(z, cx, cy, int(s)) for (cx, cy), s in zip(centers, labels)]


def compute_signature(
    model: DcnModel,
    volume: Volume,
    mask: RoiMask,
    stride_px: int = 8,
    window_mm: float = 14.0,
    accept_fraction: float = ACCEPT_FRACTION,
    case_id: str = "",
    workers: int = 1,
) -> Tuple[Signature, LabelMap]:
    """Signature of a normalized volume; slices may be processed concurrently."""
    check_pair(volume, mask)
    geometry = WindowGeometry.from_spacing(window_mm, volume.spacing_mm, model.params.arch.input_px)
    per_slice = run_concurrently(
        lambda z: _slice_windows(model, volume, mask, z, geometry, stride_px, accept_fraction),
        roi_slices(mask),
        workers,
    )
    windows = [w for part in per_slice for w in part]
    if not windows:
        raise EmptyRoiError(case_id)
    proportions = proportions_from_labels(np.array([w.cluster for w in windows]), model.k)
    return Signature(case_id, proportions, len(windows)), LabelMap(case_id, windows)


def signatures_for_manifest(
    model: DcnModel,
    records: Sequence[CaseRecord],
    stride_px: int = 8,
    window_mm: float = 14.0,
    accept_fraction: float = ACCEPT_FRACTION,
    workers: int = 1,
) -> Tuple[List[Signature], List[LabelMap]]:
    """
    One signature per case in manifest order. Failing cases are collected and
    raised together as SignatureBatchError once every case has been tried.
    """
    def run_case(record: CaseRecord):
        try:
            mask = read_mask(record.mask_path)
            volume, _ = normalize(read_volume(record.volume_path), mask)
            signature, label_map = compute_signature(
                model, volume, mask, stride_px, window_mm, accept_fraction, record.case_id
            )
        except PipelineError as e:
            logger.error(f"❌ {record.case_id}: {e}")
            return record.case_id, str(e)
        signature.grade = record.grade
        logger.info(f"🧬 {record.case_id}: {signature.window_count} windows")
        return signature, label_map

    results = run_concurrently(run_case, records, workers)
    failures: Dict[str, str] = {r[0]: r[1] for r in results if isinstance(r[0], str)}
    if failures:
        raise SignatureBatchError(failures)
    return [r[0] for r in results], [r[1] for r in results]
