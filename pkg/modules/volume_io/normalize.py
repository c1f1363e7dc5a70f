"""
Intensity normalization over the region of interest.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from utils.errors import DegenerateVolumeError
from .formats import RoiMask, Volume, check_pair

Z_CLAMP = 3.0


@dataclass(frozen=True)
class NormalizationStats:
    mean: float
    std: float


def normalize(volume: Volume, mask: RoiMask) -> Tuple[Volume, NormalizationStats]:
    """
    Z-score with ROI statistics (population std), clamp to ±3, map [-3, 3] → [0, 1].
    The whole volume is transformed; only the statistics come from the mask.
    """
    check_pair(volume, mask)
    inside = volume.voxels[mask.voxels.astype(bool)].astype(np.float64)
    if inside.size == 0:
        raise DegenerateVolumeError("mask is empty")
    mean = float(inside.mean())
    std = float(inside.std())
    if not np.isfinite(std) or std == 0.0:
        raise DegenerateVolumeError(f"intensity std over the mask is {std}; cannot normalize")

    z = np.clip((volume.voxels.astype(np.float64) - mean) / std, -Z_CLAMP, Z_CLAMP)
    scaled = ((z + Z_CLAMP) / (2 * Z_CLAMP)).astype(np.float32)
    return Volume(scaled, volume.spacing_mm), NormalizationStats(mean, std)
