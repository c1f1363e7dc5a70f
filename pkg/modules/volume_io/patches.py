"""
Axial Patch Extraction
Physically sized square windows drawn inside the ROI and bilinearly
resampled to the network grid.

Coordinates are continuous with voxel i spanning [i, i+1); window centres
sit on voxel corners, so a window whose native width equals ``out_px``
samples exactly on the voxel grid (identity resampling).
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.ndimage import map_coordinates

from config.settings import settings
from config.logger_config import setup_logger
from utils.concurrency import run_concurrently
from utils.errors import ExtractionExhaustedError, InputError, PipelineIOError
from .formats import RoiMask, Volume, check_pair, read_mask, read_volume, write_patchset_pixels, read_patchset_pixels
from .manifest import CaseRecord
from .normalize import NormalizationStats, normalize

logger = setup_logger("Patches", settings.log_level)

ACCEPT_FRACTION = 0.9
ATTEMPTS_PER_PATCH = 100


@dataclass(frozen=True)
class PatchProvenance:
    case_id: str
    slice_index: int
    center_mm: Tuple[float, float]


@dataclass
class Patch:
    pixels: np.ndarray  # out_px × out_px in [0, 1]
    provenance: PatchProvenance


@dataclass
class PatchSet:
    """Training corpus: stacked pixels plus per-patch provenance."""
    pixels: np.ndarray
    provenance: List[PatchProvenance] = field(default_factory=list)
    normalization: Dict[str, NormalizationStats] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.pixels.shape[0])

    def patch(self, index: int) -> Patch:
        return Patch(self.pixels[index], self.provenance[index])

    @staticmethod
    def concat(parts: Sequence["PatchSet"], out_px: int) -> "PatchSet":
        pixels = [p.pixels for p in parts if len(p)]
        merged = PatchSet(
            np.concatenate(pixels) if pixels else np.zeros((0, out_px, out_px), dtype=np.float32)
        )
        for part in parts:
            merged.provenance.extend(part.provenance)
            merged.normalization.update(part.normalization)
        return merged


@dataclass(frozen=True)
class WindowGeometry:
    """Native extent (in voxels) of a square physical window on an axial slice."""
    width_px: float
    height_px: float
    out_px: int

    @classmethod
    def from_spacing(cls, window_mm: float, spacing_mm: Sequence[float], out_px: int) -> "WindowGeometry":
        return cls(window_mm / spacing_mm[0], window_mm / spacing_mm[1], out_px)

    def fits(self, cx: float, cy: float, nx: int, ny: int) -> bool:
        return (cx - self.width_px / 2 >= 0 and cx + self.width_px / 2 <= nx
                and cy - self.height_px / 2 >= 0 and cy + self.height_px / 2 <= ny)

    def sample_coords(self, cx: float, cy: float) -> Tuple[np.ndarray, np.ndarray]:
        """Voxel-index coordinates (rows, cols) of the out_px × out_px sample grid."""
        steps = np.arange(self.out_px) + 0.5
        xs = cx - self.width_px / 2 + steps * self.width_px / self.out_px - 0.5
        ys = cy - self.height_px / 2 + steps * self.height_px / self.out_px - 0.5
        rows, cols = np.meshgrid(ys, xs, indexing="ij")
        return rows, cols


def resample(slice2d: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear sampling; never leaves [min, max] of the input."""
    return map_coordinates(np.asarray(slice2d, dtype=np.float64), [rows, cols], order=1, mode="nearest")


def mask_fraction(mask2d: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> float:
    """Share of sample points that fall on in-mask voxels (nearest neighbour)."""
    hits = map_coordinates(np.asarray(mask2d, dtype=np.float64), [rows, cols], order=0, mode="constant", cval=0.0)
    return float(np.mean(hits > 0.5))


def roi_slices(mask: RoiMask) -> List[int]:
    return [z for z in range(mask.voxels.shape[0]) if mask.voxels[z].any()]


def extract_patches(
    volume: Volume,
    mask: RoiMask,
    n: int,
    window_mm: float = 14.0,
    out_px: int = 32,
    seed: int = 0,
    case_id: str = "",
    accept_fraction: float = ACCEPT_FRACTION,
) -> PatchSet:
    """
    Draw ``n`` windows at uniformly random in-mask centres of uniformly chosen
    ROI slices; keep those with ≥ ``accept_fraction`` in-mask samples.
    """
    check_pair(volume, mask)
    nx, ny, _ = volume.dims
    geometry = WindowGeometry.from_spacing(window_mm, volume.spacing_mm, out_px)
    if geometry.width_px > nx or geometry.height_px > ny:
        raise InputError(
            f"case {case_id}: a {window_mm:g} mm window ({geometry.width_px:g}×{geometry.height_px:g} px) "
            f"does not fit a {nx}×{ny} slice"
        )

    slices = roi_slices(mask)
    if n > 0 and not slices:
        raise ExtractionExhaustedError(case_id, 0, n)

    rng = np.random.default_rng(seed)
    in_mask = {z: np.nonzero(mask.voxels[z]) for z in slices}
    slice_cache: Dict[int, np.ndarray] = {}
    pixels: List[np.ndarray] = []
    provenance: List[PatchProvenance] = []
    sx, sy, _ = volume.spacing_mm

    attempts = 0
    while len(pixels) < n and attempts < ATTEMPTS_PER_PATCH * n:
        attempts += 1
        z = slices[int(rng.integers(len(slices)))]
        ys, xs = in_mask[z]
        pick = int(rng.integers(len(ys)))
        cx, cy = float(xs[pick]), float(ys[pick])
        if not geometry.fits(cx, cy, nx, ny):
            continue
        rows, cols = geometry.sample_coords(cx, cy)
        if mask_fraction(mask.voxels[z], rows, cols) < accept_fraction:
            continue
        if z not in slice_cache:
            slice_cache[z] = volume.voxels[z].astype(np.float64)
        window = np.clip(resample(slice_cache[z], rows, cols), 0.0, 1.0)
        pixels.append(window.astype(np.float32))
        provenance.append(PatchProvenance(case_id, z, (cx * sx, cy * sy)))

    if len(pixels) < n:
        raise ExtractionExhaustedError(case_id, len(pixels), n)

    stacked = np.stack(pixels) if pixels else np.zeros((0, out_px, out_px), dtype=np.float32)
    return PatchSet(stacked, provenance)


def equal_shares(total: int, n_cases: int) -> List[int]:
    """Split ``total`` evenly; the remainder goes to the earliest cases."""
    base, remainder = divmod(total, n_cases)
    return [base + (1 if i < remainder else 0) for i in range(n_cases)]


def case_seed(master_seed: int, index: int) -> int:
    """Per-unit seed derived from the master seed, independent of scheduling."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def extract_corpus(
    records: Sequence[CaseRecord],
    total: int,
    window_mm: float = 14.0,
    out_px: int = 32,
    seed: int = 0,
    accept_fraction: float = ACCEPT_FRACTION,
    workers: int = 1,
) -> PatchSet:
    """Equal-share extraction across the manifest, concatenated in manifest order."""
    shares = equal_shares(total, len(records))

    def extract_case(index: int) -> PatchSet:
        record = records[index]
        if shares[index] == 0:
            return PatchSet(np.zeros((0, out_px, out_px), dtype=np.float32))
        mask = read_mask(record.mask_path)
        volume, stats = normalize(read_volume(record.volume_path), mask)
        part = extract_patches(
            volume, mask, shares[index], window_mm, out_px,
            seed=case_seed(seed, index), case_id=record.case_id, accept_fraction=accept_fraction,
        )
        part.normalization[record.case_id] = stats
        logger.info(f"🧩 {record.case_id}: {len(part)} patches (ROI mean {stats.mean:.2f}, std {stats.std:.2f})")
        return part

    parts = run_concurrently(extract_case, range(len(records)), workers)
    return PatchSet.concat(parts, out_px)


def write_patchset(path: Path, patchset: PatchSet) -> None:
    write_patchset_pixels(path, patchset.pixels)


def read_patchset(path: Path) -> PatchSet:
    return PatchSet(read_patchset_pixels(path))


def write_provenance(path: Path, patchset: PatchSet) -> None:
    """Companion CSV: one row per patch, in corpus order."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["index", "case_id", "slice", "center_x_mm", "center_y_mm"])
            for i, p in enumerate(patchset.provenance):
                writer.writerow([i, p.case_id, p.slice_index, f"{p.center_mm[0]:.4f}", f"{p.center_mm[1]:.4f}"])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write: {e}") from e
