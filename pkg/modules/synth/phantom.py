"""
Texture Phantom Generator
Synthetic cohorts with a known two-texture mixture per case: a smooth
background texture and a striped "lesion" texture painted in random blobs
whose ROI coverage grows with the grade.
"""
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.ndimage import gaussian_filter

from config.settings import PipelineConfig, settings
from config.logger_config import setup_logger
from modules.volume_io import (
    CaseRecord, RoiMask, Volume, equal_shares, write_label_map, write_manifest, write_mask, write_volume,
)
from utils.concurrency import run_concurrently
from utils.errors import ConfigError, GenerationError, InputError, PipelineIOError
from utils.resilience import with_retries

logger = setup_logger("Phantom", settings.log_level)

# Texture ids in truth label maps
OUTSIDE = 0
TEXTURE_A = 1
TEXTURE_B = 2

GRADES = (0, 1, 2, 3)
ROI_SEMI_AXES = (0.42, 0.38, 0.6)  # fraction of (nx, ny, nz)
BLOB_SCALES = (1.0, 0.75, 0.5, 0.35, 0.25, 0.15, 0.05)
MAX_BLOBS = 200_000
SPECTRAL_MARGIN = 0.5
BAND_HALF_WIDTH = 0.2  # relative to the stripe frequency

ROI_LEVEL = 100.0
TEXTURE_GAIN = 20.0
OUTSIDE_LEVEL = 20.0
OUTSIDE_NOISE = 5.0
STRIPE_NOISE = 0.3

TRUTH_TABLE_NAME = "phantom_truth.csv"
MANIFEST_NAME = "manifest.csv"


class PhantomSpec(BaseModel):
    """Cohort recipe; dims are (nx, ny, nz)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_cases: int = Field(default=40, ge=1)
    dims: Tuple[int, int, int] = (96, 96, 6)
    spacing_mm: Tuple[float, float, float] = (0.4375, 0.4375, 3.0)
    noise_sigma_px: float = Field(default=2.0, gt=0)
    stripe_period_px: float = Field(default=4.0, gt=2)
    stripe_angle_deg: float = 0.0
    blob_radius_mm: float = Field(default=3.5, gt=0)
    lesion_base: float = 0.2
    lesion_step: float = 0.2
    grade_counts: Optional[List[int]] = None
    seed: int = Field(default=0, ge=0)
    fraction_tolerance: float = Field(default=0.02, gt=0, lt=0.5)
    max_retries: int = Field(default=5, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "PhantomSpec":
        if any(d < 1 for d in self.dims) or any(s <= 0 for s in self.spacing_mm):
            raise ValueError("dims must be ≥ 1 and spacing_mm positive")
        fractions = [self.lesion_fraction(g) for g in GRADES]
        if any(not 0.0 <= p <= 1.0 for p in fractions):
            raise ValueError(f"lesion fractions {fractions} must lie in [0, 1]")
        if any(b <= a for a, b in zip(fractions, fractions[1:])):
            raise ValueError(f"lesion fractions {fractions} must be strictly increasing in grade")
        if self.grade_counts is not None:
            if len(self.grade_counts) != len(GRADES) or any(c < 0 for c in self.grade_counts):
                raise ValueError("grade_counts must hold 4 non-negative counts")
            if sum(self.grade_counts) != self.n_cases:
                raise ValueError(f"grade_counts sum to {sum(self.grade_counts)}, expected {self.n_cases}")
        return self

    def lesion_fraction(self, grade: int) -> float:
        """Target share of ROI voxels carrying the lesion texture."""
        return self.lesion_base + self.lesion_step * grade

    @classmethod
    def from_pipeline(cls, config: PipelineConfig) -> "PhantomSpec":
        try:
            return cls(
                n_cases=config.phantom_n_cases,
                dims=config.phantom_dims,
                spacing_mm=config.phantom_spacing_mm,
                noise_sigma_px=config.phantom_noise_sigma_px,
                stripe_period_px=config.phantom_stripe_period_px,
                stripe_angle_deg=config.phantom_stripe_angle_deg,
                blob_radius_mm=config.phantom_blob_radius_mm,
                lesion_base=config.phantom_lesion_base,
                lesion_step=config.phantom_lesion_step,
                grade_counts=config.phantom_grade_counts,
                seed=config.seed,
            )
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'phantom'}: {err['msg']}" for err in e.errors())
            raise ConfigError(f"invalid phantom settings: {problems}") from e


@dataclass
class PhantomTruth:
    labels: np.ndarray  # z, y, x; OUTSIDE / TEXTURE_A / TEXTURE_B
    grade: int
    lesion_fraction: float
    target_fraction: float


@dataclass
class CohortResult:
    manifest_path: Path
    truth_path: Path
    records: List[CaseRecord]
    truths: List[PhantomTruth]


def case_name(index: int) -> str:
    return f"case_{index:03d}"


def cohort_grades(spec: PhantomSpec) -> List[int]:
    """Grades in case order; the histogram equals the configured counts exactly."""
    counts = spec.grade_counts if spec.grade_counts is not None else equal_shares(spec.n_cases, len(GRADES))
    grades = np.repeat(np.array(GRADES), counts)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    return [int(g) for g in rng.permutation(grades)]


# ============== GEOMETRY ==============

def ellipsoid_roi(dims: Tuple[int, int, int]) -> np.ndarray:
    """Centred ellipsoid tested at voxel centres; returned as bool z, y, x."""
    nx, ny, nz = dims
    z, y, x = np.meshgrid(
        (np.arange(nz) + 0.5 - nz / 2) / (ROI_SEMI_AXES[2] * nz),
        (np.arange(ny) + 0.5 - ny / 2) / (ROI_SEMI_AXES[1] * ny),
        (np.arange(nx) + 0.5 - nx / 2) / (ROI_SEMI_AXES[0] * nx),
        indexing="ij",
    )
    return x ** 2 + y ** 2 + z ** 2 <= 1.0


def _blob(shape, spacing_mm, center, radius_mm: float) -> Tuple[Tuple[slice, slice, slice], np.ndarray]:
    """Sphere of ``radius_mm`` around a voxel; returns its bounding box and in-box mask."""
    sx, sy, sz = spacing_mm
    steps = (sz, sy, sx)
    box = []
    offsets = []
    for axis, (c, step) in enumerate(zip(center, steps)):
        reach = int(radius_mm // step)
        lo, hi = max(c - reach, 0), min(c + reach + 1, shape[axis])
        box.append(slice(lo, hi))
        offsets.append((np.arange(lo, hi) - c) * step)
    dz, dy, dx = np.meshgrid(*offsets, indexing="ij")
    return tuple(box), dz ** 2 + dy ** 2 + dx ** 2 <= radius_mm ** 2


def paint_blobs(
    roi: np.ndarray,
    spacing_mm: Tuple[float, float, float],
    target: float,
    tolerance: float,
    radius_mm: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Cover ``target ± tolerance`` of the ROI with spheres at random unpainted
    ROI voxels, taking at each centre the largest radius that does not
    overshoot the upper bound.
    """
    painted = np.zeros_like(roi, dtype=bool)
    total = int(roi.sum())
    lower, upper = (target - tolerance) * total, (target + tolerance) * total
    count = 0
    radii = [radius_mm * s for s in BLOB_SCALES]

    for _ in range(MAX_BLOBS):
        if count >= lower:
            return painted
        free = np.flatnonzero(roi & ~painted)
        center = np.unravel_index(free[int(rng.integers(free.size))], roi.shape)
        for radius in radii:
            box, sphere = _blob(roi.shape, spacing_mm, center, radius)
            fresh = sphere & roi[box] & ~painted[box]
            added = int(fresh.sum())
            if count + added <= upper:
                painted[box] |= fresh
                count += added
                break
    raise GenerationError(f"blob painting reached {count / total:.3f} of {target:.3f} after {MAX_BLOBS} blobs")


# ============== TEXTURES ==============

def smooth_texture(shape, sigma_px: float, rng: np.random.Generator) -> np.ndarray:
    """Texture A: in-plane Gaussian-filtered white noise, unit variance."""
    field = gaussian_filter(rng.standard_normal(shape), sigma=(0, sigma_px, sigma_px))
    return (field - field.mean()) / field.std()


def stripe_texture(shape, period_px: float, angle_deg: float, rng: np.random.Generator) -> np.ndarray:
    """Texture B: oriented sinusoidal stripes plus weak white noise, unit variance, mean +1."""
    nz, ny, nx = shape
    theta = np.deg2rad(angle_deg)
    y, x = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    phase = rng.uniform(0.0, 2 * np.pi, size=(nz, 1, 1))
    wave = np.sin(2 * np.pi * (x * np.cos(theta) + y * np.sin(theta)) / period_px + phase)
    field = wave + STRIPE_NOISE * rng.standard_normal(shape)
    return (field - field.mean()) / field.std() + 1.0


def band_power_difference(a: np.ndarray, b: np.ndarray, period_px: float) -> float:
    """Summed |P_a − P_b| of slice-averaged, normalized power spectra in the stripe band."""
    def spectrum(field: np.ndarray) -> np.ndarray:
        centred = field - field.mean(axis=(1, 2), keepdims=True)
        power = (np.abs(np.fft.fft2(centred)) ** 2).mean(axis=0)
        return power / power.sum()

    ny, nx = a.shape[1:]
    fy, fx = np.meshgrid(np.fft.fftfreq(ny), np.fft.fftfreq(nx), indexing="ij")
    stripe = 1.0 / period_px
    band = np.abs(np.hypot(fx, fy) - stripe) <= BAND_HALF_WIDTH * stripe
    return float(np.abs(spectrum(a) - spectrum(b))[band].sum())


# ============== CASES ==============

def _generate_attempt(spec: PhantomSpec, case_index: int, grade: int, attempt: int = 0):
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, case_index, attempt]))
    nx, ny, nz = spec.dims
    shape = (nz, ny, nx)
    roi = ellipsoid_roi(spec.dims)
    if not roi.any():
        raise GenerationError(f"dims {spec.dims} leave an empty ROI")

    texture_a = smooth_texture(shape, spec.noise_sigma_px, rng)
    texture_b = stripe_texture(shape, spec.stripe_period_px, spec.stripe_angle_deg, rng)
    separation = band_power_difference(texture_a, texture_b, spec.stripe_period_px)
    if separation < SPECTRAL_MARGIN:
        raise GenerationError(f"textures differ by {separation:.3f} in the stripe band (< {SPECTRAL_MARGIN})")

    target = spec.lesion_fraction(grade)
    if target > 0.5:
        # paint the background into an all-lesion ROI
        lesion = roi & ~paint_blobs(roi, spec.spacing_mm, 1.0 - target, spec.fraction_tolerance, spec.blob_radius_mm, rng)
    else:
        lesion = paint_blobs(roi, spec.spacing_mm, target, spec.fraction_tolerance, spec.blob_radius_mm, rng)

    achieved = float(lesion.sum() / roi.sum())
    if abs(achieved - target) > spec.fraction_tolerance:
        raise GenerationError(f"lesion fraction {achieved:.3f} misses {target:.3f} ± {spec.fraction_tolerance}")

    texture = np.where(lesion, texture_b, texture_a)
    outside = OUTSIDE_LEVEL + OUTSIDE_NOISE * rng.standard_normal(shape)
    voxels = np.where(roi, ROI_LEVEL + TEXTURE_GAIN * texture, outside).astype(np.float32)

    labels = np.full(shape, OUTSIDE, dtype=np.uint8)
    labels[roi] = TEXTURE_A
    labels[lesion] = TEXTURE_B
    return (
        Volume(voxels, spec.spacing_mm),
        RoiMask(roi.astype(np.uint8), spec.spacing_mm),
        PhantomTruth(labels, grade, achieved, target),
    )


def generate_phantom(spec: PhantomSpec, case_index: int, grade: Optional[int] = None):
    """
    One case, deterministic in (seed, case_index). Each retry reseeds from
    the attempt number; GenerationError surfaces once retries run out.
    """
    if grade is None:
        if not 0 <= case_index < spec.n_cases:
            raise InputError(f"case index {case_index} outside a cohort of {spec.n_cases}")
        grade = cohort_grades(spec)[case_index]
    attempt = with_retries(retries=spec.max_retries, exceptions=(GenerationError,))(_generate_attempt)
    return attempt(spec, case_index, grade)


def truth_path_for(volume_path: Path, case_id: str) -> Path:
    """Truth label map stored beside a case volume."""
    return Path(volume_path).parent / f"truth_{case_id}.json"


def write_truth_table(path: Path, records: List[CaseRecord], truths: List[PhantomTruth]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["case_id", "grade", "lesion_fraction"])
            for record, truth in zip(records, truths):
                writer.writerow([record.case_id, truth.grade, f"{truth.lesion_fraction:.6f}"])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write phantom truth: {e}") from e


def generate_cohort(spec: PhantomSpec, out_dir: Path, workers: int = 1) -> CohortResult:
    """Write every case (volume, mask, truth labels), the manifest and the truth table."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PipelineIOError(out_dir, f"cannot create output directory: {e}") from e
    grades = cohort_grades(spec)

    def build_case(index: int):
        case_id = case_name(index)
        volume, mask, truth = generate_phantom(spec, index, grades[index])
        volume_path = out_dir / f"{case_id}.json"
        mask_path = out_dir / f"{case_id}_mask.json"
        write_volume(volume_path, volume)
        write_mask(mask_path, mask)
        write_label_map(truth_path_for(volume_path, case_id), truth.labels, spec.spacing_mm)
        logger.debug(f"🧪 {case_id}: grade {truth.grade}, lesion {truth.lesion_fraction:.3f}")
        return CaseRecord(case_id=case_id, volume_path=volume_path, mask_path=mask_path, grade=truth.grade), truth

    built = run_concurrently(build_case, range(spec.n_cases), workers)
    records = [b[0] for b in built]
    truths = [b[1] for b in built]

    manifest_path = out_dir / MANIFEST_NAME
    truth_path = out_dir / TRUTH_TABLE_NAME
    write_manifest(manifest_path, records)
    write_truth_table(truth_path, records, truths)
    histogram = np.bincount(grades, minlength=len(GRADES)).tolist()
    logger.info(f"✅ Phantom cohort: {spec.n_cases} cases, grade histogram {histogram}")
    return CohortResult(manifest_path, truth_path, records, truths)
