"""
Phantom cohorts with known texture truth, and clustering agreement scores.
"""
import csv

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import TWIN_WINDOW_MM
from config.settings import PipelineConfig
from modules.signature import LabelMap, WindowLabel, signatures_for_manifest
from modules.synth import (
    OUTSIDE, SPECTRAL_MARGIN, TEXTURE_A, TEXTURE_B, TRUTH_TABLE_NAME, PhantomSpec,
    band_power_difference, clustering_agreement, cohort_grades, ellipsoid_roi, generate_cohort,
    generate_phantom, score_clustering, score_cohort, smooth_texture, stripe_texture, window_truth,
    write_clustering_score,
)
from modules.volume_io import WindowGeometry, read_manifest
from utils.errors import ConfigError, InputError


# ============== COHORTS ==============

def test_grade_histogram_is_exact(small_spec):
    assert np.bincount(cohort_grades(small_spec), minlength=4).tolist() == [2, 2, 2, 2]
    custom = small_spec.model_copy(update={"n_cases": 4, "grade_counts": [1, 0, 3, 0]})
    assert sorted(cohort_grades(custom)) == [0, 2, 2, 2]


def test_cohort_manifest_matches_grades(small_cohort, small_spec):
    records = read_manifest(small_cohort.manifest_path)
    assert [r.case_id for r in records] == [f"case_{i:03d}" for i in range(8)]
    assert [r.grade for r in records] == cohort_grades(small_spec)


def test_cohort_is_byte_identical_across_runs_and_workers(tmp_path, small_spec):
    spec = small_spec.model_copy(update={"n_cases": 3})
    first = generate_cohort(spec, tmp_path / "a")
    generate_cohort(spec, tmp_path / "b", workers=3)
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name
    assert len(first.records) == 3


def test_lesion_fraction_meets_target(small_cohort, small_spec):
    for truth in small_cohort.truths:
        assert truth.target_fraction == pytest.approx(small_spec.lesion_fraction(truth.grade))
        assert abs(truth.lesion_fraction - truth.target_fraction) <= small_spec.fraction_tolerance
        inside = truth.labels > OUTSIDE
        assert truth.lesion_fraction == pytest.approx(np.mean(truth.labels[inside] == TEXTURE_B))


def test_truth_labels_follow_the_roi(small_spec):
    volume, mask, truth = generate_phantom(small_spec, 0)
    np.testing.assert_array_equal(truth.labels > OUTSIDE, mask.voxels == 1)
    assert set(np.unique(truth.labels)) <= {OUTSIDE, TEXTURE_A, TEXTURE_B}
    assert volume.voxels[mask.voxels == 1].mean() > volume.voxels[mask.voxels == 0].mean()


def test_extreme_lesion_fractions(small_spec):
    spec = small_spec.model_copy(update={"lesion_base": 0.0, "lesion_step": 1 / 3})
    _, _, empty = generate_phantom(spec, 0, grade=0)
    _, _, full = generate_phantom(spec, 0, grade=3)
    assert empty.lesion_fraction == 0.0
    assert not np.any(empty.labels == TEXTURE_B)
    assert full.lesion_fraction == 1.0
    assert not np.any(full.labels == TEXTURE_A)


def test_phantom_is_deterministic(small_spec):
    first = generate_phantom(small_spec, 2)
    second = generate_phantom(small_spec, 2)
    np.testing.assert_array_equal(first[0].voxels, second[0].voxels)
    np.testing.assert_array_equal(first[2].labels, second[2].labels)


def test_phantom_index_outside_cohort(small_spec):
    with pytest.raises(InputError):
        generate_phantom(small_spec, 8)


def test_truth_table(small_cohort):
    with open(small_cohort.truth_path, newline="") as f:
        rows = list(csv.reader(f))
    assert small_cohort.truth_path.name == TRUTH_TABLE_NAME
    assert rows[0] == ["case_id", "grade", "lesion_fraction"]
    assert len(rows) == 9


# ============== PHANTOM RECIPE VALIDATION ==============

def test_spec_rejects_non_increasing_fractions():
    with pytest.raises(ValidationError):
        PhantomSpec(lesion_base=0.5, lesion_step=0.2)


def test_spec_rejects_grade_counts_that_do_not_sum():
    with pytest.raises(ValidationError):
        PhantomSpec(n_cases=4, grade_counts=[1, 1, 1, 0])


def test_spec_from_pipeline_reports_config_error():
    with pytest.raises(ConfigError):
        PhantomSpec.from_pipeline(PipelineConfig(phantom_lesion_base=0.9, phantom_lesion_step=0.2))


def test_spec_from_pipeline_takes_seed_and_dims():
    spec = PhantomSpec.from_pipeline(PipelineConfig(seed=7, phantom_dims=(24, 24, 2)))
    assert spec.seed == 7
    assert spec.dims == (24, 24, 2)


# ============== TEXTURES ==============

def test_ellipsoid_roi_is_centred():
    roi = ellipsoid_roi((24, 24, 2))
    assert roi.shape == (2, 24, 24)
    assert roi[:, 12, 12].all()
    assert not roi[:, 0, 0].any()
    np.testing.assert_array_equal(roi, roi[:, ::-1, ::-1])


def test_textures_are_spectrally_separated():
    rng = np.random.default_rng(0)
    shape = (2, 24, 24)
    a = smooth_texture(shape, 2.0, rng)
    b = stripe_texture(shape, 4.0, 0.0, rng)
    assert band_power_difference(a, b, 4.0) >= SPECTRAL_MARGIN
    assert band_power_difference(a, a, 4.0) == 0.0
    assert a.mean() == pytest.approx(0.0, abs=1e-9)
    assert b.mean() == pytest.approx(1.0, abs=1e-9)
    assert b.std() == pytest.approx(1.0)


# ============== SCORING ==============

def test_agreement_identical_partition():
    score = clustering_agreement([1, 1, 2, 2], [0, 0, 1, 1])
    assert score.nmi == pytest.approx(1.0)
    assert score.purity == 1.0
    assert score.n_windows == 4


def test_agreement_single_cluster():
    score = clustering_agreement([1, 1, 1, 2], [0, 0, 0, 0])
    assert score.purity == 0.75
    assert score.nmi == pytest.approx(0.0, abs=1e-12)


def test_agreement_edge_cases():
    assert clustering_agreement([], []).n_windows == 0
    with pytest.raises(InputError):
        clustering_agreement([1, 2], [0])


def test_window_truth_takes_footprint_majority():
    labels = np.zeros((2, 8, 8), dtype=np.uint8)
    labels[0, :, :4] = TEXTURE_A
    labels[0, :, 4:] = TEXTURE_B
    label_map = LabelMap("x", [WindowLabel(0, 2, 4, 5), WindowLabel(0, 6, 4, 1), WindowLabel(1, 4, 4, 0)])
    truths, predicted = window_truth(labels, label_map, WindowGeometry.from_spacing(4.0, (1.0, 1.0, 1.0), 4))
    np.testing.assert_array_equal(truths, [TEXTURE_A, TEXTURE_B])
    np.testing.assert_array_equal(predicted, [5, 1])


def test_score_clustering_random_clusters_share_no_information():
    rng = np.random.default_rng(17)
    n = 20000
    labels = np.repeat(rng.choice([TEXTURE_A, TEXTURE_B], n), 16).reshape(n, 4, 4).astype(np.uint8)
    label_map = LabelMap("noise", [WindowLabel(z, 2, 2, int(c)) for z, c in enumerate(rng.integers(0, 10, n))])
    score = score_clustering(labels, label_map, WindowGeometry.from_spacing(4.0, (1.0, 1.0, 1.0), 4))
    assert score.n_windows == n
    assert score.nmi < 0.01


def test_score_cohort(tmp_path, small_cohort, twin_model):
    records = small_cohort.records[:4]
    _, label_maps = signatures_for_manifest(twin_model, records, 4, TWIN_WINDOW_MM)
    score = score_cohort(records, label_maps, TWIN_WINDOW_MM, 8)
    assert score.n_windows > 0
    assert 0.0 <= score.purity <= 1.0
    assert set(score.per_case) == {r.case_id for r in records}
    assert write_clustering_score(tmp_path, score).name == "clustering_score.json"


def test_score_cohort_without_matching_maps(small_cohort):
    with pytest.raises(InputError):
        score_cohort(small_cohort.records, [LabelMap("elsewhere")], TWIN_WINDOW_MM, 8)
