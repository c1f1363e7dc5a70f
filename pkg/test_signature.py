"""
Sliding-window signatures, label maps and their CSV tables.
"""
import numpy as np
import pytest

from conftest import TWIN_WINDOW_MM
from modules.signature import (
    LabelMap, Signature, WindowLabel, compute_signature, proportions_from_labels,
    read_label_map_csv, read_signature_table, signatures_for_manifest, top_cluster_maps,
    window_centers, write_label_map_csv, write_signature_table,
)
from modules.volume_io import RoiMask, Volume, normalize, read_mask, read_volume
from utils.errors import EmptyRoiError, FormatError


def test_window_centers_fit_inside_extent():
    assert window_centers(24, 8.0, 4) == [4, 8, 12, 16, 20]
    assert window_centers(8, 8.0, 3) == [4]
    assert window_centers(7, 8.0, 1) == []


def test_proportions_from_labels():
    np.testing.assert_allclose(proportions_from_labels(np.array([0, 0, 2, 2]), 4), [0.5, 0.0, 0.5, 0.0])


def _case(record):
    mask = read_mask(record.mask_path)
    volume, _ = normalize(read_volume(record.volume_path), mask)
    return volume, mask


def test_signature_sums_to_one(small_cohort, twin_model):
    volume, mask = _case(small_cohort.records[0])
    signature, label_map = compute_signature(twin_model, volume, mask, 4, TWIN_WINDOW_MM, case_id="x")
    assert signature.k == 3
    assert signature.proportions.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(signature.proportions >= 0)
    assert signature.window_count == len(label_map.windows) > 0
    assert all(0 <= w.cluster < 3 for w in label_map.windows)


def test_signature_is_worker_invariant(small_cohort, twin_model):
    volume, mask = _case(small_cohort.records[1])
    serial, serial_map = compute_signature(twin_model, volume, mask, 4, TWIN_WINDOW_MM)
    again, _ = compute_signature(twin_model, volume, mask, 4, TWIN_WINDOW_MM)
    threaded, threaded_map = compute_signature(twin_model, volume, mask, 4, TWIN_WINDOW_MM, workers=3)
    np.testing.assert_array_equal(serial.proportions, again.proportions)
    np.testing.assert_array_equal(serial.proportions, threaded.proportions)
    assert serial_map.windows == threaded_map.windows


def test_empty_roi_raises(twin_model):
    volume = Volume(np.zeros((1, 16, 16), dtype=np.float32), (0.4375, 0.4375, 3.0))
    mask = RoiMask(np.zeros((1, 16, 16), dtype=np.uint8), volume.spacing_mm)
    with pytest.raises(EmptyRoiError) as info:
        compute_signature(twin_model, volume, mask, 4, TWIN_WINDOW_MM, case_id="blank")
    assert info.value.case_id == "blank"


def test_signatures_for_manifest_keeps_order_and_grades(small_cohort, twin_model):
    records = small_cohort.records[:3]
    signatures, label_maps = signatures_for_manifest(twin_model, records, 4, TWIN_WINDOW_MM, workers=2)
    assert [s.case_id for s in signatures] == [r.case_id for r in records]
    assert [s.grade for s in signatures] == [r.grade for r in records]
    assert [m.case_id for m in label_maps] == [r.case_id for r in records]


# ============== TABLES ==============

def test_signature_table_round_trip(tmp_path):
    signatures = [
        Signature("a", np.array([0.25, 0.75]), 4, 0),
        Signature("b", np.array([1 / 3, 2 / 3]), 3, None),
    ]
    write_signature_table(tmp_path / "s.csv", signatures)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "case_id,grade,window_count,c1,c2"
    parsed = read_signature_table(tmp_path / "s.csv")
    assert [s.case_id for s in parsed] == ["a", "b"]
    assert parsed[1].grade is None
    np.testing.assert_array_equal(parsed[1].proportions, signatures[1].proportions)


def test_signature_table_bad_header(tmp_path):
    (tmp_path / "s.csv").write_text("case,grade,window_count,c1\n")
    with pytest.raises(FormatError):
        read_signature_table(tmp_path / "s.csv")


def test_label_map_numbers_clusters_from_one(tmp_path):
    maps = [LabelMap("a", [WindowLabel(0, 4, 4, 0), WindowLabel(1, 8, 4, 2)]), LabelMap("b", [WindowLabel(0, 4, 8, 1)])]
    write_label_map_csv(tmp_path / "m.csv", maps)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "case_id,slice,cx_px,cy_px,cluster"
    assert lines[1] == "a,0,4,4,1"
    parsed = read_label_map_csv(tmp_path / "m.csv")
    assert [m.case_id for m in parsed] == ["a", "b"]
    assert parsed[0].windows == maps[0].windows


def test_top_cluster_maps_keeps_most_important():
    label_map = LabelMap("a", [WindowLabel(0, 4, 4, c) for c in range(4)])
    (top,) = top_cluster_maps([label_map], np.array([0.1, 0.4, 0.1, 0.4]), 2)
    assert [w.cluster for w in top.windows] == [1, 3]
