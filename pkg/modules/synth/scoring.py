"""
Clustering Agreement
Scores predicted window clusters against the phantom's true texture labels.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Sequence, Tuple

import numpy as np
from sklearn.metrics import normalized_mutual_info_score

from config.settings import settings
from config.logger_config import setup_logger
from modules.signature import LabelMap
from modules.volume_io import CaseRecord, WindowGeometry, read_label_map
from utils.errors import InputError, PipelineIOError
from .phantom import truth_path_for

logger = setup_logger("Scoring", settings.log_level)

SCORE_FILE_NAME = "clustering_score.json"


@dataclass
class ClusteringScore:
    nmi: float
    purity: float
    n_windows: int
    per_case: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def as_dict(self) -> Dict:
        return {"nmi": self.nmi, "purity": self.purity, "n_windows": self.n_windows, "per_case": self.per_case}


def clustering_agreement(truth: Sequence[int], predicted: Sequence[int]) -> ClusteringScore:
    """NMI and purity; purity credits each predicted cluster with its majority truth label."""
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise InputError(f"{predicted.size} predicted labels for {truth.size} truth labels")
    if truth.size == 0:
        return ClusteringScore(0.0, 0.0, 0)

    majority = 0
    for cluster in np.unique(predicted):
        majority += int(np.bincount(truth[predicted == cluster]).max())
    nmi = float(normalized_mutual_info_score(truth, predicted))
    return ClusteringScore(nmi, majority / truth.size, int(truth.size))


def window_truth(truth_labels: np.ndarray, label_map: LabelMap, geometry: WindowGeometry) -> Tuple[np.ndarray, np.ndarray]:
    """
    Majority texture id (ties to the lower id) inside each window footprint.
    Windows whose footprint holds no texture voxel are skipped.
    """
    nz, ny, nx = truth_labels.shape
    truths, predicted = [], []
    for w in label_map.windows:
        x0 = max(int(math.floor(w.cx_px - geometry.width_px / 2)), 0)
        x1 = min(int(math.ceil(w.cx_px + geometry.width_px / 2)), nx)
        y0 = max(int(math.floor(w.cy_px - geometry.height_px / 2)), 0)
        y1 = min(int(math.ceil(w.cy_px + geometry.height_px / 2)), ny)
        footprint = truth_labels[w.slice_index, y0:y1, x0:x1].ravel()
        footprint = footprint[footprint > 0]
        if footprint.size == 0:
            continue
        truths.append(int(np.argmax(np.bincount(footprint))))
        predicted.append(w.cluster)
    return np.array(truths, dtype=np.int64), np.array(predicted, dtype=np.int64)


def score_clustering(truth_labels: np.ndarray, label_map: LabelMap, geometry: WindowGeometry) -> ClusteringScore:
    truths, predicted = window_truth(truth_labels, label_map, geometry)
    return clustering_agreement(truths, predicted)


def score_cohort(
    records: Sequence[CaseRecord],
    label_maps: Sequence[LabelMap],
    window_mm: float,
    out_px: int,
) -> ClusteringScore:
    """Pooled window-level agreement over a phantom cohort, plus per-case scores."""
    by_case = {m.case_id: m for m in label_maps}
    all_truth, all_pred = [], []
    per_case: Dict[str, Dict[str, float]] = {}
    for record in records:
        label_map = by_case.get(record.case_id)
        if label_map is None:
            continue
        labels, spacing = read_label_map(truth_path_for(record.volume_path, record.case_id))
        geometry = WindowGeometry.from_spacing(window_mm, spacing, out_px)
        truths, predicted = window_truth(labels, label_map, geometry)
        case_score = clustering_agreement(truths, predicted)
        per_case[record.case_id] = {"nmi": case_score.nmi, "purity": case_score.purity}
        all_truth.append(truths)
        all_pred.append(predicted)

    if not all_truth:
        raise InputError("no label map matches a manifest case")
    score = clustering_agreement(np.concatenate(all_truth), np.concatenate(all_pred))
    score.per_case = per_case
    logger.metric(f"🎯 Window NMI {score.nmi:.3f}, purity {score.purity:.3f} over {score.n_windows} windows")
    return score


def write_clustering_score(out_dir: Path, score: ClusteringScore) -> Path:
    path = Path(out_dir) / SCORE_FILE_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(score.as_dict(), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise PipelineIOError(path, f"cannot write clustering score: {e}") from e
    return path
