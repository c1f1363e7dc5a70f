"""
Signature and label-map CSV tables. Clusters are numbered from 1 in files.
"""
import csv
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from utils.errors import FormatError, PipelineIOError
from .sliding import LabelMap, Signature, WindowLabel

LABEL_MAP_COLUMNS = ["case_id", "slice", "cx_px", "cy_px", "cluster"]


def signature_columns(k: int) -> List[str]:
    return ["case_id", "grade", "window_count"] + [f"c{i}" for i in range(1, k + 1)]


def write_signature_table(path: Path, signatures: Sequence[Signature]) -> None:
    path = Path(path)
    k = signatures[0].k if signatures else 0
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(signature_columns(k))
            for s in signatures:
                grade = "" if s.grade is None else s.grade
                writer.writerow([s.case_id, grade, s.window_count] + [repr(float(p)) for p in s.proportions])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write signature table: {e}") from e


def read_signature_table(path: Path) -> List[Signature]:
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise PipelineIOError(path, f"cannot read signature table: {e}") from e
    if not rows:
        raise FormatError(f"{path}: empty signature table", "header")

    header = rows[0]
    k = len(header) - 3
    if k < 1 or header != signature_columns(k):
        raise FormatError(f"{path}: header must be case_id,grade,window_count,c1..ck", "header")

    signatures = []
    for number, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise FormatError(f"{path}: row {number} has {len(row)} fields, expected {len(header)}", "row")
        try:
            grade = int(row[1]) if row[1] != "" else None
            signatures.append(Signature(row[0], np.array([float(v) for v in row[3:]]), int(row[2]), grade))
        except ValueError as e:
            raise FormatError(f"{path}: row {number}: {e}", "row") from e
    return signatures


def write_label_map_csv(path: Path, label_maps: Sequence[LabelMap]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(LABEL_MAP_COLUMNS)
            for label_map in label_maps:
                for w in label_map.windows:
                    writer.writerow([label_map.case_id, w.slice_index, w.cx_px, w.cy_px, w.cluster + 1])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write label map: {e}") from e


def read_label_map_csv(path: Path) -> List[LabelMap]:
    """Label maps grouped by case, in first-appearance order."""
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames != LABEL_MAP_COLUMNS:
                raise FormatError(f"{path}: header must be {','.join(LABEL_MAP_COLUMNS)}", "header")
            grouped: Dict[str, LabelMap] = {}
            for row in reader:
                case = row["case_id"]
                grouped.setdefault(case, LabelMap(case)).windows.append(WindowLabel(
                    int(row["slice"]), int(row["cx_px"]), int(row["cy_px"]), int(row["cluster"]) - 1
                ))
    except OSError as e:
        raise PipelineIOError(path, f"cannot read label map: {e}") from e
    except ValueError as e:
        raise FormatError(f"{path}: {e}", "row") from e
    return list(grouped.values())


def top_cluster_maps(label_maps: Sequence[LabelMap], importance: np.ndarray, n: int = 4) -> List[LabelMap]:
    """Restrict label maps to the ``n`` most important clusters (ties to the lower index)."""
    order = np.argsort(-np.asarray(importance), kind="stable")[:n]
    return [m.only(order.tolist()) for m in label_maps]
