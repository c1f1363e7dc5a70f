"""
Linker Report Files
metrics.json, importance.csv and regression.csv (+ charts).
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Optional

from utils.errors import PipelineIOError
from .crossval import MetricsReport
from .importance import ImportanceTable
from .renderer import importance_chart, regression_chart, write_chart

IMPORTANCE_COLUMNS = ["cluster", "mean", "sd", "top4_freq"]


def _importance_document(table: ImportanceTable) -> Dict[str, Any]:
    return {
        "n_folds": table.n_folds,
        "top_n": table.top_n,
        "clusters": [
            {
                "cluster": i + 1,
                "mean": float(table.mean[i]),
                "sd": float(table.sd[i]),
                "top_freq": float(table.top_freq[i]),
                "top1_freq": float(table.top1_freq[i]),
            }
            for i in range(table.k)
        ],
        "modal_top2_pair": [c + 1 for c in table.modal_pair] if table.modal_pair else None,
        "modal_top2_freq": table.modal_pair_freq,
    }


def metrics_document(binary: Optional[MetricsReport], regression: Optional[MetricsReport]) -> Dict[str, Any]:
    """JSON view; the ``metrics`` object carries exactly accuracy, sensitivity, specificity and f1."""
    document: Dict[str, Any] = {}
    if binary is not None:
        m = binary.metrics
        document["metrics"] = m.as_dict()
        document["binary_forest"] = {
            "n_folds": binary.n_folds,
            "confusion": {"tp": m.tp, "fn": m.fn, "tn": m.tn, "fp": m.fp},
            "zero_division": m.zero_division,
            "flagged": binary.flagged,
            "failed_folds": [{"fold": f.fold, "case_id": f.case_id, "reason": f.reason} for f in binary.failures],
            "predictions": [
                {"case_id": p.case_id, "truth": "high" if p.truth else "low", "predicted": "high" if p.predicted else "low"}
                for p in binary.predictions
            ],
            "importance": _importance_document(binary.importance) if binary.importance else None,
        }
    if regression is not None:
        document["grade_lasso"] = {
            "n_folds": regression.n_folds,
            "spearman": regression.spearman,
            "alphas": regression.alphas,
            "per_grade": [
                {"grade": g.grade, "count": g.count, "mean": g.mean, "sd": g.sd} for g in regression.per_grade
            ],
            "flagged": regression.flagged,
            "failed_folds": [{"fold": f.fold, "case_id": f.case_id, "reason": f.reason} for f in regression.failures],
        }
    return document


def write_metrics_json(path: Path, binary: Optional[MetricsReport], regression: Optional[MetricsReport]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(metrics_document(binary, regression), f, indent=2)
            f.write("\n")
    except OSError as e:
        raise PipelineIOError(path, f"cannot write metrics: {e}") from e


def write_importance(out_dir: Path, table: ImportanceTable) -> Path:
    """importance.csv with one row per cluster (top-1 frequencies live in metrics.json), plus SVG/PNG bar charts."""
    out_dir = Path(out_dir)
    path = out_dir / "importance.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(IMPORTANCE_COLUMNS)
            for i in range(table.k):
                writer.writerow([i + 1, f"{table.mean[i]:.6f}", f"{table.sd[i]:.6f}", f"{table.top_freq[i]:.4f}"])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write importance table: {e}") from e
    write_chart(importance_chart(table), out_dir / "importance.svg", out_dir / "importance.png")
    return path


def write_regression(out_dir: Path, report: MetricsReport) -> Path:
    """regression.csv with one held-out prediction per case, plus scatter charts."""
    out_dir = Path(out_dir)
    path = out_dir / "regression.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["case_id", "true_grade", "predicted"])
            for p in report.predictions:
                writer.writerow([p.case_id, int(p.truth), f"{p.predicted:.6f}"])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write regression table: {e}") from e
    write_chart(regression_chart(report.predictions), out_dir / "regression.svg", out_dir / "regression.png")
    return path
