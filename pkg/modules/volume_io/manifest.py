"""
Case Manifest
CSV listing of cases: `case_id,volume_path,mask_path,grade`.
"""
import csv
from pathlib import Path
from typing import List, Sequence

from pydantic import BaseModel, Field, ValidationError, field_validator

from utils.errors import ManifestError, PipelineIOError

MANIFEST_COLUMNS = ["case_id", "volume_path", "mask_path", "grade"]


class CaseRecord(BaseModel):
    """One manifest row; paths are absolute once read."""
    case_id: str = Field(min_length=1)
    volume_path: Path
    mask_path: Path
    grade: int = Field(ge=0, le=3)

    @field_validator("case_id")
    @classmethod
    def _strip(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("case_id is empty")
        return v

    @property
    def binary_label(self) -> int:
        """0 = low (grades 0 and 1), 1 = high (grades 2 and 3)."""
        return int(self.grade >= 2)


def read_manifest(path: Path) -> List[CaseRecord]:
    """
    Parse a manifest in file order. Relative paths resolve against the
    manifest's directory. Rows are numbered from 1 (first data row).
    """
    path = Path(path)
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            missing = [c for c in MANIFEST_COLUMNS if c not in header]
            if missing:
                raise ManifestError(f"missing column(s) {', '.join(missing)}", 0)
            rows = list(reader)
    except OSError as e:
        raise PipelineIOError(path, f"cannot read manifest: {e}") from e

    base = path.parent
    records: List[CaseRecord] = []
    seen = set()
    for row_number, row in enumerate(rows, start=1):
        grade_text = (row.get("grade") or "").strip()
        try:
            grade = int(grade_text)
        except ValueError:
            raise ManifestError(f"grade {grade_text!r} is not an integer", row_number) from None
        try:
            record = CaseRecord(
                case_id=row.get("case_id") or "",
                volume_path=base / (row.get("volume_path") or "").strip(),
                mask_path=base / (row.get("mask_path") or "").strip(),
                grade=grade,
            )
        except ValidationError as e:
            detail = "; ".join(f"{err['loc'][0]}: {err['msg']}" for err in e.errors())
            raise ManifestError(detail, row_number) from None
        if record.case_id in seen:
            raise ManifestError(f"duplicate case_id {record.case_id!r}", row_number)
        seen.add(record.case_id)
        records.append(record)
    return records


def write_manifest(path: Path, records: Sequence[CaseRecord]) -> None:
    """Write records; paths inside the manifest's directory are stored relative."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: Path) -> str:
        try:
            return Path(p).resolve().relative_to(base).as_posix()
        except ValueError:
            return str(p)

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(MANIFEST_COLUMNS)
            for r in records:
                writer.writerow([r.case_id, rel(r.volume_path), rel(r.mask_path), r.grade])
    except OSError as e:
        raise PipelineIOError(path, f"cannot write manifest: {e}") from e
