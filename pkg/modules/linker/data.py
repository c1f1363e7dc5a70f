"""
Labeled signature data for the linker.
"""
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from modules.signature import Signature
from utils.errors import InputError


def binary_label(grade: int) -> int:
    """Low (0) for grades 0 and 1, high (1) for grades 2 and 3."""
    return int(grade >= 2)


@dataclass(frozen=True)
class LabeledSignature:
    case_id: str
    signature: np.ndarray
    grade: int

    @property
    def binary_label(self) -> int:
        return binary_label(self.grade)


@dataclass
class SignatureDataset:
    """Column view: one row per case."""
    case_ids: List[str]
    X: np.ndarray
    grades: np.ndarray

    def __len__(self) -> int:
        return len(self.case_ids)

    @property
    def k(self) -> int:
        return int(self.X.shape[1])

    @property
    def labels(self) -> np.ndarray:
        return (self.grades >= 2).astype(np.int64)

    def subset(self, indices: Sequence[int]) -> "SignatureDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return SignatureDataset([self.case_ids[i] for i in idx], self.X[idx], self.grades[idx])

    @classmethod
    def from_labeled(cls, data: Sequence[LabeledSignature]) -> "SignatureDataset":
        if not data:
            raise InputError("no labeled signatures")
        return cls(
            [d.case_id for d in data],
            np.vstack([np.asarray(d.signature, dtype=np.float64) for d in data]),
            np.array([d.grade for d in data], dtype=np.int64),
        )

    @classmethod
    def from_signatures(cls, signatures: Sequence[Signature]) -> "SignatureDataset":
        missing = [s.case_id for s in signatures if s.grade is None]
        if missing:
            raise InputError(f"signatures without grade: {', '.join(missing)}")
        return cls.from_labeled([LabeledSignature(s.case_id, s.proportions, int(s.grade)) for s in signatures])


DataLike = Union[SignatureDataset, Sequence[LabeledSignature]]


def as_dataset(data: DataLike) -> SignatureDataset:
    return data if isinstance(data, SignatureDataset) else SignatureDataset.from_labeled(data)
