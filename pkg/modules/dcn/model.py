"""
DCN Model State
Training configuration, the (W, Z, M, c) model bundle and the per-epoch log.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config.settings import PipelineConfig
from modules.net import AutoencoderParams, read_checkpoint, write_checkpoint
from utils.errors import ConfigError, PipelineIOError


class TrainConfig(BaseModel):
    """Hyperparameters of pretraining and joint training."""
    model_config = ConfigDict(populate_by_name=True, extra="forbid", frozen=True)

    lam: float = Field(default=0.05, ge=0, alias="lambda")
    k: int = Field(default=10, ge=2)
    pretrain_epochs: int = Field(default=20, ge=0)
    joint_epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    seed: int = Field(default=0, ge=0)
    centroid_update_mode: Literal["online", "batch"] = "online"
    kmeans_max_iter: int = Field(default=300, ge=1)
    kmeans_tol: float = Field(default=1e-6, ge=0)

    @classmethod
    def build(cls, **values) -> "TrainConfig":
        """Construct with validation failures reported as ConfigError."""
        try:
            return cls(**values)
        except ValidationError as e:
            problems = "; ".join(f"{err['loc'][0]}: {err['msg']}" for err in e.errors())
            raise ConfigError(f"invalid training configuration: {problems}") from e

    @classmethod
    def from_pipeline(cls, config: PipelineConfig) -> "TrainConfig":
        return cls.build(**{name: getattr(config, name) for name in cls.model_fields})


@dataclass
class DcnModel:
    params: AutoencoderParams
    centroids: np.ndarray
    cluster_counts: np.ndarray

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def copy(self) -> "DcnModel":
        return DcnModel(self.params.copy(), self.centroids.copy(), self.cluster_counts.copy())

    def save(self, path: Path) -> None:
        write_checkpoint(path, self.params, self.centroids, self.cluster_counts)

    @classmethod
    def load(cls, path: Path) -> "DcnModel":
        checkpoint = read_checkpoint(path)
        return cls(checkpoint.params, checkpoint.centroids.astype(np.float64), checkpoint.cluster_counts)


@dataclass(frozen=True)
class EpochRecord:
    phase: str
    epoch: int
    recon: float
    cluster: float
    total: float
    reassigned_fraction: float


@dataclass
class TrainLog:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def phase(self, name: str) -> List[EpochRecord]:
        return [r for r in self.records if r.phase == name]

    def write_csv(self, path: Path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["epoch", "recon", "cluster", "total", "reassigned_fraction", "phase"])
                for r in self.records:
                    writer.writerow([
                        r.epoch, f"{r.recon:.8g}", f"{r.cluster:.8g}", f"{r.total:.8g}",
                        f"{r.reassigned_fraction:.6f}", r.phase,
                    ])
        except OSError as e:
            raise PipelineIOError(path, f"cannot write training log: {e}") from e
