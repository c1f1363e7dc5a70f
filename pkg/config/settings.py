import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from config.logger_config import setup_logger
from utils.errors import ConfigError

load_dotenv()

EFFECTIVE_CONFIG_NAME = "effective_config.json"


class PipelineConfig(BaseSettings):
    """Unified configuration for the texture-pattern discovery pipeline"""

    model_config = SettingsConfigDict(
        env_prefix="TEXDCN_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="forbid",
        populate_by_name=True,
    )

    # ============== RUN ==============
    seed: int = Field(default=0, ge=0)
    out_dir: str = "runs"
    workers: int = Field(default=1, ge=1)

    # ============== PATHS (empty = derived from out_dir) ==============
    manifest_path: str = ""
    patches_path: str = ""
    checkpoint_path: str = ""
    signatures_path: str = ""
    label_map_path: str = ""

    # ============== PATCH EXTRACTION ==============
    n_patches: int = Field(default=50000, ge=1)
    window_mm: float = Field(default=14.0, gt=0)
    out_px: int = Field(default=32, ge=2)
    accept_fraction: float = Field(default=0.9, gt=0, le=1)

    # ============== DEEP CLUSTERING ==============
    lam: float = Field(default=0.05, ge=0, alias="lambda")
    k: int = Field(default=10, ge=2)
    pretrain_epochs: int = Field(default=20, ge=0)
    joint_epochs: int = Field(default=50, ge=0)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=1e-3, ge=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    centroid_update_mode: Literal["online", "batch"] = "online"
    kmeans_max_iter: int = Field(default=300, ge=1)
    kmeans_tol: float = Field(default=1e-6, ge=0)

    # ============== SIGNATURE ==============
    stride_px: int = Field(default=8, ge=1)
    top_clusters: int = Field(default=4, ge=1)

    # ============== LINKER ==============
    n_trees: int = Field(default=100, ge=1)
    mtry: Optional[int] = Field(default=None, ge=1)
    lasso_alpha_grid: List[float] = Field(default_factory=lambda: [0.001, 0.01, 0.05, 0.1, 0.5])
    lasso_max_iter: int = Field(default=10000, ge=1)
    lasso_tol: float = Field(default=1e-8, gt=0)
    link_task: Literal["both", "binary_forest", "grade_lasso"] = "both"

    # ============== PHANTOM COHORT ==============
    phantom_n_cases: int = Field(default=40, ge=1)
    phantom_grade_counts: Optional[List[int]] = None
    phantom_dims: Tuple[int, int, int] = (96, 96, 6)
    phantom_spacing_mm: Tuple[float, float, float] = (0.4375, 0.4375, 3.0)
    phantom_lesion_base: float = Field(default=0.2, ge=0, le=1)
    phantom_lesion_step: float = Field(default=0.2, gt=0)
    phantom_noise_sigma_px: float = Field(default=2.0, gt=0)
    phantom_stripe_period_px: float = Field(default=4.0, gt=2)
    phantom_stripe_angle_deg: float = 0.0
    phantom_blob_radius_mm: float = Field(default=3.5, gt=0)

    # ============== LOGGING ==============
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @model_validator(mode="after")
    def _check_lasso_grid(self) -> "PipelineConfig":
        if not self.lasso_alpha_grid or any(a < 0 for a in self.lasso_alpha_grid):
            raise ValueError("lasso_alpha_grid must be a non-empty list of non-negative values")
        return self

    # ============== DERIVED PATHS ==============

    def path_for(self, field: str, default_name: str) -> Path:
        """Explicit path if configured, else `<out_dir>/<default_name>`."""
        explicit = getattr(self, field)
        return Path(explicit) if explicit else Path(self.out_dir) / default_name

    def to_document(self) -> Dict[str, Any]:
        """Flat JSON-ready view keyed by the public (aliased) names."""
        return self.model_dump(mode="json", by_alias=True)


settings = PipelineConfig()


def load_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Build the effective configuration.

    Layering: defaults < environment/.env < JSON config file < explicit overrides.
    Overrides whose value is None are ignored.
    """
    document: Dict[str, Any] = {}
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config file {config_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"config file {config_path} must hold a flat JSON object")

    merged = dict(document)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    try:
        return PipelineConfig(**merged)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e


def write_effective_config(config: PipelineConfig, out_dir: Path) -> Path:
    """Echo the effective configuration into the output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / EFFECTIVE_CONFIG_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_document(), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def describe_config(config: PipelineConfig) -> None:
    """Log the settings that shape a run."""
    logger = setup_logger("Config", config.log_level, config.log_file)
    logger.info("Run Settings:")
    logger.info(f"  • Seed: {config.seed} • Workers: {config.workers}")
    logger.info(f"  • Patches: {config.n_patches} of {config.window_mm:g} mm → {config.out_px} px")
    logger.info(
        f"  • DCN: k={config.k} λ={config.lam:g} pretrain={config.pretrain_epochs} "
        f"joint={config.joint_epochs} batch={config.batch_size} lr={config.learning_rate:g} "
        f"centroids={config.centroid_update_mode}"
    )
    logger.info(f"  • Signature stride: {config.stride_px} px")
    logger.info(f"  • Linker: {config.n_trees} trees, LASSO grid {config.lasso_alpha_grid}")
