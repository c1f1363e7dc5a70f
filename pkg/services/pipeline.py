"""
Pipeline Runner Service
Runs the six pipeline commands (phantom, extract, train, signature, link,
gradcheck) against one effective configuration and reports each stage.
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from config.settings import PipelineConfig, describe_config, write_effective_config
from config.logger_config import setup_logger
from modules.dcn import DcnModel, TrainConfig, TrainLog, joint_train, train_dcn
from modules.linker import (
    METRIC_KEYS, MetricsReport, SignatureDataset, loo_cv,
    write_importance, write_metrics_json, write_regression,
)
from modules.net import ARCHITECTURES, autoencoder_check, init_params
from modules.signature import (
    read_label_map_csv, read_signature_table, signatures_for_manifest,
    top_cluster_maps, write_label_map_csv, write_signature_table,
)
from modules.synth import CohortResult, PhantomSpec, generate_cohort, score_cohort, write_clustering_score
from modules.tensor_core import GradCheckReport, layer_suite
from modules.volume_io import (
    extract_corpus, read_manifest, read_patchset, write_patchset, write_provenance,
)
from utils.errors import ConfigError, InvalidShapeError

# ============== DEFAULT FILE NAMES ==============
MANIFEST_FILE = "manifest.csv"
PATCHES_FILE = "patches.bin"
PROVENANCE_FILE = "patches_provenance.csv"
CHECKPOINT_FILE = "model.ckpt"
TRAIN_LOG_FILE = "train_log.csv"
SIGNATURES_FILE = "signatures.csv"
LABEL_MAP_FILE = "label_map.csv"
LABEL_MAP_TOP_FILE = "label_map_top.csv"
METRICS_FILE = "metrics.json"

LINK_TASKS = {"both": ("binary_forest", "grade_lasso"), "binary_forest": ("binary_forest",), "grade_lasso": ("grade_lasso",)}


class PipelineRunner:
    """Executes pipeline stages; library errors propagate to the caller."""

    def __init__(self, config: PipelineConfig, console: Optional[Console] = None):
        self.config = config
        self.console = console or Console()
        self.out_dir = Path(config.out_dir)
        self.logger = setup_logger("Pipeline", config.log_level, config.log_file)

    # ================= HELPERS =================

    def _begin(self, stage: str, details: Dict[str, object], style: str = "cyan") -> None:
        write_effective_config(self.config, self.out_dir)
        body = "\n".join(f"{name + ':':<16}{value}" for name, value in details.items())
        self.console.print(Panel(body, title=f"Stage: {stage}", border_style=style, expand=False))
        self.logger.stage(f"▶️ {stage}")

    def _path(self, field: str, default_name: str) -> Path:
        return self.config.path_for(field, default_name)

    def _arch(self):
        by_px = {a.input_px: a for a in ARCHITECTURES.values()}
        if self.config.out_px not in by_px:
            raise ConfigError(f"out_px={self.config.out_px} matches no architecture (choose one of {sorted(by_px)})")
        return by_px[self.config.out_px]

    # ================= PHANTOM =================

    def phantom(self) -> CohortResult:
        spec = PhantomSpec.from_pipeline(self.config)
        self._begin("phantom", {
            "Cases": spec.n_cases, "Dims": "×".join(map(str, spec.dims)),
            "Seed": spec.seed, "Output": self.out_dir,
        }, "magenta")
        result = generate_cohort(spec, self.out_dir, self.config.workers)
        self.logger.info(f"✅ Manifest written: [bold]{result.manifest_path}[/bold]")
        return result

    # ================= EXTRACT =================

    def extract(self) -> Path:
        manifest = self._path("manifest_path", MANIFEST_FILE)
        out_path = self._path("patches_path", PATCHES_FILE)
        self._begin("extract", {
            "Manifest": manifest, "Patches": self.config.n_patches,
            "Window": f"{self.config.window_mm:g} mm → {self.config.out_px} px",
        })
        records = read_manifest(manifest)
        patchset = extract_corpus(
            records, self.config.n_patches, self.config.window_mm, self.config.out_px,
            self.config.seed, self.config.accept_fraction, self.config.workers,
        )
        write_patchset(out_path, patchset)
        write_provenance(out_path.with_name(PROVENANCE_FILE), patchset)
        self.logger.info(f"✅ {len(patchset)} patches from {len(records)} cases → [bold]{out_path}[/bold]")
        return out_path

    # ================= TRAIN =================

    def train(self, init_checkpoint: Optional[Path] = None) -> Tuple[Path, DcnModel, TrainLog]:
        train_config = TrainConfig.from_pipeline(self.config)
        patches_path = self._path("patches_path", PATCHES_FILE)
        checkpoint_path = self._path("checkpoint_path", CHECKPOINT_FILE)
        self._begin("train", {
            "Patches": patches_path, "k": train_config.k, "λ": f"{train_config.lam:g}",
            "Epochs": f"{train_config.pretrain_epochs} pretrain + {train_config.joint_epochs} joint",
            "Resume": init_checkpoint or "-",
        }, "blue")
        describe_config(self.config)
        patchset = read_patchset(patches_path)

        if init_checkpoint is not None:
            model = DcnModel.load(init_checkpoint)
            if model.k != train_config.k:
                raise ConfigError(f"checkpoint holds k={model.k}, configuration asks for k={train_config.k}")
            arch = model.params.arch
        else:
            arch = self._arch()
        if patchset.pixels.shape[1] != arch.input_px:
            raise InvalidShapeError(
                f"patches are {patchset.pixels.shape[1]} px, architecture {arch.name} expects {arch.input_px} px"
            )

        if init_checkpoint is not None:
            model, log = joint_train(model, patchset, train_config, TrainLog())
        else:
            model, log = train_dcn(init_params(train_config.seed, arch), patchset, train_config)

        model.save(checkpoint_path)
        log.write_csv(checkpoint_path.with_name(TRAIN_LOG_FILE))
        self.logger.info(f"✅ Checkpoint ({arch.name}, k={model.k}) → [bold]{checkpoint_path}[/bold]")
        return checkpoint_path, model, log

    # ================= SIGNATURE =================

    def signature(self, truth: bool = False) -> Path:
        manifest = self._path("manifest_path", MANIFEST_FILE)
        checkpoint_path = self._path("checkpoint_path", CHECKPOINT_FILE)
        signatures_path = self._path("signatures_path", SIGNATURES_FILE)
        label_map_path = self._path("label_map_path", LABEL_MAP_FILE)
        self._begin("signature", {
            "Manifest": manifest, "Checkpoint": checkpoint_path,
            "Stride": f"{self.config.stride_px} px", "Truth": "yes" if truth else "no",
        }, "green")
        records = read_manifest(manifest)
        model = DcnModel.load(checkpoint_path)
        signatures, label_maps = signatures_for_manifest(
            model, records, self.config.stride_px, self.config.window_mm,
            self.config.accept_fraction, self.config.workers,
        )
        write_signature_table(signatures_path, signatures)
        write_label_map_csv(label_map_path, label_maps)
        self.logger.info(f"✅ {len(signatures)} signatures → [bold]{signatures_path}[/bold]")

        if truth:
            score = score_cohort(records, label_maps, self.config.window_mm, model.params.arch.input_px)
            write_clustering_score(self.out_dir, score)
        return signatures_path

    # ================= LINK =================

    def link(self, task: Optional[str] = None) -> Dict[str, MetricsReport]:
        task = task or self.config.link_task
        signatures_path = self._path("signatures_path", SIGNATURES_FILE)
        self._begin("link", {
            "Signatures": signatures_path, "Task": task,
            "Forest": f"{self.config.n_trees} trees", "LASSO grid": self.config.lasso_alpha_grid,
        }, "yellow")
        dataset = SignatureDataset.from_signatures(read_signature_table(signatures_path))

        reports: Dict[str, MetricsReport] = {}
        for name in LINK_TASKS[task]:
            reports[name] = loo_cv(
                dataset, name, seed=self.config.seed, n_trees=self.config.n_trees, mtry=self.config.mtry,
                alpha_grid=self.config.lasso_alpha_grid, max_iter=self.config.lasso_max_iter,
                tol=self.config.lasso_tol, top_n=self.config.top_clusters, workers=self.config.workers,
            )

        binary, regression = reports.get("binary_forest"), reports.get("grade_lasso")
        write_metrics_json(self.out_dir / METRICS_FILE, binary, regression)
        if binary is not None:
            self._show_binary(binary)
            if binary.importance is not None:
                write_importance(self.out_dir, binary.importance)
                self._write_top_label_map(binary.importance.mean)
        if regression is not None:
            write_regression(self.out_dir, regression)
            rho = "n/a" if regression.spearman is None else f"{regression.spearman:.3f}"
            self.logger.metric(f"📈 Grade LASSO: {len(regression.predictions)} held-out predictions, Spearman ρ={rho}")
        return reports

    def _show_binary(self, report: MetricsReport) -> None:
        table = Table(title="Low/high forest (leave-one-out)", expand=False)
        for key in METRIC_KEYS:
            table.add_column(key, justify="right")
        table.add_row(*(f"{getattr(report.metrics, key):.3f}" for key in METRIC_KEYS))
        self.console.print(table)
        self.logger.metric(
            "🎯 " + " ".join(f"{key}={getattr(report.metrics, key):.3f}" for key in METRIC_KEYS)
            + (" [flagged]" if report.flagged else "")
        )

    def _write_top_label_map(self, importance: np.ndarray) -> None:
        label_map_path = self._path("label_map_path", LABEL_MAP_FILE)
        if not label_map_path.exists():
            self.logger.debug(f"No label map at {label_map_path}; skipping top-cluster export")
            return
        top = top_cluster_maps(read_label_map_csv(label_map_path), importance, self.config.top_clusters)
        write_label_map_csv(self.out_dir / LABEL_MAP_TOP_FILE, top)

    # ================= GRADCHECK =================

    def gradcheck(self, seeds: int = 5) -> bool:
        self._begin("gradcheck", {"Seeds": seeds, "Precision": "float64"}, "red")
        rows: List[Tuple[str, int, GradCheckReport]] = []
        for seed in range(seeds):
            rows.extend((name, seed, report) for name, report in layer_suite(seed))
            rows.append(("autoencoder", seed, autoencoder_check(seed)))

        table = Table(title="Finite-difference gradient checks", expand=False)
        for column, justify in (("check", "left"), ("seed", "right"), ("checked", "right"),
                                ("max abs", "right"), ("max rel", "right"), ("result", "center")):
            table.add_column(column, justify=justify)
        passed = True
        for name, seed, report in rows:
            ok = report.within()
            passed &= ok
            table.add_row(
                name, str(seed), str(report.n_checked), f"{report.max_abs:.2e}", f"{report.max_rel:.2e}",
                "[green]pass[/green]" if ok else "[red]FAIL[/red]",
            )
        self.console.print(table)
        if passed:
            self.logger.info(f"✅ {len(rows)} gradient checks passed")
        else:
            self.logger.error(f"❌ {sum(not r.within() for _, _, r in rows)} of {len(rows)} gradient checks failed")
        return passed
