"""
Command-line exit codes and a small end-to-end run of every stage.
"""
import csv
import json

import pytest

from main import main
from modules.dcn import DcnModel, evaluate_loss
from modules.volume_io import read_patchset

SMALL_RUN = {
    "phantom_n_cases": 8,
    "phantom_dims": [24, 24, 2],
    "phantom_blob_radius_mm": 2.0,
    "out_px": 8,
    "window_mm": 3.5,
    "n_patches": 40,
    "k": 3,
    "pretrain_epochs": 1,
    "joint_epochs": 1,
    "batch_size": 16,
    "n_trees": 10,
    "stride_px": 4,
    "lasso_alpha_grid": [0.01, 0.1],
    "lasso_tol": 1e-6,
    "seed": 11,
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL_RUN))
    return path


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "phantom" in capsys.readouterr().out


def test_unknown_flag_is_usage_error():
    assert main(["phantom", "--bogus"]) == 2


def test_missing_command_is_usage_error():
    assert main([]) == 2


def test_zero_patches_is_usage_error(tmp_path):
    assert main(["extract", "--n", "0", "--out", str(tmp_path)]) == 2


def test_bad_config_value_fails(tmp_path):
    assert main(["train", "--k", "1", "--out", str(tmp_path)]) == 1


def test_unwritable_output_fails(tmp_path, config_file):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["phantom", "--config", str(config_file), "--out", str(blocker / "run")]) == 1


def test_missing_manifest_fails(tmp_path):
    assert main(["extract", "--out", str(tmp_path), "--manifest", str(tmp_path / "none.csv")]) == 1


def test_phantom_writes_requested_cases(tmp_path, config_file, capsys):
    out = tmp_path / "cohort"
    assert main(["phantom", "--config", str(config_file), "--n", "4", "--out", str(out)]) == 0
    with open(out / "manifest.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == 4
    assert str(out / "manifest.csv") in capsys.readouterr().out
    effective = json.loads((out / "effective_config.json").read_text())
    assert effective["phantom_n_cases"] == 4
    assert effective["seed"] == 11


def test_end_to_end(tmp_path, config_file):
    out = str(tmp_path / "run")
    common = ["--config", str(config_file), "--out", out]
    assert main(["phantom", *common]) == 0
    assert main(["extract", *common, "--workers", "2"]) == 0
    assert main(["train", *common, "--lambda", "0.1"]) == 0
    assert json.loads((tmp_path / "run" / "effective_config.json").read_text())["lambda"] == 0.1
    assert main(["signature", *common, "--truth"]) == 0
    assert main(["link", *common]) == 0

    run = tmp_path / "run"
    for name in (
        "patches.bin", "patches_provenance.csv", "model.ckpt", "train_log.csv", "signatures.csv",
        "label_map.csv", "clustering_score.json", "metrics.json", "importance.csv", "regression.csv",
        "label_map_top.csv",
    ):
        assert (run / name).exists(), name
    metrics = json.loads((run / "metrics.json").read_text())
    assert set(metrics["metrics"]) == {"accuracy", "sensitivity", "specificity", "f1"}
    with open(run / "signatures.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 8
    for row in rows:
        assert sum(float(row[f"c{i}"]) for i in (1, 2, 3)) == pytest.approx(1.0)

    # resuming joint training from the checkpoint keeps k
    assert main(["train", *common, "--init-checkpoint", str(run / "model.ckpt"),
                 "--checkpoint", str(run / "resumed.ckpt")]) == 0
    assert main(["train", *common, "--init-checkpoint", str(run / "model.ckpt"), "--k", "4"]) == 1


def test_train_rejects_mismatched_patch_size(tmp_path, config_file):
    out = str(tmp_path / "run")
    common = ["--config", str(config_file), "--out", out]
    assert main(["phantom", *common, "--n", "4"]) == 0
    assert main(["extract", *common, "--n-patches", "8"]) == 0
    assert main(["train", *common, "--out-px", "32"]) == 1


def test_gradcheck_single_seed(tmp_path):
    assert main(["gradcheck", "--seeds", "1", "--out", str(tmp_path)]) == 0


def test_gradcheck_needs_a_seed(tmp_path):
    assert main(["gradcheck", "--seeds", "0", "--out", str(tmp_path)]) == 2


def _run_stages(tmp_path, values, *stages):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(values))
    common = ["--config", str(path), "--out", str(tmp_path / "run")]
    for stage in stages:
        assert main([stage[0], *common, *stage[1:]]) == 0, stage[0]
    return tmp_path / "run", common


def test_default_cluster_count_reaches_checkpoint(tmp_path):
    values = {key: value for key, value in SMALL_RUN.items() if key != "k"}
    run, _ = _run_stages(tmp_path, values, ["phantom", "--n", "4"], ["extract"], ["train"])
    header = json.loads((run / "model.ckpt").read_bytes().split(b"\n", 1)[0])
    assert header["k"] == 10
    assert len(header["cluster_counts"]) == 10


def test_resume_without_epochs_reproduces_checkpoint(tmp_path):
    run, common = _run_stages(tmp_path, SMALL_RUN, ["phantom"], ["extract"], ["train"])
    assert main(["train", *common, "--init-checkpoint", str(run / "model.ckpt"), "--joint-epochs", "0",
                 "--checkpoint", str(run / "resumed.ckpt")]) == 0
    assert (run / "resumed.ckpt").read_bytes() == (run / "model.ckpt").read_bytes()

    patches = read_patchset(run / "patches.bin")
    lam = 0.05
    before = evaluate_loss(DcnModel.load(run / "model.ckpt"), patches, lam)
    assert evaluate_loss(DcnModel.load(run / "resumed.ckpt"), patches, lam) == before


# two textures, one striped; k=2 keeps the modal top-2 set trivially the full set,
# so the stability check rests on the top-1 share
ACCEPTANCE_RUN = {
    "phantom_n_cases": 24,
    "phantom_dims": [64, 64, 2],
    "phantom_blob_radius_mm": 7.0,
    "phantom_noise_sigma_px": 1.0,
    "out_px": 8,
    "window_mm": 3.5,
    "n_patches": 1500,
    "k": 2,
    "lambda": 0.05,
    "pretrain_epochs": 15,
    "joint_epochs": 10,
    "batch_size": 32,
    "learning_rate": 3e-3,
    "stride_px": 4,
    "n_trees": 50,
    "lasso_alpha_grid": [0.001, 0.01],
    "seed": 2,
}


def test_phantom_cohort_meets_acceptance_thresholds(tmp_path):
    run, _ = _run_stages(
        tmp_path, ACCEPTANCE_RUN, ["phantom"], ["extract"], ["train"], ["signature", "--truth"], ["link"],
    )
    score = json.loads((run / "clustering_score.json").read_text())
    assert score["nmi"] >= 0.5

    metrics = json.loads((run / "metrics.json").read_text())
    assert metrics["metrics"]["f1"] >= 0.9
    assert metrics["grade_lasso"]["spearman"] >= 0.8
    importance = metrics["binary_forest"]["importance"]
    assert importance["modal_top2_freq"] >= 0.8
    assert max(c["top1_freq"] for c in importance["clusters"]) >= 0.8
