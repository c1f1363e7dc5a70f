"""
Deep clustering training: pretraining, centroid tracking and the joint loss.
"""
import csv

import numpy as np
import pytest

from config.settings import PipelineConfig
from modules.dcn import (
    DcnModel, TrainConfig, TrainLog, evaluate_loss, init_centroids, initial_model,
    joint_train, online_centroid_update, pretrain, train_dcn,
)
from modules.net import TWIN_ARCH, decode, encode, init_params
from utils.errors import ConfigError, DivergenceError


@pytest.fixture
def patches():
    return np.random.default_rng(5).uniform(0, 1, (30, 8, 8)).astype(np.float32)


def _config(**values) -> TrainConfig:
    defaults = dict(k=3, pretrain_epochs=2, joint_epochs=2, batch_size=8, learning_rate=1e-3, seed=4)
    defaults.update(values)
    return TrainConfig.build(**defaults)


def test_train_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        TrainConfig.build(k=1)
    with pytest.raises(ConfigError):
        TrainConfig.build(centroid_update_mode="sometimes")


def test_train_config_from_pipeline_uses_lambda_alias():
    config = TrainConfig.from_pipeline(PipelineConfig(**{"lambda": 0.25, "k": 4, "seed": 9}))
    assert config.lam == 0.25
    assert config.k == 4
    assert config.seed == 9


def test_pretrain_lowers_reconstruction():
    flat = np.full((30, 8, 8), 0.1, dtype=np.float32)
    log = TrainLog()
    pretrain(init_params(0, TWIN_ARCH), flat, _config(pretrain_epochs=15, learning_rate=5e-3), log)
    records = log.phase("pretrain")
    assert len(records) == 15
    assert records[-1].recon < records[0].recon


def test_pretrain_fits_a_single_repeated_patch():
    repeated = np.full((16, 8, 8), 0.3, dtype=np.float32)
    params = pretrain(
        init_params(0, TWIN_ARCH), repeated, _config(pretrain_epochs=200, batch_size=8, learning_rate=1e-2)
    )
    reconstruction = decode(params, encode(params, repeated))[:, 0]
    assert float(np.mean((reconstruction - repeated) ** 2)) < 1e-3


def test_zero_pretrain_epochs_returns_equal_params(patches):
    params = init_params(0, TWIN_ARCH)
    log = TrainLog()
    result = pretrain(params, patches, _config(pretrain_epochs=0), log)
    assert result is not params
    np.testing.assert_array_equal(result.flatten(), params.flatten())
    assert log.records == []


def test_same_seed_gives_identical_train_logs(tmp_path, patches):
    for name in ("a.csv", "b.csv"):
        _, log = train_dcn(init_params(0, TWIN_ARCH), patches, _config())
        log.write_csv(tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_pretrain_leaves_input_params_untouched(patches):
    params = init_params(0, TWIN_ARCH)
    before = params.flatten().copy()
    pretrain(params, patches, _config())
    np.testing.assert_array_equal(params.flatten(), before)


def test_zero_lambda_joint_training_equals_pretraining(patches):
    config = _config(lam=0.0, pretrain_epochs=3, joint_epochs=3)
    params = init_params(1, TWIN_ARCH)
    pretrained = pretrain(params, patches, config)
    model = initial_model(params, patches, config)
    joint, _ = joint_train(model, patches, config)
    for a, b in zip(pretrained.tensors, joint.params.tensors):
        np.testing.assert_array_equal(a, b)


def test_batch_mode_cluster_term_never_increases_with_frozen_network(patches):
    config = _config(centroid_update_mode="batch", learning_rate=0.0, joint_epochs=50, lam=0.1)
    params = init_params(2, TWIN_ARCH)
    model = initial_model(params, patches, config)
    trained, log = joint_train(model, patches, config)
    clusters = [r.cluster for r in log.phase("joint")]
    assert len(clusters) == 50
    for before, after in zip(clusters, clusters[1:]):
        assert after <= before
    np.testing.assert_array_equal(trained.params.flatten(), params.flatten())


@pytest.mark.parametrize("mode", ["online", "batch"])
def test_joint_log_matches_evaluate_loss_of_returned_model(patches, mode):
    config = _config(centroid_update_mode=mode, lam=0.2)
    model = initial_model(init_params(3, TWIN_ARCH), patches, config)
    trained, log = joint_train(model, patches, config)
    last = log.phase("joint")[-1]
    terms = evaluate_loss(trained, patches, 0.2)
    assert (last.recon, last.cluster, last.total) == (terms.recon, terms.cluster, terms.total)


def test_online_update_moves_centroid_by_running_mean():
    centroids = np.zeros((2, 2))
    counts = np.array([1, 1])
    online_centroid_update(centroids, counts, np.array([[2.0, 2.0], [4.0, 0.0]]), np.array([0, 0]))
    np.testing.assert_array_equal(counts, [3, 1])
    np.testing.assert_allclose(centroids[0], [2.0, 2.0 / 3.0])
    np.testing.assert_array_equal(centroids[1], [0.0, 0.0])


def test_online_joint_training_counts_every_patch(patches):
    config = _config(joint_epochs=2)
    model = initial_model(init_params(0, TWIN_ARCH), patches, config)
    start = int(model.cluster_counts.sum())
    trained, log = joint_train(model, patches, config)
    assert int(trained.cluster_counts.sum()) == start + 2 * len(patches)
    assert int(model.cluster_counts.sum()) == start
    assert all(0.0 <= r.reassigned_fraction <= 1.0 for r in log.records)


def test_init_centroids_shape(patches):
    centroids, assignments = init_centroids(init_params(0, TWIN_ARCH), patches, 3, seed=0)
    assert centroids.shape == (3, TWIN_ARCH.latent)
    assert assignments.shape == (len(patches),)
    assert set(np.unique(assignments)) <= {0, 1, 2}


def test_train_dcn_log_and_checkpoint(tmp_path, patches):
    config = _config(pretrain_epochs=2, joint_epochs=3)
    model, log = train_dcn(init_params(0, TWIN_ARCH), patches, config)
    assert [r.phase for r in log.records] == ["pretrain"] * 2 + ["joint"] * 3
    assert model.k == 3

    log.write_csv(tmp_path / "train_log.csv")
    with open(tmp_path / "train_log.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["epoch", "recon", "cluster", "total", "reassigned_fraction", "phase"]
    assert len(rows) == 6

    model.save(tmp_path / "m.ckpt")
    first = DcnModel.load(tmp_path / "m.ckpt")
    first.save(tmp_path / "n.ckpt")
    second = DcnModel.load(tmp_path / "n.ckpt")
    assert evaluate_loss(first, patches, 0.05) == evaluate_loss(second, patches, 0.05)
    assert evaluate_loss(first, patches, 0.05).total == pytest.approx(evaluate_loss(model, patches, 0.05).total, rel=1e-5)


def test_evaluate_loss_zero_lambda_is_reconstruction(twin_model, patches):
    terms = evaluate_loss(twin_model, patches, 0.0)
    assert terms.total == terms.recon
    assert terms.cluster > 0


def test_non_finite_patches_diverge(patches):
    bad = patches.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(DivergenceError) as info:
        pretrain(init_params(0, TWIN_ARCH), bad, _config())
    assert info.value.epoch == 1
