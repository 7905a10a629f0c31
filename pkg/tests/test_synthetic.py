import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brainenc.data_model import load_manifest, make_split
from brainenc.errors import ConfigError
from brainenc.metrics import pearson_metric
from brainenc.regression import fit_ridge, predict
from brainenc.synthetic import (
    SyntheticConfig,
    generate_dataset,
    generate_planted_weights,
    generate_shared_latent,
    write_dataset,
)


def test_config_validation():
    SyntheticConfig()
    with pytest.raises(ConfigError):
        SyntheticConfig(latent_dim=97, dim=96)
    with pytest.raises(ConfigError):
        SyntheticConfig(n_tasks=0)
    with pytest.raises(ConfigError):
        SyntheticConfig(task_noise_sigma=-0.1)
    with pytest.raises(ConfigError):
        SyntheticConfig(planted_weights=(0.5, 0.6), n_tasks=2)
    with pytest.raises(ConfigError):
        SyntheticConfig(planted_weights=(0.5, 0.5), n_tasks=3)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_same_seed_is_bitwise_identical(seed):
    cfg = SyntheticConfig(seed=seed, n_samples=30, dim=10, n_tasks=2, n_voxels=6,
                          latent_dim=3)
    embs_a, vox_a, _ = generate_shared_latent(cfg)
    embs_b, vox_b, _ = generate_shared_latent(cfg)
    for a, b in zip(embs_a, embs_b):
        assert a.data.tobytes() == b.data.tobytes()
    assert vox_a.data.tobytes() == vox_b.data.tobytes()


def test_different_seeds_differ():
    cfg0 = SyntheticConfig(seed=0, n_samples=20, dim=8, n_tasks=2, n_voxels=4, latent_dim=2)
    cfg1 = SyntheticConfig(seed=1, n_samples=20, dim=8, n_tasks=2, n_voxels=4, latent_dim=2)
    a, _, _ = generate_shared_latent(cfg0)
    b, _, _ = generate_shared_latent(cfg1)
    assert a[0].data.tobytes() != b[0].data.tobytes()


def test_all_outputs_finite_and_aligned():
    cfg = SyntheticConfig(seed=2, n_samples=50, dim=16, n_tasks=4, n_voxels=10, latent_dim=5)
    embs, vox, truth = generate_shared_latent(cfg)
    assert len(embs) == 4
    for e in embs:
        assert e.data.shape == (50, 16)
        assert np.all(np.isfinite(e.data))
    assert vox.data.shape == (50, 10)
    assert truth.latent.shape == (50, 5)
    assert truth.task_mixer.shape == (5, 16)


def test_noiseless_tasks_predict_perfectly():
    cfg = SyntheticConfig(seed=7, n_samples=60, dim=20, n_tasks=3, n_voxels=12,
                          latent_dim=4, task_noise_sigma=0.0, voxel_noise_sigma=0.0)
    embs, vox, _ = generate_shared_latent(cfg)
    split = make_split(60, seed=7)
    tr, te = split.train_indices, split.test_indices
    for e in embs:
        model = fit_ridge(e.data[tr], vox.data[tr], 1e-8)
        pc = pearson_metric(vox.data[te], predict(model, e.data[te]))
        assert pc >= 0.999


def test_planted_weights_recorded_and_mixture_consistent():
    cfg = SyntheticConfig(seed=4, n_samples=40, dim=10, n_tasks=3, n_voxels=8,
                          latent_dim=3, voxel_noise_sigma=0.0,
                          planted_weights=(0.7, 0.2, 0.1))
    embs, vox, truth = generate_planted_weights(cfg)
    np.testing.assert_allclose(truth.planted_weights, [0.7, 0.2, 0.1])
    mixture = sum(w * e.data for w, e in zip(truth.planted_weights, embs))
    np.testing.assert_allclose(vox.data, mixture @ truth.voxel_map, atol=1e-12)


def test_planted_requires_weights():
    with pytest.raises(ConfigError):
        generate_planted_weights(SyntheticConfig())


def test_generate_dataset_multi_subject_shares_tasks():
    cfg = SyntheticConfig(seed=6, n_samples=30, dim=8, n_tasks=2, n_voxels=5, latent_dim=3)
    embs, voxes, _ = generate_dataset(cfg, n_subjects=2, n_rois=3)
    assert len(embs) == 2
    assert len(voxes) == 6
    keys = [(v.subject_id, v.roi_id) for v in voxes]
    assert len(set(keys)) == 6
    solo_embs, _, _ = generate_dataset(cfg, n_subjects=1, n_rois=1)
    for a, b in zip(embs, solo_embs):
        assert a.data.tobytes() == b.data.tobytes()


def test_write_dataset_round_trips_through_manifest(tmp_path):
    cfg = SyntheticConfig(seed=8, n_samples=25, dim=6, n_tasks=2, n_voxels=4, latent_dim=2)
    manifest_path = write_dataset(tmp_path, cfg, n_subjects=1, n_rois=2)
    m = load_manifest(manifest_path)
    assert m.stimulus_count == 25
    assert m.task_ids == ("task01", "task02")
    assert m.passage_ids is not None
    assert m.passage_ids.size == 25
    # passage blocks of four consecutive sentences
    np.testing.assert_array_equal(m.passage_ids[:8], [0, 0, 0, 0, 1, 1, 1, 1])


def test_write_dataset_deterministic_bytes(tmp_path):
    cfg = SyntheticConfig(seed=9, n_samples=20, dim=5, n_tasks=2, n_voxels=3, latent_dim=2)
    p1 = write_dataset(tmp_path / "a", cfg, n_subjects=1, n_rois=1)
    p2 = write_dataset(tmp_path / "b", cfg, n_subjects=1, n_rois=1)
    assert (p1.parent / "task01.npy").read_bytes() == (p2.parent / "task01.npy").read_bytes()
    assert p1.read_text() == p2.read_text()
