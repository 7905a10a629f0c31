"""Synthetic multi-task embedding and voxel datasets with known ground truth.

Two constructions cover the pipeline's verification needs: a shared
latent factor feeding every task (noise averaging makes ensembles win)
and a planted simplex mixture (the dynamic-weight optimizer must recover
it).  All draws come from numpy's PCG64 generator seeded explicitly, in a
fixed documented order, so outputs are bitwise reproducible per seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import EmbeddingMatrix, VoxelMatrix, write_tensor
from .errors import ConfigError


@dataclass(frozen=True)
class SyntheticConfig:
    """Desk-scale defaults: big enough to show ensemble gains, seconds to run."""

    seed: int = 0
    n_samples: int = 200
    dim: int = 96
    n_tasks: int = 5
    n_voxels: int = 300
    latent_dim: int = 16
    task_noise_sigma: float = 1.0
    voxel_noise_sigma: float = 0.1
    planted_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if min(self.n_samples, self.dim, self.n_tasks, self.n_voxels, self.latent_dim) < 1:
            raise ConfigError("all size fields must be positive")
        if self.latent_dim > self.dim:
            raise ConfigError(f"latent_dim {self.latent_dim} exceeds dim {self.dim}")
        if self.task_noise_sigma < 0 or self.voxel_noise_sigma < 0:
            raise ConfigError("noise sigmas must be nonnegative")
        if self.planted_weights is not None:
            w = np.asarray(self.planted_weights, dtype=np.float64)
            if w.size != self.n_tasks:
                raise ConfigError(f"{w.size} planted weights for {self.n_tasks} tasks")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError(f"planted weights must lie on the simplex: {w}")
            object.__setattr__(self, "planted_weights", tuple(float(x) for x in w))


@dataclass(frozen=True)
class GroundTruth:
    """What the generator planted, for oracle checks in tests."""

    kind: str
    latent: np.ndarray | None = None
    task_mixer: np.ndarray | None = None
    voxel_map: np.ndarray | None = None
    planted_weights: np.ndarray | None = None


def _task_ids(n: int) -> list[str]:
    return [f"task{i + 1:02d}" for i in range(n)]


def _draw_shared_latent_tasks(rng, cfg) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    # one mixing matrix for every task: signals add coherently under
    # averaging while the independent noises cancel, which is the effect
    # the ensembles are supposed to exploit (independent mixers would make
    # the average distributionally just another single task)
    z = rng.standard_normal((cfg.n_samples, cfg.latent_dim))
    mixer = rng.standard_normal((cfg.latent_dim, cfg.dim)) / np.sqrt(cfg.latent_dim)
    signal = z @ mixer
    tasks = [
        signal + cfg.task_noise_sigma * rng.standard_normal((cfg.n_samples, cfg.dim))
        for _ in range(cfg.n_tasks)
    ]
    return z, mixer, tasks


def generate_shared_latent(cfg: SyntheticConfig):
    """Tasks and voxels both driven by one latent Z; task noise is independent.

    Returns (task embedding matrices, voxel matrix, ground truth).  Draw
    order: Z, the task mixer, per-task noise, then the voxel map and
    voxel noise.
    """
    rng = np.random.default_rng(cfg.seed)
    z, mixer, tasks = _draw_shared_latent_tasks(rng, cfg)
    b = rng.standard_normal((cfg.latent_dim, cfg.n_voxels)) / np.sqrt(cfg.latent_dim)
    y = z @ b + cfg.voxel_noise_sigma * rng.standard_normal((cfg.n_samples, cfg.n_voxels))

    embeddings = [EmbeddingMatrix(tid, data) for tid, data in zip(_task_ids(cfg.n_tasks), tasks)]
    voxels = VoxelMatrix(subject_id="S01", roi_id="R1", data=y)
    truth = GroundTruth(kind="shared_latent", latent=z, task_mixer=mixer, voxel_map=b)
    return embeddings, voxels, truth


def generate_planted_weights(cfg: SyntheticConfig):
    """Voxels generated from a known simplex mixture of near-orthogonal tasks.

    Y = (sum_i w*_i u_i) @ M + noise with independent Gaussian task
    features, so the mixture weights are identifiable and carried in the
    ground truth record.
    """
    if cfg.planted_weights is None:
        raise ConfigError("generate_planted_weights requires cfg.planted_weights")
    rng = np.random.default_rng(cfg.seed)
    w_star = np.asarray(cfg.planted_weights, dtype=np.float64)
    tasks = [rng.standard_normal((cfg.n_samples, cfg.dim)) for _ in range(cfg.n_tasks)]
    mixture = sum(w * u for w, u in zip(w_star, tasks))
    m = rng.standard_normal((cfg.dim, cfg.n_voxels)) / np.sqrt(cfg.dim)
    y = mixture @ m + cfg.voxel_noise_sigma * rng.standard_normal((cfg.n_samples, cfg.n_voxels))

    embeddings = [EmbeddingMatrix(tid, data) for tid, data in zip(_task_ids(cfg.n_tasks), tasks)]
    voxels = VoxelMatrix(subject_id="S01", roi_id="R1", data=y)
    truth = GroundTruth(kind="planted_weights", voxel_map=m, planted_weights=w_star)
    return embeddings, voxels, truth


def generate_dataset(cfg: SyntheticConfig, n_subjects: int = 1, n_rois: int = 1):
    """Multi-(subject, ROI) variant sharing one latent and one task set.

    Each (subject, ROI) pair gets its own voxel map and noise, drawn
    sequentially from the same seeded stream.  With planted weights every
    response uses the same mixture, only the map and noise differ.
    """
    if n_subjects < 1 or n_rois < 1:
        raise ConfigError("n_subjects and n_rois must be positive")
    rng = np.random.default_rng(cfg.seed)
    planted = cfg.planted_weights is not None
    if planted:
        w_star = np.asarray(cfg.planted_weights, dtype=np.float64)
        tasks = [rng.standard_normal((cfg.n_samples, cfg.dim)) for _ in range(cfg.n_tasks)]
        source = sum(w * u for w, u in zip(w_star, tasks))
        src_dim = cfg.dim
        truth = GroundTruth(kind="planted_weights", planted_weights=w_star)
    else:
        z, mixer, tasks = _draw_shared_latent_tasks(rng, cfg)
        source = z
        src_dim = cfg.latent_dim
        truth = GroundTruth(kind="shared_latent", latent=z, task_mixer=mixer)

    embeddings = [EmbeddingMatrix(tid, data) for tid, data in zip(_task_ids(cfg.n_tasks), tasks)]
    responses = []
    for s in range(n_subjects):
        for r in range(n_rois):
            b = rng.standard_normal((src_dim, cfg.n_voxels)) / np.sqrt(src_dim)
            y = source @ b + cfg.voxel_noise_sigma * rng.standard_normal((cfg.n_samples, cfg.n_voxels))
            responses.append(VoxelMatrix(subject_id=f"S{s + 1:02d}", roi_id=f"R{r + 1}", data=y))
    return embeddings, responses, truth


def write_dataset(out_dir, cfg: SyntheticConfig, n_subjects: int = 1, n_rois: int = 1) -> Path:
    """Write a complete synthetic dataset: tensor files plus manifest.json.

    The manifest uses a ratio split seeded with cfg.seed and includes
    passage ids (blocks of 4 samples) so the grouped-split mode is
    exercisable.  Returns the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    embeddings, responses, _ = generate_dataset(cfg, n_subjects, n_rois)

    tasks_json = []
    for emb in embeddings:
        fname = f"{emb.task_id}.npy"
        write_tensor(out_dir / fname, emb.data)
        tasks_json.append({"id": emb.task_id, "path": fname})
    responses_json = []
    for vox in responses:
        fname = f"resp_{vox.subject_id}_{vox.roi_id}.npy"
        write_tensor(out_dir / fname, vox.data)
        responses_json.append({
            "subject": vox.subject_id,
            "roi": vox.roi_id,
            "path": fname,
            "voxels": vox.n_voxels,
        })

    manifest = {
        "stimulus_count": cfg.n_samples,
        "dim": cfg.dim,
        "tasks": tasks_json,
        "responses": responses_json,
        "split": {"seed": cfg.seed, "ratio": "4:1"},
        "passage_ids": [i // 4 for i in range(cfg.n_samples)],
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path
