"""Deterministic PCA via SVD, used by the stacked-PCA ensemble.

Explained variances follow the population convention (singular values
squared over N), so the mean squared reconstruction error of a rank-k
model equals the sum of discarded covariance eigenvalues exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import load_tensor, write_tensor
from .errors import DomainError, RankDeficiencyWarning, ShapeMismatch


@dataclass(frozen=True)
class PcaModel:
    """Column mean plus k orthonormal principal directions (rows)."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def fit_pca(X, k: int) -> PcaModel:
    """Top-k principal directions of the centered rows of X.

    Sign convention: each component's largest-magnitude entry is positive,
    so the decomposition is bitwise reproducible.  If k exceeds the
    numerical rank the trailing variances are zeroed and a
    RankDeficiencyWarning is emitted, but the model is still returned.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    k = int(k)
    if not 1 <= k <= min(n - 1, d):
        raise DomainError(f"k must satisfy 1 <= k <= min(N-1, D) = {min(n - 1, d)}, got {k}")

    mean = X.mean(axis=0)
    centered = X - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    explained = svals[:k] ** 2 / n
    tol = svals[0] * max(n, d) * np.finfo(np.float64).eps if svals.size else 0.0
    rank = int(np.sum(svals > tol))
    if k > rank:
        warnings.warn(
            f"requested k={k} exceeds numerical rank {rank}; trailing variances are zero",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        explained = explained.copy()
        explained[rank:] = 0.0
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def transform(model: PcaModel, X) -> np.ndarray:
    """Project rows of X onto the principal directions: (X - mean) @ C.T."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ShapeMismatch(f"expected (m, {model.dim}) input, got {X.shape}")
    return (X - model.mean) @ model.components.T


def reconstruct(model: PcaModel, scores) -> np.ndarray:
    """Map scores back to the original space: scores @ C + mean."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != model.k:
        raise ShapeMismatch(f"expected (m, {model.k}) scores, got {scores.shape}")
    return scores @ model.components + model.mean


def save_pca(model: PcaModel, prefix) -> None:
    """Serialize as <prefix>.components.npy plus a JSON sidecar."""
    prefix = Path(prefix)
    write_tensor(prefix.parent / (prefix.name + ".components.npy"), model.components)
    sidecar = {
        "mean": model.mean.tolist(),
        "explained_variance": model.explained_variance.tolist(),
    }
    (prefix.parent / (prefix.name + ".json")).write_text(json.dumps(sidecar, indent=2) + "\n")


def load_pca(prefix) -> PcaModel:
    prefix = Path(prefix)
    components = np.asarray(load_tensor(prefix.parent / (prefix.name + ".components.npy")))
    sidecar = json.loads((prefix.parent / (prefix.name + ".json")).read_text())
    return PcaModel(
        mean=np.asarray(sidecar["mean"], dtype=np.float64),
        components=components,
        explained_variance=np.asarray(sidecar["explained_variance"], dtype=np.float64),
    )
