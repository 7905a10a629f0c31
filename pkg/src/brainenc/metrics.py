"""Evaluation metrics: pairwise 2v2 accuracy and row-wise Pearson correlation.

Both operate on an (n_test x n_voxels) pair of true and predicted
response matrices and are pure, deterministic functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRowWarning, DomainError, ShapeMismatch, ZeroNorm, ZeroNormRow


def cosine_distance(a, b) -> float:
    """1 - cosine similarity; symmetric, in [0, 2]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"vectors differ in length: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine distance of a zero-norm vector is undefined")
    return float(1.0 - (a @ b) / (na * nb))


def _check_pair(Y, Yhat) -> tuple[np.ndarray, np.ndarray]:
    Y = np.asarray(Y, dtype=np.float64)
    Yhat = np.asarray(Yhat, dtype=np.float64)
    if Y.ndim != 2 or Yhat.ndim != 2 or Y.shape != Yhat.shape:
        raise ShapeMismatch(f"Y and Yhat must share a 2-D shape, got {Y.shape} vs {Yhat.shape}")
    return Y, Yhat


def two_v_two(Y, Yhat) -> float:
    """Fraction of sample pairs whose matched cosine distances beat the crossed ones.

    A pair (i, j) scores when
    ``cosD(Y_i, Yhat_i) + cosD(Y_j, Yhat_j) < cosD(Y_i, Yhat_j) + cosD(Y_j, Yhat_i)``;
    exact ties score zero.  The count is integer arithmetic, so the result
    is independent of pair evaluation order.
    """
    Y, Yhat = _check_pair(Y, Yhat)
    n = Y.shape[0]
    if n < 2:
        raise ShapeMismatch("2v2 accuracy needs at least 2 samples")
    norms_y = np.linalg.norm(Y, axis=1)
    norms_h = np.linalg.norm(Yhat, axis=1)
    if np.any(norms_y == 0.0) or np.any(norms_h == 0.0):
        raise ZeroNormRow("a response row has zero norm; 2v2 accuracy is undefined")

    sims = (Y / norms_y[:, None]) @ (Yhat / norms_h[:, None]).T
    matched = np.diag(sims)
    # matched < crossed in distance terms <=> matched similarity sum is larger
    margin = matched[:, None] + matched[None, :] - sims - sims.T
    iu = np.triu_indices(n, k=1)
    wins = int(np.count_nonzero(margin[iu] > 0.0))
    return wins / (n * (n - 1) // 2)


def pearson_metric(Y, Yhat) -> float:
    """Mean over samples of corr(Y_i, Yhat_i) across voxels.

    Rows where either vector has zero variance contribute a correlation of
    zero and are still counted; a DegenerateRowWarning flags them.
    """
    Y, Yhat = _check_pair(Y, Yhat)
    if Y.shape[1] < 2:
        raise ShapeMismatch("row-wise correlation needs at least 2 voxels")
    yc = Y - Y.mean(axis=1, keepdims=True)
    hc = Yhat - Yhat.mean(axis=1, keepdims=True)
    num = np.einsum("ij,ij->i", yc, hc)
    den = np.sqrt(np.einsum("ij,ij->i", yc, yc) * np.einsum("ij,ij->i", hc, hc))
    # ~(den > 0) also catches NaN rows, not just zero variance
    degenerate = ~(den > 0.0)
    if np.any(degenerate):
        warnings.warn(
            f"{int(degenerate.sum())} zero-variance or non-finite row(s) scored as correlation 0",
            DegenerateRowWarning,
            stacklevel=2,
        )
    corr = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    return float(corr.mean())


def pearson_per_voxel(Y, Yhat) -> float:
    """Mean over voxels of corr(Y[:, v], Yhat[:, v]) across samples.

    Companion variant of :func:`pearson_metric` averaging along the other
    axis; reported only when explicitly requested.
    """
    Y, Yhat = _check_pair(Y, Yhat)
    if Y.shape[0] < 2:
        raise ShapeMismatch("per-voxel correlation needs at least 2 samples")
    return pearson_metric(Y.T, Yhat.T)


@dataclass(frozen=True)
class EvaluationReport:
    """Scores for one (subject, ROI, method, hyperparameter) cell."""

    subject_id: str
    roi_id: str
    method: str
    pearson: float
    two_v_two: float
    n_test: int
    v_voxels: int
    lam: float
    p: float | None = None
    pca_k: int | None = None
    weights: tuple[float, ...] | None = None
    converged: bool | None = None

    def __post_init__(self):
        if not -1.0 - 1e-9 <= self.pearson <= 1.0 + 1e-9:
            raise DomainError(f"pearson out of range: {self.pearson}")
        if not 0.0 <= self.two_v_two <= 1.0:
            raise DomainError(f"two_v_two out of range: {self.two_v_two}")

    def to_json_dict(self) -> dict:
        out: dict = {
            "subject": self.subject_id,
            "roi": self.roi_id,
            "method": self.method,
            "p": self.p,
            "pearson": self.pearson,
            "two_v_two": self.two_v_two,
            "lambda": self.lam,
            "n_test": self.n_test,
            "v_voxels": self.v_voxels,
        }
        if self.pca_k is not None:
            out["pca_k"] = self.pca_k
        if self.weights is not None:
            out["weights"] = list(self.weights)
        if self.converged is not None:
            out["converged"] = self.converged
        return out
