"""The five strategies for combining task-specific embedding spaces.

Averaging and weighted averaging mix the task matrices directly; dynamic
weighting learns the mixture on the training rows; the two stacking
variants build a feature space (PCA-reduced concatenation, or the plain
average) for a second-stage ridge meta-learner fitted downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pca as pca_mod
from .data_model import EmbeddingMatrix, SplitSpec, VoxelMatrix
from .errors import (
    ConfigError,
    DomainError,
    EmptyList,
    ShapeMismatch,
    UnnormalizedWeights,
)
from .regression import DEFAULT_CV_FOLDS, DEFAULT_LAMBDA_GRID, fit_ridge, predict, select_lambda

SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Per-task ensemble weights, nonnegative, optionally summing to one."""

    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        object.__setattr__(self, "weights", w)
        if w.size == 0:
            raise EmptyList("weight vector must have at least one entry")
        if not np.isfinite(w).all() or np.any(w < 0):
            raise DomainError(f"weights must be finite and nonnegative: {w}")
        if self.normalized and abs(w.sum() - 1.0) > SUM_TOL:
            raise UnnormalizedWeights(f"weights sum to {w.sum()!r}, expected 1")

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(weights=np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class TaskAccuracyTable:
    """Per (subject, ROI) validation scores x_i for each task, all in [0, 1]."""

    scores: dict[tuple[str, str], np.ndarray]
    metric_kind: str = "two_v_two"

    def __post_init__(self):
        clean = {}
        for key, values in self.scores.items():
            arr = np.asarray(values, dtype=np.float64).ravel()
            if not np.isfinite(arr).all() or np.any(arr < 0) or np.any(arr > 1):
                raise DomainError(f"accuracies for {key} must lie in [0, 1]: {arr}")
            clean[key] = arr
        object.__setattr__(self, "scores", clean)

    def get(self, subject_id: str, roi_id: str) -> np.ndarray:
        return self.scores[(subject_id, roi_id)]

    @classmethod
    def uniform(cls, keys, n_tasks: int, value: float = 0.5) -> "TaskAccuracyTable":
        return cls(scores={tuple(k): np.full(n_tasks, value) for k in keys})


@dataclass(frozen=True)
class DynamicWeightConfig:
    """Hyperparameters for the learned-weight optimizer (MSE loss, Adam updates)."""

    learning_rate: float = 0.05
    max_epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.2
    seed: int = 0
    lambda_refresh: int = 25

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("max_epochs and patience must be positive integers")
        if self.lambda_refresh < 1:
            raise ConfigError(f"lambda_refresh must be a positive integer, got {self.lambda_refresh}")
        if not 0.0 < self.validation_fraction < 0.5:
            raise ConfigError(
                f"validation_fraction must lie in (0, 0.5), got {self.validation_fraction}")


@dataclass(frozen=True)
class DynamicFitResult:
    """Learned weights plus convergence diagnostics (never an error)."""

    weights: WeightVector
    converged: bool
    epochs_run: int
    train_mse: float
    val_mse: float


def _stack_checked(task_matrices) -> tuple[np.ndarray, list[str]]:
    if not task_matrices:
        raise EmptyList("need at least one task embedding matrix")
    shapes = {m.data.shape for m in task_matrices}
    if len(shapes) != 1:
        raise ShapeMismatch(f"task matrices disagree in shape: {sorted(shapes)}")
    stacked = np.stack([m.data for m in task_matrices])
    return stacked, [m.task_id for m in task_matrices]


def combine_average(arrays) -> np.ndarray:
    """Unvalidated kernel: dimension-wise mean over same-shape N x D arrays.

    Entries are summed in sorted order per (sample, dimension) slot, so
    the result is exactly invariant under task permutation.
    """
    stacked = np.sort(np.stack(arrays, axis=0), axis=0)
    return stacked.mean(axis=0)


def combine_weighted(arrays, weights) -> np.ndarray:
    """Unvalidated kernel: mixture sum_i w_i * U_i over same-shape N x D arrays."""
    stacked = np.stack(arrays, axis=0)
    return np.einsum("t,tsd->sd", np.asarray(weights, dtype=np.float64), stacked)


def average_embeddings(task_matrices) -> EmbeddingMatrix:
    """Dimension-wise average of the task embeddings (centroid feature space)."""
    stacked, _ = _stack_checked(task_matrices)
    return EmbeddingMatrix(task_id="average", data=combine_average(stacked))


def power_weights(x, p: float) -> WeightVector:
    """Task weights growing as the p-th power of per-task accuracy.

    w_i = x_i**p / sum_j x_j**p, so w_max / w_min = (x_max / x_min)**p and
    larger p concentrates mass on the most predictive task.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    p = float(p)
    if x.size == 0:
        raise EmptyList("accuracy vector is empty")
    if p == 0.0 or not np.isfinite(p):
        raise DomainError(f"p must be a nonzero real, got {p}")
    if not np.isfinite(x).all() or np.any(x < 0) or np.any(x > 1):
        raise DomainError(f"accuracies must lie in [0, 1]: {x}")
    if p < 0 and np.any(x == 0):
        raise DomainError("zero accuracy with negative p is undefined")
    powered = x**p
    total = powered.sum()
    if total == 0.0:
        raise DomainError("all accuracies are zero; weights are undefined")
    return WeightVector(weights=powered / total)


def literal_power_mean_weights(x, p: float) -> WeightVector:
    """Degenerate variant assigning every task the same power-mean weight.

    The single scalar ((1/n) sum_i x_i**p)**(1/p) is shared by all tasks,
    so after normalization this collapses to plain averaging.  Kept for
    side-by-side comparison behind the --literal-power-mean flag.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    p = float(p)
    if x.size == 0:
        raise EmptyList("accuracy vector is empty")
    if p == 0.0 or not np.isfinite(p):
        raise DomainError(f"p must be a nonzero real, got {p}")
    if np.any(x <= 0) or np.any(x > 1):
        raise DomainError(f"accuracies must lie in (0, 1] for the power mean: {x}")
    scalar = float(np.mean(x**p) ** (1.0 / p))
    same = np.full(x.size, scalar)
    return WeightVector(weights=same / same.sum())


def weighted_average(task_matrices, w: WeightVector) -> EmbeddingMatrix:
    """Convex combination sum_i w_i * u_i of the task embeddings."""
    stacked, _ = _stack_checked(task_matrices)
    if len(w) != stacked.shape[0]:
        raise ShapeMismatch(f"{len(w)} weights for {stacked.shape[0]} tasks")
    if not w.normalized or abs(w.weights.sum() - 1.0) > SUM_TOL:
        raise UnnormalizedWeights("weighted_average requires weights summing to one")
    return EmbeddingMatrix(task_id="weighted-average", data=combine_weighted(stacked, w.weights))


def stack_average(task_matrices) -> EmbeddingMatrix:
    """Average of the task outputs, destined for a second-stage meta-learner.

    Bitwise identical to :func:`average_embeddings`; the difference is
    purely the pipeline role: the downstream ridge acts as the meta-model
    with its own independently selected lambda.
    """
    out = average_embeddings(task_matrices)
    return EmbeddingMatrix(task_id="stack-average", data=out.data)


def stack_pca(task_matrices, k: int, split: SplitSpec) -> tuple[EmbeddingMatrix, list[pca_mod.PcaModel]]:
    """Per-task PCA (fitted on train rows) concatenated in task order.

    Returns the N x (n*k) stacked feature matrix together with the fitted
    per-task PCA models, so callers can cache or audit them.
    """
    stacked, task_ids = _stack_checked(task_matrices)
    train = split.train_indices
    blocks = []
    models = []
    for data in stacked:
        model = pca_mod.fit_pca(data[train], k)
        models.append(model)
        blocks.append(pca_mod.transform(model, data))
    combined = np.concatenate(blocks, axis=1)
    return EmbeddingMatrix(task_id="stack-pca", data=combined), models


def _softmax(theta: np.ndarray) -> np.ndarray:
    shifted = theta - theta.max()
    e = np.exp(shifted)
    return e / e.sum()


def _mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


def fit_dynamic_weights(
    task_matrices,
    y_train: VoxelMatrix,
    cfg: DynamicWeightConfig,
    lam: float | None = None,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
) -> DynamicFitResult:
    """Learn simplex-constrained mixture weights by gradient descent.

    Weights live on the simplex through a softmax over n free logits,
    initialized uniform.  The objective is the block-coordinate envelope:
    for a candidate w the ridge encoder is refit in closed form on the
    mixed features and the training MSE of that refit encoder is the
    loss.  Each epoch takes one Adam step on the logits using a central
    finite-difference gradient of that envelope (2n + 1 refits per epoch;
    refits are cheap closed-form solves).  An inner validation fold
    drives early stopping and best-so-far tracking; running out of
    epochs is reported via the ``converged`` flag, never raised.

    ``lam`` fixes the encoder penalty; when None it is re-selected by
    cross-validation on the inner fit subset at the current weights every
    ``cfg.lambda_refresh`` epochs.  A penalty chosen once at the uniform
    mixture can be an order of magnitude too strong for the optimum and
    flatten the landscape, so the refresh tracks the mixture as it moves.
    """
    stacked, _ = _stack_checked(task_matrices)
    n_tasks, n_rows, _ = stacked.shape
    Y = y_train.data
    if Y.shape[0] != n_rows:
        raise ShapeMismatch(f"{n_rows} embedding rows vs {Y.shape[0]} response rows")
    if n_tasks == 1:
        return DynamicFitResult(
            weights=WeightVector(weights=np.array([1.0])),
            converged=True, epochs_run=0, train_mse=float("nan"), val_mse=float("nan"),
        )

    rng = np.random.default_rng(cfg.seed)
    n_val = max(1, int(round(n_rows * cfg.validation_fraction)))
    if n_rows - n_val < 2:
        raise ConfigError(f"{n_rows} rows leave no inner training data at "
                          f"validation_fraction={cfg.validation_fraction}")
    perm = rng.permutation(n_rows)
    val_rows = np.sort(perm[:n_val])
    fit_rows = np.sort(perm[n_val:])
    U_fit = stacked[:, fit_rows, :]
    U_val = stacked[:, val_rows, :]
    Y_fit = Y[fit_rows]
    Y_val = Y[val_rows]

    def envelope(w: np.ndarray, penalty: float) -> float:
        mixed = np.einsum("t,tsd->sd", w, U_fit)
        model = fit_ridge(mixed, Y_fit, penalty)
        return _mse(predict(model, mixed), Y_fit)

    theta = np.zeros(n_tasks)
    fixed_lam = lam
    lam_t = fixed_lam

    # Adam state
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = np.zeros(n_tasks)
    v = np.zeros(n_tasks)
    fd_step = 1e-3

    best_val = np.inf
    best_w = _softmax(theta)
    stall = 0
    epochs_run = 0
    converged = False

    for epoch in range(cfg.max_epochs):
        epochs_run = epoch + 1
        w = _softmax(theta)
        if fixed_lam is None and epoch % cfg.lambda_refresh == 0:
            mix_fit = np.einsum("t,tsd->sd", w, U_fit)
            lam_t = select_lambda(mix_fit, Y_fit, lambda_grid, cv_folds)

        mix_fit = np.einsum("t,tsd->sd", w, U_fit)
        mix_val = np.einsum("t,tsd->sd", w, U_val)
        model = fit_ridge(mix_fit, Y_fit, lam_t)
        val_mse = _mse(predict(model, mix_val), Y_val)

        if val_mse < best_val:
            best_val = val_mse
            best_w = w
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                converged = True
                break

        grad_theta = np.empty(n_tasks)
        for i in range(n_tasks):
            bump = np.zeros(n_tasks)
            bump[i] = fd_step
            hi = envelope(_softmax(theta + bump), lam_t)
            lo = envelope(_softmax(theta - bump), lam_t)
            grad_theta[i] = (hi - lo) / (2.0 * fd_step)
        if float(np.max(np.abs(grad_theta))) < 1e-12:
            converged = True
            break

        t = epoch + 1
        m = beta1 * m + (1 - beta1) * grad_theta
        v = beta2 * v + (1 - beta2) * grad_theta**2
        theta = theta - cfg.learning_rate * (m / (1 - beta1**t)) / (np.sqrt(v / (1 - beta2**t)) + eps)

    # Keep the documented guarantee: never return weights that train worse
    # than the uniform initialization, compared at the final penalty.
    uniform_w = np.full(n_tasks, 1.0 / n_tasks)
    uniform_train = envelope(uniform_w, lam_t)
    best_train = envelope(best_w, lam_t)
    if best_train > uniform_train:
        best_w = uniform_w
        best_train = uniform_train
        converged = False
        mix_fit = np.einsum("t,tsd->sd", best_w, U_fit)
        model = fit_ridge(mix_fit, Y_fit, lam_t)
        best_val = _mse(predict(model, np.einsum("t,tsd->sd", best_w, U_val)), Y_val)

    best_w = best_w / best_w.sum()
    return DynamicFitResult(
        weights=WeightVector(weights=best_w),
        converged=converged,
        epochs_run=epochs_run,
        train_mse=best_train,
        val_mse=best_val,
    )
