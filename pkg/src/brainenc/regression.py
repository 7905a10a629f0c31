"""Multi-output ridge encoder: closed-form fit, prediction, lambda selection.

Features are standardized (train statistics only) and targets are
column-centered before solving the normal equations, so one lambda is
comparable across feature spaces of different scales.  All voxels of a
(subject, ROI) share the selected lambda.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .data_model import load_tensor, write_tensor
from .errors import DomainError, ShapeMismatch, SingularSystem, TooFewSamples

STD_FLOOR = 1e-8
RESIDUAL_RTOL = 1e-8
DEFAULT_LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
DEFAULT_CV_FOLDS = 4


@dataclass(frozen=True)
class StandardScaler:
    """Per-column zero-mean unit-variance scaling, fitted on training rows.

    Population standard deviations (ddof=0), clamped below at STD_FLOOR so
    constant columns do not divide by zero.
    """

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "StandardScaler":
        means = X.mean(axis=0)
        stds = np.maximum(X.std(axis=0), STD_FLOOR)
        return cls(means=means, stds=stds)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds


@dataclass(frozen=True)
class RidgeModel:
    """Linear encoder for one (subject, ROI, feature-space) triple.

    Prediction is ``scaler.transform(X) @ weights + bias`` where ``bias``
    holds the training column means of the targets.
    """

    weights: np.ndarray
    bias: np.ndarray
    lam: float
    scaler: StandardScaler

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_targets(self) -> int:
        return self.weights.shape[1]


def _check_xy(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ShapeMismatch(f"X and Y must be 2-D, got {X.shape} and {Y.shape}")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if X.shape[0] < 2:
        raise TooFewSamples("ridge fit needs at least 2 training rows")
    return X, Y


def fit_ridge(X, Y, lam: float) -> RidgeModel:
    """Fit W minimizing ||Y - Xs W - b||_F^2 + lam ||W||_F^2 on standardized X.

    Solved in closed form: Cholesky on the normal equations for lam > 0,
    minimum-norm SVD solve at lam = 0.  The returned model always satisfies
    the normal-equation residual bound checked by
    :func:`normal_equation_residual`; at lam = 0 a rank-deficient system
    whose solution fails that bound raises SingularSystem.
    """
    X, Y = _check_xy(X, Y)
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise DomainError(f"lambda must be a nonnegative real, got {lam}")

    scaler = StandardScaler.fit(X)
    Xs = scaler.transform(X)
    bias = Y.mean(axis=0)
    Yc = Y - bias

    gram = Xs.T @ Xs
    rhs = Xs.T @ Yc
    if lam > 0:
        weights = scipy.linalg.solve(gram + lam * np.eye(X.shape[1]), rhs, assume_a="pos")
    else:
        weights, *_ = np.linalg.lstsq(Xs, Yc, rcond=None)

    model = RidgeModel(weights=weights, bias=bias, lam=lam, scaler=scaler)
    if lam == 0 and normal_equation_residual(model, X, Y) > RESIDUAL_RTOL:
        raise SingularSystem(
            "normal equations at lambda=0 are numerically singular; use lambda > 0")
    return model


def predict(model: RidgeModel, X) -> np.ndarray:
    """Predict targets for X: standardize, multiply, add the bias row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected (m, {model.n_features}) input, got {X.shape}")
    return model.scaler.transform(X) @ model.weights + model.bias


def normal_equation_residual(model: RidgeModel, X, Y) -> float:
    """Relative max-norm residual of the normal equations for a fitted model.

    Computes ||(Xs'Xs + lam I) W - Xs'Yc||_inf / (1 + ||Xs'Yc||_inf) with Xs
    the standardized features and Yc the column-centered targets.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    Xs = model.scaler.transform(X)
    Yc = Y - Y.mean(axis=0)
    rhs = Xs.T @ Yc
    lhs = (Xs.T @ Xs) @ model.weights + model.lam * model.weights
    return float(np.abs(lhs - rhs).max() / (1.0 + np.abs(rhs).max()))


def _fold_bounds(n: int, folds: int) -> list[tuple[int, int]]:
    edges = [round(i * n / folds) for i in range(folds + 1)]
    return [(edges[i], edges[i + 1]) for i in range(folds)]


def select_lambda(X, Y, grid=DEFAULT_LAMBDA_GRID, folds: int = DEFAULT_CV_FOLDS) -> float:
    """Pick the grid value minimizing mean held-out MSE over contiguous folds.

    Folds are deterministic contiguous row blocks of the training set.
    Ties break toward the larger lambda.  Never sees test rows: callers
    pass the training split only.
    """
    X, Y = _check_xy(X, Y)
    grid = [float(g) for g in grid]
    if not grid:
        raise DomainError("lambda grid must be non-empty")
    if any(not np.isfinite(g) or g < 0 for g in grid):
        raise DomainError(f"lambda grid values must be nonnegative reals: {grid}")
    n = X.shape[0]
    if folds < 2:
        raise TooFewSamples(f"need at least 2 folds, got {folds}")
    if folds > n:
        raise TooFewSamples(f"{folds} folds exceed {n} training rows")
    bounds = _fold_bounds(n, folds)
    if any(n - (hi - lo) < 2 for lo, hi in bounds):
        raise TooFewSamples("a fold leaves fewer than 2 rows to fit on")

    best_lam = None
    best_err = np.inf
    for lam in grid:
        fold_errs = []
        for lo, hi in bounds:
            keep = np.r_[0:lo, hi:n]
            model = fit_ridge(X[keep], Y[keep], lam)
            resid = predict(model, X[lo:hi]) - Y[lo:hi]
            fold_errs.append(np.mean(resid**2))
        err = float(np.mean(fold_errs))
        if err < best_err or (err == best_err and lam > best_lam):
            best_err = err
            best_lam = lam
    return best_lam


def save_ridge(model: RidgeModel, prefix) -> None:
    """Serialize a model as <prefix>.weights.npy, <prefix>.bias.npy, <prefix>.json."""
    prefix = Path(prefix)
    write_tensor(prefix.parent / (prefix.name + ".weights.npy"), model.weights)
    write_tensor(prefix.parent / (prefix.name + ".bias.npy"), model.bias.reshape(1, -1))
    sidecar = {
        "lambda": model.lam,
        "feature_means": model.scaler.means.tolist(),
        "feature_stds": model.scaler.stds.tolist(),
    }
    (prefix.parent / (prefix.name + ".json")).write_text(json.dumps(sidecar, indent=2) + "\n")


def load_ridge(prefix) -> RidgeModel:
    prefix = Path(prefix)
    weights = np.asarray(load_tensor(prefix.parent / (prefix.name + ".weights.npy")))
    bias = np.asarray(load_tensor(prefix.parent / (prefix.name + ".bias.npy")))[0]
    sidecar = json.loads((prefix.parent / (prefix.name + ".json")).read_text())
    scaler = StandardScaler(
        means=np.asarray(sidecar["feature_means"], dtype=np.float64),
        stds=np.asarray(sidecar["feature_stds"], dtype=np.float64),
    )
    return RidgeModel(weights=weights, bias=bias, lam=float(sidecar["lambda"]), scaler=scaler)
