import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cosine as scipy_cosine

from brainenc.errors import DegenerateRowWarning, DomainError, ShapeMismatch, ZeroNormRow
from brainenc.metrics import (
    EvaluationReport,
    cosine_distance,
    pearson_metric,
    pearson_per_voxel,
    two_v_two,
)


def two_v_two_oracle(y, yhat):
    """Independent double-loop implementation straight from the definition."""
    n = y.shape[0]
    correct = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            matched = scipy_cosine(y[i], yhat[i]) + scipy_cosine(y[j], yhat[j])
            crossed = scipy_cosine(y[i], yhat[j]) + scipy_cosine(y[j], yhat[i])
            correct += matched < crossed
            total += 1
    return correct / total


def pearson_oracle(y, yhat):
    return float(np.mean([np.corrcoef(y[i], yhat[i])[0, 1] for i in range(y.shape[0])]))


def antipodal_fixture():
    """Six orthogonal axis pairs; swapping within each pair scores exactly 0."""
    y = np.zeros((12, 6))
    for a in range(6):
        y[2 * a, a] = 1.0
        y[2 * a + 1, a] = -1.0
    swap = np.arange(12).reshape(6, 2)[:, ::-1].ravel()
    return y, y[swap]


def test_matches_brute_force_oracle(rng):
    for _ in range(50):
        y = rng.standard_normal((12, 6))
        yhat = rng.standard_normal((12, 6))
        assert two_v_two(y, yhat) == two_v_two_oracle(y, yhat)


def test_perfect_predictions_score_one(rng):
    y = rng.standard_normal((15, 5))
    assert two_v_two(y, y) == 1.0
    # positive per-row rescaling leaves cosine distances unchanged
    scales = rng.uniform(0.1, 10.0, size=(15, 1))
    assert two_v_two(y, y * scales) == 1.0


def test_antipodal_swap_scores_exactly_zero():
    y, yhat = antipodal_fixture()
    assert two_v_two(y, yhat) == 0.0


def test_ties_score_zero():
    # identical predictions for both rows: matched == crossed, strict loses
    y = np.array([[1.0, 0.0], [0.0, 1.0]])
    yhat = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert two_v_two(y, yhat) == 0.0


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_two_v_two_invariant_under_joint_row_permutation(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((10, 4))
    yhat = rng.standard_normal((10, 4))
    perm = rng.permutation(10)
    assert two_v_two(y, yhat) == two_v_two(y[perm], yhat[perm])


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_two_v_two_invariant_under_row_rescaling(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((8, 5))
    yhat = rng.standard_normal((8, 5))
    scales = rng.uniform(0.5, 2.0, size=(8, 1))
    assert two_v_two(y, yhat) == pytest.approx(two_v_two(y, yhat * scales), abs=0)


def test_two_v_two_rejects_zero_rows():
    y = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(ZeroNormRow):
        two_v_two(y, y + 1.0)
    with pytest.raises(ShapeMismatch):
        two_v_two(np.ones((1, 3)), np.ones((1, 3)))
    with pytest.raises(ShapeMismatch):
        two_v_two(np.ones((3, 3)), np.ones((3, 4)))


def test_cosine_distance_basics():
    assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)
    assert cosine_distance([2.0, 0.0], [5.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


# --- pearson ---

def test_pearson_matches_corrcoef_oracle(rng):
    for _ in range(20):
        y = rng.standard_normal((9, 7))
        yhat = rng.standard_normal((9, 7))
        assert pearson_metric(y, yhat) == pytest.approx(pearson_oracle(y, yhat), abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_pearson_affine_invariance(seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((6, 8))
    yhat = rng.standard_normal((6, 8))
    a = rng.uniform(0.1, 5.0, size=(6, 1))
    b = rng.standard_normal((6, 1)) * 10
    assert pearson_metric(y, a * yhat + b) == pytest.approx(pearson_metric(y, yhat), abs=1e-12)


def test_pearson_of_self_affine_is_one(rng):
    y = rng.standard_normal((10, 6))
    assert pearson_metric(y, 3.0 * y + 2.0) == pytest.approx(1.0, abs=1e-12)
    assert pearson_metric(y, -1.0 * y) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_degenerate_rows_count_zero(rng):
    y = rng.standard_normal((4, 5))
    yhat = y.copy()
    yhat[2] = 0.0  # constant prediction row: correlation undefined, scored 0
    with pytest.warns(DegenerateRowWarning):
        score = pearson_metric(y, yhat)
    assert score == pytest.approx(3.0 / 4.0, abs=1e-12)


def test_pearson_needs_two_voxels(rng):
    with pytest.raises(ShapeMismatch):
        pearson_metric(np.ones((3, 1)), np.ones((3, 1)))


def test_pearson_per_voxel_is_transpose(rng):
    y = rng.standard_normal((10, 6))
    yhat = rng.standard_normal((10, 6))
    assert pearson_per_voxel(y, yhat) == pytest.approx(pearson_metric(y.T, yhat.T), abs=0)
    with pytest.raises(ShapeMismatch):
        pearson_per_voxel(np.ones((1, 4)), np.ones((1, 4)))


# --- report records ---

def test_report_validates_ranges():
    kw = dict(subject_id="s", roi_id="r", method="average", n_test=10, v_voxels=5, lam=1.0)
    EvaluationReport(pearson=0.5, two_v_two=0.9, **kw)
    with pytest.raises(DomainError):
        EvaluationReport(pearson=1.5, two_v_two=0.9, **kw)
    with pytest.raises(DomainError):
        EvaluationReport(pearson=0.5, two_v_two=-0.1, **kw)


def test_report_json_keys():
    rep = EvaluationReport(subject_id="s", roi_id="r", method="average",
                           pearson=0.5, two_v_two=0.9, n_test=10, v_voxels=5,
                           lam=1.0, weights=(0.25, 0.75))
    d = rep.to_json_dict()
    assert {"subject", "roi", "method", "p", "pearson", "two_v_two",
            "lambda", "n_test", "v_voxels"} <= set(d)
    assert d["weights"] == [0.25, 0.75]
    assert d["p"] is None
