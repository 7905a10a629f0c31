import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brainenc.errors import DomainError, RankDeficiencyWarning, ShapeMismatch
from brainenc.pca import fit_pca, load_pca, reconstruct, save_pca, transform


def eigh_oracle(x):
    """Independent spectral route: eigendecomposition of the covariance."""
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order]


def test_matches_covariance_eigendecomposition(rng):
    x = rng.standard_normal((40, 10)) * rng.uniform(0.2, 5.0, size=10)
    evals, evecs = eigh_oracle(x)
    for k in (1, 3, 8):
        model = fit_pca(x, k)
        np.testing.assert_allclose(model.explained_variance, evals[:k], rtol=1e-8)
        # spans must agree even though signs/ordering conventions differ
        p_ours = model.components.T @ model.components
        p_oracle = evecs[:, :k] @ evecs[:, :k].T
        np.testing.assert_allclose(p_ours, p_oracle, atol=1e-8)


def test_reconstruction_error_equals_discarded_eigenvalue_sum(rng):
    x = rng.standard_normal((40, 10))
    evals, _ = eigh_oracle(x)
    for k in range(1, 9):
        model = fit_pca(x, k)
        recon = reconstruct(model, transform(model, x))
        mse_per_sample = np.mean(np.sum((x - recon) ** 2, axis=1))
        discarded = evals[k:].sum()
        np.testing.assert_allclose(mse_per_sample, discarded, rtol=1e-8)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_components_orthonormal_and_variances_sorted(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((30, 8))
    model = fit_pca(x, k)
    np.testing.assert_allclose(model.components @ model.components.T, np.eye(k), atol=1e-10)
    assert np.all(np.diff(model.explained_variance) <= 1e-12)
    assert np.all(model.explained_variance >= -1e-12)


def test_sign_convention_deterministic(rng):
    x = rng.standard_normal((25, 6))
    a = fit_pca(x, 4)
    b = fit_pca(x, 4)
    assert a.components.tobytes() == b.components.tobytes()
    for row in a.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_transform_centers_training_mean(rng):
    x = rng.standard_normal((30, 5)) + 7.5
    model = fit_pca(x, 3)
    scores = transform(model, x)
    np.testing.assert_allclose(scores.mean(axis=0), 0.0, atol=1e-10)


def test_rank_deficient_input_warns_and_zeroes_tail(rng):
    base = rng.standard_normal((3, 6))
    x = np.vstack([base] * 5)  # rank <= 3, centered rank <= 2
    with pytest.warns(RankDeficiencyWarning):
        model = fit_pca(x, 5)
    assert np.all(model.explained_variance[3:] == 0.0)


def test_k_bounds(rng):
    x = rng.standard_normal((10, 4))
    with pytest.raises(DomainError):
        fit_pca(x, 0)
    with pytest.raises(DomainError):
        fit_pca(x, 5)  # k > D
    fit_pca(x, 4)
    with pytest.raises(DomainError):
        fit_pca(rng.standard_normal((3, 8)), 3)  # k > N-1


def test_transform_validates_width(rng):
    model = fit_pca(rng.standard_normal((10, 4)), 2)
    with pytest.raises(ShapeMismatch):
        transform(model, rng.standard_normal((3, 5)))
    with pytest.raises(ShapeMismatch):
        reconstruct(model, rng.standard_normal((3, 3)))


def test_pca_round_trip(tmp_path, rng):
    x = rng.standard_normal((20, 6))
    model = fit_pca(x, 3)
    save_pca(model, tmp_path / "p.v1")
    back = load_pca(tmp_path / "p.v1")
    np.testing.assert_array_equal(back.components, model.components)
    np.testing.assert_array_equal(back.mean, model.mean)
    np.testing.assert_array_equal(back.explained_variance, model.explained_variance)
    q = rng.standard_normal((4, 6))
    np.testing.assert_array_equal(transform(back, q), transform(model, q))
