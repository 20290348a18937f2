import numpy as np
import pytest

from edgeslm import datapipe, featsel
from edgeslm.featsel import (
    correlation_filter,
    correlation_matrix,
    lasso,
    lasso_kkt_residuals,
    lasso_lambda_max,
    pca,
    random_forest_importance,
    rfe,
    soft_threshold,
    standardize,
)


def synth_matrix(n=2000, d=10, k=3, seed=7):
    records, informative = datapipe.synth_generate(n, d, k, 0.5, seed=seed)
    _, X, y = datapipe.records_to_matrix(records)
    return X, y, informative


def test_standardize_hand_case():
    Z, constant = standardize(np.array([[1.0], [2.0], [3.0]]))
    assert Z[:, 0] == pytest.approx([-1.224745, 0.0, 1.224745], abs=1e-6)
    assert constant == []


def test_standardize_idempotent():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 3))
    Z, _ = standardize(X)
    Z2, _ = standardize(Z)
    assert np.max(np.abs(Z2 - Z)) < 1e-12


def test_standardize_constant_column_flagged():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    Z, constant = standardize(X)
    assert constant == [0]
    assert np.all(Z[:, 0] == 0.0)


def test_correlation_self_is_one():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 4))
    R = correlation_matrix(X)
    assert np.allclose(np.diag(R), 1.0)
    assert np.max(np.abs(R - R.T)) < 1e-12


def test_correlation_perfect_pair_dropped():
    rng = np.random.default_rng(2)
    x = rng.normal(size=200)
    X = np.column_stack([x, 2 * x, rng.normal(size=200)])
    R = correlation_matrix(X)
    assert R[0, 1] == pytest.approx(1.0, abs=1e-12)
    res = correlation_filter(X, threshold=0.9)
    assert 1 not in res.kept
    assert 0 in res.kept and 2 in res.kept


def test_correlation_duplicate_feature_excluded():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 10))
    X[:, 7] = X[:, 2]
    res = correlation_filter(X)
    assert 7 not in res.kept
    assert 2 in res.kept


def test_correlation_zero_variance_pair():
    X = np.column_stack([np.ones(20), np.arange(20.0)])
    R = correlation_matrix(X)
    assert R[0, 1] == 0.0
    assert R[0, 0] == 1.0


def test_soft_threshold_closed_form():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0


def test_lasso_null_at_lambda_max():
    X, y, _ = synth_matrix(n=500)
    Z, _ = standardize(X)
    yc = y - y.mean()
    lmax = lasso_lambda_max(Z, yc)
    res, beta = lasso(Z, yc, lmax * 1.0000001)
    assert res.kept == ()
    assert np.all(beta == 0.0)


def test_lasso_recovers_informative_support():
    X, y, informative = synth_matrix()
    Z, _ = standardize(X)
    yc = y - y.mean()
    lmax = lasso_lambda_max(Z, yc)
    recovered = False
    for lam in np.geomspace(lmax, lmax * 1e-3, 25):
        res, _ = lasso(Z, yc, float(lam))
        if set(res.kept) == informative:
            recovered = True
            break
    assert recovered


def test_lasso_kkt_conditions():
    rng = np.random.default_rng(5)
    for trial in range(5):
        X = rng.normal(size=(200, 8))
        beta_true = np.zeros(8)
        beta_true[:3] = rng.normal(size=3)
        y = X @ beta_true + 0.1 * rng.normal(size=200)
        Z, _ = standardize(X)
        yc = y - y.mean()
        lam = 0.1 * lasso_lambda_max(Z, yc)
        tol = 1e-6
        res, beta = lasso(Z, yc, lam, tol=tol)
        assert res.converged
        corr = lasso_kkt_residuals(Z, yc, beta, lam)
        for j in range(8):
            if beta[j] == 0.0:
                assert abs(corr[j]) <= lam + 10 * tol
            else:
                assert corr[j] == pytest.approx(lam * np.sign(beta[j]), abs=10 * tol)


def test_lasso_support_nesting_endpoints():
    X, y, _ = synth_matrix(n=500)
    Z, _ = standardize(X)
    yc = y - y.mean()
    lmax = lasso_lambda_max(Z, yc)
    at_max, _ = lasso(Z, yc, lmax)
    at_zero, _ = lasso(Z, yc, 0.0, max_iter=20_000)
    assert set(at_max.kept) <= set(at_zero.kept)


def test_lasso_nonconvergence_flagged():
    X, y, _ = synth_matrix(n=500)
    Z, _ = standardize(X)
    yc = y - y.mean()
    res, _ = lasso(Z, yc, 1e-6, tol=1e-14, max_iter=2)
    assert not res.converged


def char_poly_eigvals_2x2(A):
    tr, det = A[0, 0] + A[1, 1], A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    disc = np.sqrt(tr * tr - 4 * det)
    return sorted([(tr + disc) / 2, (tr - disc) / 2], reverse=True)


def test_pca_line_y_equals_x():
    rng = np.random.default_rng(6)
    t = rng.normal(size=200)
    X = np.column_stack([t, t + 1e-9 * rng.normal(size=200)])
    components, explained, _ = pca(X, 2)
    first = components[0]
    assert np.abs(first) == pytest.approx([1 / np.sqrt(2), 1 / np.sqrt(2)], abs=1e-4)
    assert explained[1] == pytest.approx(0.0, abs=1e-6)


def test_pca_eigenvalues_match_char_poly_2x2():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(300, 2)) @ np.array([[1.0, 0.4], [0.0, 0.7]])
    Z, _ = standardize(X)
    cov = Z.T @ Z / Z.shape[0]
    expected = char_poly_eigvals_2x2(cov)
    _, explained, _ = pca(X, 2)
    assert explained == pytest.approx(expected, abs=1e-8)


def test_pca_eigenvalues_match_numpy_3x3():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(400, 3)) @ rng.normal(size=(3, 3))
    Z, _ = standardize(X)
    cov = Z.T @ Z / Z.shape[0]
    # independent oracle: roots of the characteristic polynomial
    coeffs = np.poly(cov)
    roots = sorted(np.roots(coeffs).real, reverse=True)
    _, explained, _ = pca(X, 3)
    assert explained == pytest.approx(roots, abs=1e-8)


def test_pca_components_orthonormal():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(200, 6))
    components, explained, _ = pca(X, 6)
    G = components @ components.T
    assert np.max(np.abs(G - np.eye(6))) < 1e-8
    assert all(explained[i] >= explained[i + 1] - 1e-12 for i in range(5))


def test_pca_full_rank_reconstruction():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(100, 5))
    components, _, _ = pca(X, 5)
    Z, _ = standardize(X)
    scores = Z @ components.T
    recon = scores @ components
    assert np.max(np.abs(recon - Z)) < 1e-8


def test_pca_row_permutation_invariant():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(150, 4))
    perm = rng.permutation(150)
    _, ev1, _ = pca(X, 4)
    _, ev2, _ = pca(X[perm], 4)
    assert ev1 == pytest.approx(ev2, abs=1e-10)


def test_pca_k_validation():
    X = np.random.default_rng(0).normal(size=(50, 3))
    with pytest.raises(ValueError):
        pca(X, 0)
    with pytest.raises(ValueError):
        pca(X, 4)


def test_rfe_identity_when_keeping_all():
    X, y, _ = synth_matrix(n=300)
    res = rfe(X, y, n_keep=X.shape[1])
    assert res.kept == tuple(range(X.shape[1]))


def test_rfe_recovers_informative():
    X, y, informative = synth_matrix()
    res = rfe(X, y, n_keep=3)
    assert set(res.kept) == informative


def test_rfe_step_two_same_result_size():
    X, y, _ = synth_matrix(n=500)
    res = rfe(X, y, n_keep=4, step=2)
    assert len(res.kept) == 4
    # step 2 drops two per round: 10 -> 8 -> 6 -> 4 is 3 rounds vs 6 with step 1
    assert max(res.scores) == 4.0


def test_random_forest_single_class():
    X = np.random.default_rng(0).normal(size=(50, 4))
    y = np.zeros(50, dtype=int)
    res = random_forest_importance(X, y, n_trees=5)
    assert res.scores == (0.0,) * 4
    assert "single-class target" in res.flags


def test_random_forest_importances_sum_to_one():
    X, y, _ = synth_matrix(n=400)
    res = random_forest_importance(X, y.astype(int), n_trees=20, seed=0)
    assert sum(res.scores) == pytest.approx(1.0, abs=1e-9)


def test_random_forest_recovers_informative_majority():
    X, y, informative = synth_matrix(n=800)
    hits = 0
    for seed in range(5):
        res = random_forest_importance(X, y.astype(int), n_trees=40, seed=seed, n_keep=3)
        top3 = set(np.argsort(-np.asarray(res.scores))[:3])
        hits += top3 == informative
    assert hits >= 3


def test_random_forest_deterministic():
    X, y, _ = synth_matrix(n=200)
    r1 = random_forest_importance(X, y.astype(int), n_trees=10, seed=4)
    r2 = random_forest_importance(X, y.astype(int), n_trees=10, seed=4)
    assert r1.scores == r2.scores


def test_export_selection_csv():
    X, y, _ = synth_matrix(n=200)
    res = correlation_filter(X)
    text = featsel.export_selection_csv([res], [f"f{i}" for i in range(X.shape[1])])
    lines = text.strip().split("\n")
    assert lines[0] == "feature,method,score,kept"
    assert len(lines) == 1 + X.shape[1]
