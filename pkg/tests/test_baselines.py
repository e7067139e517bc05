import numpy as np
import pytest

from oracles.frozen import AM_XI_10x30, LEADING_12x8_R2, PCA_15x10_R3
from quadmani.baselines import (
    AmConfig,
    am_encode,
    am_fit,
    am_procrustes_step,
    am_state_step,
    am_xi_step,
    leading_fit,
    linear_manifold,
    pca_error,
    procrustes,
)
from quadmani.diagnostics import relative_error
from quadmani.encoders import decode, encode_linear
from quadmani.features import quad_features
from quadmani.greedy import GreedyConfig, greedy_fit
from quadmani.svdcore import thin_svd
import scipy.linalg

from conftest import seeded


def random_orthonormal(rng, n, c):
    return np.linalg.qr(rng.standard_normal((n, c)))[0]


def test_leading_matches_frozen_objective():
    S = seeded(104, 12, 8)
    m = leading_fit(S, 2, 1e-6)
    Z = encode_linear(m, S)
    obj = np.sum((decode(m, Z) - S) ** 2) + 1e-6 * np.sum(m.Wbar**2)
    assert obj == pytest.approx(LEADING_12x8_R2, rel=1e-8)
    assert m.selected == (1, 2)


def test_leading_equals_greedy_without_window(rng):
    S = rng.standard_normal((25, 18))
    a = leading_fit(S, 3, 1e-6)
    b, _ = greedy_fit(S, GreedyConfig(r=3, m=3, grow_window=False, gamma=1e-6))
    assert np.max(scipy.linalg.subspace_angles(a.V, b.V)) <= 1e-10


def test_leading_large_gamma_is_pca(rng):
    S = rng.standard_normal((20, 15))
    m = leading_fit(S, 3, 1e9)
    err = np.linalg.norm(decode(m, encode_linear(m, S)) - S)
    assert err == pytest.approx(pca_error(S, m.V), rel=1e-6)


def test_leading_never_worse_than_pca_on_train(rng):
    for _ in range(10):
        S = rng.standard_normal((15, 12))
        m = leading_fit(S, 2, 1e-8)
        assert np.linalg.norm(decode(m, encode_linear(m, S)) - S) <= pca_error(S, m.V) * (1 + 1e-12)


def test_leading_rank_check(rng):
    with pytest.raises(ValueError):
        leading_fit(rng.standard_normal((4, 3)), 4, 1e-6)


def test_pca_error():
    S = seeded(105, 15, 10)
    V = np.linalg.qr(seeded(106, 15, 3))[0]
    assert pca_error(S, V) == pytest.approx(PCA_15x10_R3, rel=1e-12)
    assert pca_error(V @ seeded(3, 3, 4), V) <= 1e-12
    f = thin_svd(S)
    assert pca_error(S, f.U[:, :4]) == pytest.approx(np.sqrt(np.sum(f.sigma[4:] ** 2)), rel=1e-10)
    with pytest.raises(ValueError):
        pca_error(S, np.eye(3))


def test_linear_manifold_zero_weights(rng):
    V = random_orthonormal(rng, 6, 2)
    m = linear_manifold(V)
    assert m.p == 3 and np.all(m.Wbar == 0)


def test_procrustes_exact_factor(rng):
    Q = random_orthonormal(rng, 8, 3)
    assert np.allclose(procrustes(Q @ np.eye(3)), Q, atol=1e-12)


def test_procrustes_beats_random_competitors(rng):
    for _ in range(20):
        n, c, k = 12, 4, 30
        S = rng.standard_normal((n, k))
        M = rng.standard_normal((c, k))
        X = procrustes(S @ M.T)
        assert np.allclose(X.T @ X, np.eye(c), atol=1e-10)
        best = np.sum((S - X @ M) ** 2)
        for _ in range(100):
            Y = random_orthonormal(rng, n, c)
            assert best <= np.sum((S - Y @ M) ** 2)


def test_procrustes_step_shapes(rng):
    S = rng.standard_normal((10, 20))
    Sr = rng.standard_normal((2, 20))
    Xi = rng.standard_normal((3, 3))
    V, W = am_procrustes_step(S, Sr, Xi, 3)
    X = np.hstack([V, W])
    assert V.shape == (10, 2) and W.shape == (10, 3)
    assert np.allclose(X.T @ X, np.eye(5), atol=1e-10)
    with pytest.raises(ValueError):
        am_procrustes_step(S, Sr, Xi, 4)


def test_xi_step_frozen():
    S = seeded(107, 10, 30)
    X = np.linalg.qr(seeded(108, 10, 5))[0]
    V, W = X[:, :2], X[:, 2:]
    Xi = am_xi_step(S, V.T @ S, V, W, 1e-2)
    assert np.allclose(Xi, AM_XI_10x30, rtol=1e-8, atol=1e-12)


def test_xi_step_zero_target(rng):
    X = random_orthonormal(rng, 9, 4)
    V, W = X[:, :2], X[:, 2:]
    Sr = rng.standard_normal((2, 12))
    assert np.allclose(am_xi_step(V @ Sr, Sr, V, W, 1e-3), 0.0, atol=1e-14)


def test_state_step_linear_case(rng):
    X = random_orthonormal(rng, 9, 5)
    V, W = X[:, :2], X[:, 2:]
    S = rng.standard_normal((9, 7))
    Z, unconverged = am_state_step(S, V, W, np.zeros((3, 3)), np.zeros((2, 7)))
    assert np.allclose(Z, V.T @ S, atol=1e-10)
    assert not unconverged.any()


def column_cost(S, V, W, Xi, Z):
    E = S - V @ Z - W @ (Xi @ quad_features(Z))
    return 0.5 * np.sum(E**2, axis=0)


def test_state_step_never_uphill(rng):
    for _ in range(10):
        X = random_orthonormal(rng, 12, 6)
        V, W = X[:, :3], X[:, 3:]
        Xi = rng.standard_normal((3, 6))
        S = rng.standard_normal((12, 25))
        Z0 = V.T @ S
        Z, _ = am_state_step(S, V, W, Xi, Z0, lm_max_evals=50)
        assert np.all(column_cost(S, V, W, Xi, Z) <= column_cost(S, V, W, Xi, Z0) + 1e-14)


def test_state_step_quadratic_exact():
    # parabola: V = e1, What = e2, Xi = [1]; start away from the solution
    t = np.linspace(-2, 2, 9)
    S = np.vstack([t, t**2])
    V, W, Xi = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]), np.array([[1.0]])
    Z, _ = am_state_step(S, V, W, Xi, (t + 0.3)[None])
    assert np.max(np.abs(V @ Z + W @ (Xi @ quad_features(Z)) - S)) <= 1e-10


def test_am_fit_monotone_and_beats_leading(rng):
    S = rng.standard_normal((30, 40)) * np.exp(-np.arange(30) / 5.0)[:, None]
    S -= S.mean(axis=1, keepdims=True)
    gamma = 1e-4
    state, mani = am_fit(S, 3, AmConfig(qbar=10, gamma=gamma, max_outer=15))
    h = np.array(state.objective_history)
    assert np.all(np.diff(h) <= 1e-10 * h[0])
    assert mani.am_fitted and mani.method == "am" and mani.selected == ()
    X = np.hstack([state.V, state.What])
    assert np.allclose(X.T @ X, np.eye(13), atol=1e-8)
    lead = leading_fit(S, 3, gamma)
    lead_obj = np.sum((decode(lead, encode_linear(lead, S)) - S) ** 2) + gamma * np.sum(lead.Wbar**2)
    am_obj = np.sum((decode(mani, state.Sr) - S) ** 2) + gamma * np.sum(mani.Wbar**2)
    assert am_obj <= lead_obj


def test_am_config_errors(rng):
    with pytest.raises(ValueError):
        AmConfig(qbar=0)
    with pytest.raises(ValueError):
        am_fit(rng.standard_normal((5, 5)), 0, AmConfig(qbar=2))


def test_am_encode_improves_on_linear(rng):
    S = rng.standard_normal((20, 30)) * np.exp(-np.arange(20) / 3.0)[:, None]
    state, mani = am_fit(S, 2, AmConfig(qbar=6, max_outer=5))
    lin = relative_error(mani, "linear", S).E_rel
    am = relative_error(mani, "am", S, Z=am_encode(mani, S)).E_rel
    assert am <= lin * (1 + 1e-12)
