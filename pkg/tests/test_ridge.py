import numpy as np
import pytest

from oracles.frozen import RIDGE_6x4x40_G1EM3
from quadmani.ridge import RidgeProblem, SingularSystemError, ridge_solve

from conftest import seeded

METHODS = ["qr", "normal"]


@pytest.mark.parametrize("method", METHODS)
def test_augmented_system_oracle(method):
    H, R = seeded(101, 6, 40), seeded(102, 4, 40)
    W, obj = ridge_solve(RidgeProblem(H, R, 1e-3), method)
    assert abs(obj - RIDGE_6x4x40_G1EM3) <= 1e-8 * RIDGE_6x4x40_G1EM3
    # normal equations W (H H^T + g I) = R H^T
    lhs = W @ (H @ H.T + 1e-3 * np.eye(6))
    assert np.linalg.norm(lhs - R @ H.T) <= 1e-8 * np.linalg.norm(R @ H.T)


@pytest.mark.parametrize("method", METHODS)
def test_scalar_closed_form(method, rng):
    H, R = rng.standard_normal((1, 9)), rng.standard_normal((1, 9))
    W, _ = ridge_solve(RidgeProblem(H, R, 0.7), method)
    assert W[0, 0] == pytest.approx((R @ H.T).item() / ((H @ H.T).item() + 0.7), rel=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_heavy_shrinkage(method, rng):
    W, _ = ridge_solve(RidgeProblem(rng.standard_normal((5, 30)), rng.standard_normal((3, 30)), 1e9), method)
    assert np.linalg.norm(W) <= 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_singular_without_regularization(method):
    H = np.ones((2, 5))  # two identical feature rows
    with pytest.raises(SingularSystemError, match="regulari"):
        ridge_solve(RidgeProblem(H, np.ones((1, 5)), 0.0), method)
    W, _ = ridge_solve(RidgeProblem(H, np.ones((1, 5)), 1e-6), method)
    assert np.all(np.isfinite(W))


def test_invalid_problem():
    with pytest.raises(ValueError):
        RidgeProblem(np.ones((2, 3)), np.ones((1, 4)))
    with pytest.raises(ValueError):
        RidgeProblem(np.ones((2, 3)), np.ones((1, 3)), -1.0)


def test_monotone_in_features_and_bounded(rng):
    for _ in range(30):
        p, q, k = rng.integers(1, 6), rng.integers(1, 4), rng.integers(8, 30)
        H, R = rng.standard_normal((p, k)), rng.standard_normal((q, k))
        g = 10.0 ** rng.uniform(-6, 1)
        _, obj = ridge_solve(RidgeProblem(H, R, g))
        _, obj2 = ridge_solve(RidgeProblem(np.vstack([H, rng.standard_normal((1, k))]), R, g))
        assert 0.0 <= obj2 <= obj * (1 + 1e-12) + 1e-12
        assert obj <= np.sum(R**2) * (1 + 1e-12)


def test_methods_agree(rng):
    H, R = rng.standard_normal((10, 200)), rng.standard_normal((50, 200))
    W1, o1 = ridge_solve(RidgeProblem(H, R, 1e-4), "qr")
    W2, o2 = ridge_solve(RidgeProblem(H, R, 1e-4), "normal")
    assert np.allclose(W1, W2, rtol=1e-9, atol=1e-12)
    assert o1 == pytest.approx(o2, rel=1e-10)
