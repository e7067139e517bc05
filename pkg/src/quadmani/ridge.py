"""Tikhonov-regularized least squares with many right-hand sides."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class RidgeProblem:
    """Minimize ``||W H - R||_F^2 + gamma ||W||_F^2`` over W (q x p).

    H is p x k (one lifted point per column), R is q x k.
    """

    H: np.ndarray
    R: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        if self.H.ndim != 2 or self.R.ndim != 2:
            raise ValueError("H and R must be 2-D")
        if self.H.shape[1] != self.R.shape[1]:
            raise ValueError(f"column counts differ: H {self.H.shape}, R {self.R.shape}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


def ridge_solve(prob: RidgeProblem, method: str = "qr") -> tuple[np.ndarray, float]:
    """Minimizer of the ridge objective and the objective evaluated at it.

    ``method="qr"`` factors the stacked matrix ``[H^T; sqrt(gamma) I]``, which
    keeps the accuracy of the data term when gamma is tiny relative to the
    feature scale. ``method="normal"`` solves ``W (H H^T + gamma I) = R H^T``
    with a Cholesky factorization (eigendecomposition fallback).
    """
    H, R, gamma = prob.H, prob.R, float(prob.gamma)
    if method == "qr":
        W = _qr_solve(H, R, gamma)
    elif method == "normal":
        G = H @ H.T
        G[np.diag_indices(H.shape[0])] += gamma
        W = _spd_solve_right(G, R @ H.T, gamma)
    else:
        raise ValueError(f"unknown ridge method {method!r}")
    E = W @ H - R
    objective = float(np.vdot(E, E) + gamma * np.vdot(W, W))
    return W, objective


def _qr_solve(H: np.ndarray, R: np.ndarray, gamma: float) -> np.ndarray:
    p, k = H.shape
    if p == 0:
        return np.zeros((R.shape[0], 0))
    A = np.vstack([H.T, np.sqrt(gamma) * np.eye(p)]) if gamma > 0 else H.T
    if A.shape[0] < p:
        raise SingularSystemError(
            "feature Gram matrix is singular with gamma = 0: regularize or reduce features"
        )
    Q, T = scipy.linalg.qr(A, mode="economic", check_finite=False)
    d = np.abs(np.diag(T))
    if gamma == 0.0 and d.min() <= p * np.finfo(float).eps * max(d.max(), np.finfo(float).tiny):
        raise SingularSystemError(
            "feature Gram matrix is singular with gamma = 0: regularize or reduce features"
        )
    # rows k.. of the stacked right-hand side are zero
    C = R @ Q[:k]
    return scipy.linalg.solve_triangular(T, C.T, lower=False, check_finite=False).T


def _spd_solve_right(G: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    # W G = B  <=>  G W^T = B^T since G is symmetric
    try:
        c = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
        d = np.diag(c[0]) ** 2
        singular = d.min() <= G.shape[0] * np.finfo(float).eps * max(d.max(), np.finfo(float).tiny)
        if not singular:
            W = scipy.linalg.cho_solve(c, B.T, check_finite=False).T
            if np.all(np.isfinite(W)):
                return W
    except np.linalg.LinAlgError:
        pass
    evals, evecs = np.linalg.eigh(G)
    if gamma == 0.0:
        scale = max(abs(evals[-1]), np.finfo(float).tiny) if evals.size else 1.0
        if evals.size and evals[0] <= evals.shape[0] * np.finfo(float).eps * scale:
            raise SingularSystemError(
                "feature Gram matrix is singular with gamma = 0: regularize or reduce features"
            )
    else:
        # exact eigenvalues of H H^T + gamma I are >= gamma
        evals = np.maximum(evals, gamma)
    return ((B @ evecs) / evals) @ evecs.T
