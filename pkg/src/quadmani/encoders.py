"""Encoding onto and decoding from a quadratic manifold.

All inputs are expected to be shifted by the manifold's training mean
already; ``decode(..., add_mean=True)`` undoes the shift on output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .features import quad_features, quad_jacobian_batch
from .manifold import QuadraticManifold

# caps the chunk x p x r feature-Jacobian stack held in memory at once
_JACOBIAN_BUDGET = 4_000_000


class GnInit(str, enum.Enum):
    Zero = "zero"
    LinearEncode = "linear"


@dataclass(frozen=True)
class GnConfig:
    max_iter: int = 20
    change_tol: float = 1e-12
    damping: float = 0.0
    init: GnInit = GnInit.LinearEncode
    keep_best: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.damping < 0:
            raise ValueError("damping must be nonnegative")
        object.__setattr__(self, "init", GnInit(self.init))


@dataclass
class GnDiagnostics:
    iterations: np.ndarray  # per column
    error: np.ndarray  # final ||x - g(z)|| per column
    initial_error: np.ndarray
    converged: np.ndarray


def _check_rows(mani: QuadraticManifold, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != mani.n:
        raise ValueError(f"data has {X.shape[0]} rows, manifold has n = {mani.n}")
    return X


def encode_linear(mani: QuadraticManifold, X) -> np.ndarray:
    X = _check_rows(mani, X)
    return mani.V.T @ X


def decode(mani: QuadraticManifold, Z, add_mean: bool = False) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != mani.r:
        raise ValueError(f"reduced states have {Z.shape[0]} rows, manifold has r = {mani.r}")
    X = mani.V @ Z + mani.Wbar @ quad_features(Z)
    if add_mean:
        X += mani.mean.mean[:, None]
    return X


def decoder_jacobian(mani: QuadraticManifold, z) -> np.ndarray:
    """``V + Wbar h'(z)`` at a single reduced state, n x r."""
    z = np.asarray(z, dtype=np.float64)
    return mani.V + mani.Wbar @ quad_jacobian_batch(z[:, None])[0]


def encode_gauss_newton(
    mani: QuadraticManifold, X, cfg: GnConfig | None = None
) -> tuple[np.ndarray, GnDiagnostics]:
    """Approximate ``argmin_z ||g(z) - x||`` column by column with Gauss-Newton.

    Each update solves ``min ||J dz - (x - g(z))||^2 + damping ||dz||^2``;
    without damping the minimal-norm solution is taken, so a rank-deficient
    Jacobian never fails. A column stops once its reconstruction error changes
    by at most ``change_tol`` relative to the previous iterate.
    """
    cfg = cfg or GnConfig()
    X = _check_rows(mani, X)
    n, k = X.shape
    r, p = mani.r, mani.p
    V, W = mani.V, mani.Wbar
    Z = np.zeros((r, k)) if cfg.init is GnInit.Zero else V.T @ X
    # Gram pieces of J = V + W h'(z); per-column work is then independent of n
    VtV, VtW, WtW = V.T @ V, V.T @ W, W.T @ W
    chunk = max(1, _JACOBIAN_BUDGET // max(p * r, 1))

    err = _column_errors(mani, X, Z)
    diag = GnDiagnostics(
        iterations=np.zeros(k, dtype=int),
        error=err.copy(),
        initial_error=err.copy(),
        converged=np.zeros(k, dtype=bool),
    )
    best_Z, best_err = Z.copy(), err.copy()
    active = np.arange(k)
    for _ in range(cfg.max_iter):
        if active.size == 0:
            break
        for start in range(0, active.size, chunk):
            cols = active[start : start + chunk]
            Zc = Z[:, cols]
            res = X[:, cols] - decode(mani, Zc)
            D = quad_jacobian_batch(Zc)  # c x p x r
            A = VtW[None] @ D
            G = VtV[None] + A + np.swapaxes(A, 1, 2) + np.swapaxes(D, 1, 2) @ (WtW[None] @ D)
            g = (V.T @ res).T + np.einsum("cpr,pc->cr", D, W.T @ res)
            Z[:, cols] = Zc + _gn_step(G, g, cfg.damping).T
        new_err = _column_errors(mani, X[:, active], Z[:, active])
        old_err = err[active]
        err[active] = new_err
        diag.iterations[active] += 1
        better = new_err < best_err[active]
        upd = active[better]
        best_Z[:, upd] = Z[:, upd]
        best_err[upd] = new_err[better]
        scale = np.where(old_err > 0, old_err, 1.0)
        done = (np.abs(new_err - old_err) <= cfg.change_tol * scale) | ~np.isfinite(new_err)
        diag.converged[active[done]] = True
        active = active[~done]
    if cfg.keep_best:
        Z, err = best_Z, best_err
    diag.error = err
    return Z, diag


def _gn_step(G: np.ndarray, g: np.ndarray, damping: float) -> np.ndarray:
    """Batched update from ``G = J^T J`` (c x r x r) and ``g = J^T res`` (c x r).

    Undamped steps use ``pinv(J^T J) J^T res``, the minimal-norm least-squares
    solution ``pinv(J) res``.
    """
    rhs = g[:, :, None]
    if damping == 0.0:
        return (np.linalg.pinv(G, hermitian=True) @ rhs)[:, :, 0]
    return np.linalg.solve(G + damping * np.eye(G.shape[1]), rhs)[:, :, 0]


def _column_errors(mani: QuadraticManifold, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return np.linalg.norm(X - decode(mani, Z), axis=0)


class EncoderKind(str, enum.Enum):
    Linear = "linear"
    GaussNewton = "gn"


def encode(mani: QuadraticManifold, X, kind: EncoderKind | str = EncoderKind.Linear,
           gn: GnConfig | None = None) -> np.ndarray:
    if EncoderKind(kind) is EncoderKind.Linear:
        return encode_linear(mani, X)
    return encode_gauss_newton(mani, X, gn)[0]


def reconstruct(mani: QuadraticManifold, X, kind: EncoderKind | str = EncoderKind.Linear,
                gn: GnConfig | None = None) -> np.ndarray:
    return decode(mani, encode(mani, X, kind, gn))
