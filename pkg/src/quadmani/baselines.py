"""Reference fitters: leading-r quadratic manifold, PCA, alternating minimization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .features import FeatureMapId, quad_features, quad_jacobian_batch
from .manifold import QuadraticManifold
from .matrixio import CenteringShift, as_data_matrix, zero_shift
from .ridge import RidgeProblem, ridge_solve
from .svdcore import SvdFactorization, thin_svd

log = logging.getLogger(__name__)


def leading_fit(
    S_train,
    r: int,
    gamma: float,
    mean: CenteringShift | None = None,
    svd: SvdFactorization | None = None,
) -> QuadraticManifold:
    """Basis from the leading ``r`` left-singular vectors, weights by ridge regression."""
    S = as_data_matrix(S_train)
    if not 1 <= r <= min(S.shape):
        raise ValueError(f"r = {r} must lie in [1, {min(S.shape)}]")
    if svd is None:
        svd = thin_svd(S)
    V = svd.U[:, :r].copy()
    Zr = V.T @ S
    Wbar, _ = ridge_solve(RidgeProblem(quad_features(Zr), S - V @ Zr, gamma))
    return QuadraticManifold(
        V=V,
        Wbar=Wbar,
        selected=tuple(range(1, r + 1)),
        mean=mean if mean is not None else zero_shift(S.shape[0]),
        gamma=float(gamma),
        svd_rank=svd.rank,
        method="leading",
    )


def pca_error(S, V) -> float:
    """Frobenius norm of ``S - V V^T S``; V must have orthonormal columns."""
    S = as_data_matrix(S)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != S.shape[0]:
        raise ValueError(f"basis shape {V.shape} incompatible with data {S.shape}")
    return float(np.linalg.norm(S - V @ (V.T @ S)))


def linear_manifold(V, mean: CenteringShift | None = None) -> QuadraticManifold:
    """A manifold with zero quadratic weights, i.e. plain projection onto span(V)."""
    V = np.asarray(V, dtype=np.float64)
    n, r = V.shape
    return QuadraticManifold(
        V=V,
        Wbar=np.zeros((n, r * (r + 1) // 2)),
        selected=tuple(range(1, r + 1)),
        mean=mean if mean is not None else zero_shift(n),
        gamma=0.0,
        method="pca",
    )


@dataclass(frozen=True)
class AmConfig:
    qbar: int
    gamma: float = 1e-4
    max_outer: int | None = None  # default 15 * r
    tol: float = 1e-12
    lm_max_evals: int = 1600
    lm_gtol: float = 1e-10

    def __post_init__(self):
        if self.qbar < 1:
            raise ValueError("qbar must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass
class AmState:
    V: np.ndarray
    What: np.ndarray
    Xi: np.ndarray
    Sr: np.ndarray
    outer_iter: int = 0
    objective_history: list[float] = field(default_factory=list)
    misfit_history: list[float] = field(default_factory=list)
    unconverged_columns: int = 0
    stop_reason: str = ""


def _am_objective(S, V, What, Xi, Sr, gamma) -> tuple[float, float]:
    E = S - V @ Sr - What @ (Xi @ quad_features(Sr))
    misfit = 0.5 * float(np.vdot(E, E))
    return misfit + 0.5 * gamma * float(np.vdot(Xi, Xi)), misfit


def am_procrustes_step(S, Sr, Xi, qbar: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal ``X = [V, What]`` minimizing ``1/2 ||S - X [Sr; Xi h(Sr)]||_F^2``."""
    S = np.asarray(S, dtype=np.float64)
    Sr = np.asarray(Sr, dtype=np.float64)
    M = np.vstack([Sr, Xi @ quad_features(Sr)]) if Xi is not None else Sr
    r = Sr.shape[0]
    if qbar is not None and M.shape[0] != r + qbar:
        raise ValueError(f"stacked coefficients have {M.shape[0]} rows, expected {r + qbar}")
    X = procrustes(S @ M.T)
    return X[:, :r], X[:, r:]


def procrustes(C: np.ndarray) -> np.ndarray:
    """Nearest orthonormal-column matrix ``A B^T`` from the thin SVD ``C = A D B^T``.

    Zero singular values leave the matching columns of A to the LAPACK
    ordering; A is orthonormal either way so X^T X = I still holds.
    """
    A, _, Bt = scipy.linalg.svd(C, full_matrices=False, lapack_driver="gesvd")
    return A @ Bt


def am_xi_step(S, Sr, V, What, gamma: float) -> np.ndarray:
    """Ridge fit of ``Xi`` so that ``Xi h(Sr)`` matches ``What^T (S - V Sr)``."""
    target = What.T @ (S - V @ Sr)
    Xi, _ = ridge_solve(RidgeProblem(quad_features(Sr), target, gamma))
    return Xi


def am_state_step(S, V, What, Xi, Sr0, lm_max_evals: int = 1600, gtol: float = 1e-10):
    """Per-column Levenberg-Marquardt for the reduced states.

    With ``[V, What]`` orthonormal the column objective reduces to
    ``1/2 ||[z - a; Xi h(z) - b]||^2`` plus a constant, ``a = V^T x``,
    ``b = What^T x``; all columns are iterated together as a batch. Uphill
    steps are rejected, so no column ends worse than its initial state.

    Returns ``(Sr, unconverged)`` where ``unconverged`` is a boolean mask.
    """
    a = V.T @ S
    b = What.T @ S
    Z = np.array(Sr0, dtype=np.float64, copy=True)
    r, k = Z.shape
    eye = np.eye(r)

    def residual(Zc, cols):
        return np.vstack([Zc - a[:, cols], Xi @ quad_features(Zc) - b[:, cols]])

    cols = np.arange(k)
    res = residual(Z, cols)
    cost = 0.5 * np.einsum("ij,ij->j", res, res)
    evals = np.ones(k, dtype=int)
    lam = np.full(k, 1e-3)
    converged = np.zeros(k, dtype=bool)
    active = np.arange(k)
    while active.size:
        Zc = Z[:, active]
        Jq = Xi @ quad_jacobian_batch(Zc)  # c x qbar x r  (via broadcasting matmul)
        Rc = res[:, active]
        # J^T rho with J = [I; Xi h'(z)]
        grad = Rc[:r].T + np.einsum("cqr,qc->cr", Jq, Rc[r:])
        JtJ = eye[None] + np.swapaxes(Jq, 1, 2) @ Jq
        small = np.linalg.norm(grad, axis=1) <= gtol
        converged[active[small]] = True
        keep = ~small & (evals[active] < lm_max_evals) & (lam[active] < 1e16)
        converged[active[~small & (lam[active] >= 1e16)]] = True
        active, grad, JtJ, Zc = active[keep], grad[keep], JtJ[keep], Zc[:, keep]
        if active.size == 0:
            break
        lhs = JtJ + lam[active, None, None] * eye[None]
        step = np.linalg.solve(lhs, -grad[:, :, None])[:, :, 0].T
        Z_try = Zc + step
        res_try = residual(Z_try, active)
        cost_try = 0.5 * np.einsum("ij,ij->j", res_try, res_try)
        evals[active] += 1
        accept = cost_try < cost[active]
        acc = active[accept]
        stalled = accept & (cost[active] - cost_try <= 1e-15 * cost[active])
        Z[:, acc] = Z_try[:, accept]
        res[:, acc] = res_try[:, accept]
        cost[acc] = cost_try[accept]
        lam[acc] = np.maximum(lam[acc] / 3.0, 1e-12)
        lam[active[~accept]] *= 10.0
        converged[active[stalled]] = True
        active = active[~stalled]
    return Z, ~converged


def am_fit(S_train, r: int, cfg: AmConfig, mean: CenteringShift | None = None,
           svd: SvdFactorization | None = None) -> tuple[AmState, QuadraticManifold]:
    """Alternate Procrustes, Xi and reduced-state updates until the objective settles.

    Initialization: V and What from the leading ``r + qbar`` left-singular
    vectors, ``Sr = V^T S`` and ``Xi`` from one Xi step. The tracked objective
    is ``1/2 ||S - [V, What][Sr; Xi h(Sr)]||^2 + gamma/2 ||Xi||^2``, which
    every block update can only decrease; iteration stops when its relative
    change drops to ``cfg.tol`` or after ``cfg.max_outer`` sweeps.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    S = as_data_matrix(S_train)
    if svd is None:
        svd = thin_svd(S)
    qbar = cfg.qbar
    if r + qbar > svd.rank:
        qbar = svd.rank - r
        if qbar < 1:
            raise ValueError(f"r = {r} leaves no room for correction directions")
        log.warning("qbar reduced to %d to fit the SVD rank %d", qbar, svd.rank)
    max_outer = cfg.max_outer if cfg.max_outer is not None else 15 * r

    V = svd.U[:, :r].copy()
    What = svd.U[:, r : r + qbar].copy()
    Sr = V.T @ S
    Xi = am_xi_step(S, Sr, V, What, cfg.gamma)
    state = AmState(V=V, What=What, Xi=Xi, Sr=Sr)
    obj, mis = _am_objective(S, V, What, Xi, Sr, cfg.gamma)
    state.objective_history.append(obj)
    state.misfit_history.append(mis)
    state.stop_reason = "max_outer"
    for it in range(1, max_outer + 1):
        V, What = am_procrustes_step(S, Sr, Xi, qbar)
        Xi = am_xi_step(S, Sr, V, What, cfg.gamma)
        Sr, unconverged = am_state_step(S, V, What, Xi, Sr, cfg.lm_max_evals, cfg.lm_gtol)
        new_obj, mis = _am_objective(S, V, What, Xi, Sr, cfg.gamma)
        state.objective_history.append(new_obj)
        state.misfit_history.append(mis)
        state.outer_iter = it
        state.unconverged_columns = int(unconverged.sum())
        if abs(obj - new_obj) <= cfg.tol * max(abs(obj), np.finfo(float).tiny):
            state.stop_reason = "tolerance"
            obj = new_obj
            break
        obj = new_obj
    state.V, state.What, state.Xi, state.Sr = V, What, Xi, Sr
    mani = QuadraticManifold(
        V=V,
        Wbar=What @ Xi,
        selected=(),
        mean=mean if mean is not None else zero_shift(S.shape[0]),
        gamma=float(cfg.gamma),
        feature=FeatureMapId.CondensedQuadratic,
        svd_rank=svd.rank,
        am_fitted=True,
        method="am",
    )
    return state, mani


def am_encode(mani: QuadraticManifold, X, Xi: np.ndarray | None = None, What: np.ndarray | None = None,
              lm_max_evals: int = 1600, Z0=None) -> np.ndarray:
    """Nonlinear AM encoder: reduced states minimizing the reconstruction error.

    Without the factors ``What``/``Xi`` the stored ``Wbar`` is factored through
    its range by an SVD, an equivalent orthonormal correction basis whenever
    ``Wbar`` columns are orthogonal to V (true for AM-fitted manifolds).
    """
    X = as_data_matrix(X)
    if What is None or Xi is None:
        Q, d, Pt = np.linalg.svd(mani.Wbar, full_matrices=False)
        keep = d > d[0] * max(mani.Wbar.shape) * np.finfo(float).eps if d.size and d[0] > 0 else d > 0
        What, Xi = Q[:, keep], d[keep, None] * Pt[keep]
    if Z0 is None:
        Z0 = mani.V.T @ X
    Z, _ = am_state_step(X, mani.V, What, Xi, Z0, lm_max_evals)
    return Z
