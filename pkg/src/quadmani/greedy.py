"""Greedy selection of left-singular vectors for a quadratic manifold.

At every iteration each candidate singular vector is scored by the best
achievable regularized reconstruction objective when it is appended to the
basis. The score is computed in the coordinates of the SVD, so the least
squares problems have (l - i) right-hand sides instead of n.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoders import decode, encode_linear
from .features import FeatureMapId, quad_features
from .manifold import QuadraticManifold
from .matrixio import CenteringShift, as_data_matrix, zero_shift
from .ridge import RidgeProblem, ridge_solve
from .svdcore import IndexSets, SvdFactorization, residual_factors, thin_svd

log = logging.getLogger(__name__)

DEFAULT_GAMMA_GRID = tuple(10.0**e for e in range(-8, -1))


@dataclass(frozen=True)
class GreedyConfig:
    r: int
    m: int | None = None  # default 10 * r
    grow_window: bool = True
    gamma: float = 1e-8
    tie_tolerance: float = 1e-12
    svd_rank: int | None = None
    dense: bool = False  # score with explicit n-row residuals instead of SVD coordinates
    threads: int = 1

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.grow_window and self.window(1) < self.r:
            raise ValueError(f"candidate window m = {self.window(1)} is smaller than r = {self.r}")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def base_window(self) -> int:
        return self.m if self.m is not None else 10 * self.r

    def window(self, i: int) -> int:
        return self.base_window + i if self.grow_window else self.base_window


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    chosen: int
    objective: float
    candidates: int


@dataclass
class GreedyTrace:
    records: list[TraceRecord] = field(default_factory=list)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([rec.objective for rec in self.records])

    @property
    def chosen(self) -> list[int]:
        return [rec.chosen for rec in self.records]

    def rows(self):
        for rec in self.records:
            yield rec.iteration, rec.chosen, rec.objective, rec.candidates


def candidate_objective(svd: SvdFactorization, idx: IndexSets, j: int, gamma: float) -> float:
    """Minimal objective over the weights when ``u_j`` joins the selected basis.

    Equals the n-row objective whenever the SVD is complete (rank min(n, k)):
    the optimal weights lie in the span of the unselected left-singular
    vectors, whose basis has orthonormal columns. For a truncated SVD the
    value omits the discarded tail and only approximates it.
    """
    out, in_ = residual_factors(svd, idx, j)
    _, obj = ridge_solve(RidgeProblem(quad_features(in_), out, gamma))
    return obj


def dense_candidate_objective(
    S: np.ndarray, svd: SvdFactorization, idx: IndexSets, j: int, gamma: float
) -> float:
    """The same objective with explicit n-row residual targets; valid for any n, k."""
    if j in idx.selected:
        raise ValueError(f"candidate index {j} is already selected")
    V = svd.U[:, [q - 1 for q in idx.selected + (j,)]]
    Zr = V.T @ S
    R = S - V @ Zr
    _, obj = ridge_solve(RidgeProblem(quad_features(Zr), R, gamma))
    return obj


def _argmin(cands: Sequence[int], objs: Sequence[float], tie_tol: float) -> tuple[int, float]:
    best_j, best = cands[0], objs[0]
    for j, obj in zip(cands[1:], objs[1:]):
        if obj < best - tie_tol * (1.0 + abs(best)):
            best_j, best = j, obj
    return best_j, best


def greedy_fit(
    S_train,
    cfg: GreedyConfig,
    mean: CenteringShift | None = None,
    svd: SvdFactorization | None = None,
) -> tuple[QuadraticManifold, GreedyTrace]:
    """Fit a quadratic manifold by greedy basis selection.

    ``S_train`` must already be centered; ``mean`` is stored on the manifold
    so test data can be shifted the same way (zero shift if omitted).
    """
    S = as_data_matrix(S_train)
    n, k = S.shape
    if svd is None:
        svd = thin_svd(S, cfg.svd_rank)
    ell = svd.rank
    if cfg.r > ell:
        raise ValueError(f"r = {cfg.r} exceeds the SVD rank {ell}")
    dense = cfg.dense
    if not dense and ell < min(n, k):
        log.warning("truncated SVD (rank %d < %d): candidate scores omit the residual tail", ell, min(n, k))

    if dense:
        score: Callable[[IndexSets, int], float] = lambda idx, j: dense_candidate_objective(
            S, svd, idx, j, cfg.gamma
        )
    else:
        score = lambda idx, j: candidate_objective(svd, idx, j, cfg.gamma)

    idx = IndexSets.empty(ell)
    trace = GreedyTrace()
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for i in range(1, cfg.r + 1):
            window = min(cfg.window(i), ell)
            cands = [j for j in range(1, window + 1) if j not in idx.selected]
            if not cands:
                raise ValueError(f"candidate window {window} exhausted at iteration {i}")
            if pool is None:
                objs = [score(idx, j) for j in cands]
            else:
                objs = list(pool.map(lambda j: score(idx, j), cands))
            if not all(np.isfinite(objs)):
                raise FloatingPointError(f"non-finite candidate objective at iteration {i}")
            j, obj = _argmin(cands, objs, cfg.tie_tolerance)
            idx = idx.add(j)
            trace.records.append(TraceRecord(i, j, obj, len(cands)))
            log.debug("greedy iteration %d: chose %d, objective %.6e", i, j, obj)
    finally:
        if pool is not None:
            pool.shutdown()

    mani = _final_fit(S, svd, idx, cfg.gamma, dense, mean)
    return mani, trace


def _final_fit(S, svd, idx, gamma, dense, mean) -> QuadraticManifold:
    sel = list(idx.selected)
    V = svd.U[:, [q - 1 for q in sel]].copy()
    complete = svd.rank == min(S.shape)
    if dense or not complete:
        Zr = V.T @ S
        Wbar, _ = ridge_solve(RidgeProblem(quad_features(Zr), S - V @ Zr, gamma))
    else:
        # residual S - V V^T S = U_out Sigma_out V_out^T exactly; lift the reduced weights
        out_rows = np.array(idx.complement, dtype=np.intp) - 1
        in_rows = np.array(sel, dtype=np.intp) - 1
        A = svd.sigma_vt
        Wp, _ = ridge_solve(RidgeProblem(quad_features(A[in_rows]), A[out_rows], gamma))
        Wbar = svd.U[:, out_rows] @ Wp
    return QuadraticManifold(
        V=V,
        Wbar=Wbar,
        selected=tuple(sel),
        mean=mean if mean is not None else zero_shift(S.shape[0]),
        gamma=float(gamma),
        feature=FeatureMapId.CondensedQuadratic,
        svd_rank=svd.rank,
        method="greedy",
    )


def validation_objective(mani: QuadraticManifold, S_val) -> float:
    """Regularized least-squares objective of the fitted weights on held-out data."""
    S_val = as_data_matrix(S_val)
    E = decode(mani, encode_linear(mani, S_val)) - S_val
    return float(np.vdot(E, E) + mani.gamma * np.vdot(mani.Wbar, mani.Wbar))


def score_gammas(
    fit: Callable[[float], QuadraticManifold], S_val, grid: Sequence[float]
) -> list[tuple[float, float]]:
    """Fit once per grid value and return ``(gamma, validation objective)`` pairs."""
    if len(grid) == 0:
        raise ValueError("gamma grid is empty")
    return [(float(g), validation_objective(fit(float(g)), S_val)) for g in grid]


def pick_gamma(scores: Sequence[tuple[float, float]]) -> float:
    """Argmin of the validation objective; ties go to the larger gamma."""
    finite = [(g, s) for g, s in scores if np.isfinite(s)]
    if not finite:
        raise FloatingPointError("every gamma candidate produced a non-finite objective")
    best_g, best_s = finite[0]
    for g, s in finite[1:]:
        if s < best_s or (s == best_s and g > best_g):
            best_g, best_s = g, s
    return best_g


def select_gamma(S_train, S_val, cfg: GreedyConfig, grid: Sequence[float] = DEFAULT_GAMMA_GRID) -> float:
    """Choose gamma for the greedy fit by minimizing the validation objective."""
    S = as_data_matrix(S_train)
    svd = thin_svd(S, cfg.svd_rank)

    def fit(g):
        cfg_g = GreedyConfig(**{**cfg.__dict__, "gamma": g})
        return greedy_fit(S, cfg_g, svd=svd)[0]

    return pick_gamma(score_gammas(fit, S_val, grid))
