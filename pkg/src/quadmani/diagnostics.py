"""Error reports, the singular-value lower bound and correlation diagnostics."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .encoders import EncoderKind, GnConfig, decode, encode_gauss_newton, encode_linear
from .features import feature_dim, pair_labels, quad_features
from .manifold import QuadraticManifold
from .matrixio import as_data_matrix
from .svdcore import SvdFactorization, thin_svd


class UnsupportedManifoldError(ValueError):
    pass


@dataclass
class EvalReport:
    method: str
    encoder: str
    r: int
    gamma: float
    E_rel: float
    sq_error_sum: float
    lower_bound: float
    runtime_seconds: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return list(asdict(self).values())


def lower_bound(sigma, r: int, p: int) -> float:
    """Sum of squared singular values beyond index ``p + r``.

    No quadratic manifold of dimension r with p features can reconstruct the
    columns with a smaller total squared error, whatever the encoder.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    start = p + r
    if start >= sigma.shape[0]:
        return 0.0
    tail = sigma[start:]
    return float(np.dot(tail, tail))


def reconstruction(mani: QuadraticManifold, S, encoder: EncoderKind | str = EncoderKind.Linear,
                   gn: GnConfig | None = None) -> np.ndarray:
    if EncoderKind(encoder) is EncoderKind.Linear:
        Z = encode_linear(mani, S)
    else:
        Z = encode_gauss_newton(mani, S, gn)[0]
    return decode(mani, Z)


def relative_error(
    mani: QuadraticManifold,
    encoder: EncoderKind | str,
    S_test,
    gn: GnConfig | None = None,
    sigma=None,
    Z=None,
) -> EvalReport:
    """Relative Frobenius reconstruction error of ``S_test`` (already shifted).

    ``Z`` overrides the encoder with precomputed reduced states (AM encoder).
    ``sigma`` are the singular values used for the lower bound; computed from
    ``S_test`` when omitted.
    """
    S = as_data_matrix(S_test)
    norm = float(np.linalg.norm(S))
    if norm == 0.0:
        raise ValueError("test matrix has zero Frobenius norm")
    t0 = time.perf_counter()
    if Z is not None:
        Shat = decode(mani, Z)
        enc_name = str(encoder if isinstance(encoder, str) else encoder.value)
    else:
        enc = EncoderKind(encoder)
        Shat = reconstruction(mani, S, enc, gn)
        enc_name = enc.value
    elapsed = time.perf_counter() - t0
    sq = float(np.sum((Shat - S) ** 2))
    if sigma is None:
        sigma = np.linalg.svd(S, compute_uv=False)
    return EvalReport(
        method=mani.method or ("am" if mani.am_fitted else "greedy"),
        encoder=enc_name,
        r=mani.r,
        gamma=mani.gamma,
        E_rel=float(np.sqrt(sq) / norm),
        sq_error_sum=sq,
        lower_bound=lower_bound(sigma, mani.r, mani.p),
        runtime_seconds=elapsed,
    )


@dataclass
class CorrelationReport:
    """Correlations between unselected coordinates (rows) and lifted features (cols)."""

    Ctilde: np.ndarray  # literal normalization: centered numerator, uncentered row norms
    pearson: np.ndarray  # fully centered variant
    row_index: list[int]  # 1-based singular-vector index of each row
    col_labels: list[str]
    zero_rows: np.ndarray  # rows whose coordinates have no variance or no norm
    zero_cols: np.ndarray

    def mean_abs(self, rows: slice | None = None, pearson: bool = False) -> float:
        C = self.pearson if pearson else self.Ctilde
        return float(np.mean(np.abs(C[rows if rows is not None else slice(None)])))


def correlation_matrix(mani: QuadraticManifold, S, svd: SvdFactorization | None = None,
                       row_cap: int | None = None) -> CorrelationReport:
    """Correlation of ``h(V^T S)`` rows with coordinates on unselected singular vectors.

    ``S`` is the (centered) training matrix the manifold was fitted on; rows
    follow the unselected singular-vector indices in ascending order and are
    capped at ``row_cap`` (default p).
    """
    if mani.am_fitted or not mani.selected:
        raise UnsupportedManifoldError("correlation report needs selected singular-vector indices")
    S = as_data_matrix(S)
    if svd is None:
        svd = thin_svd(S)
    chosen = set(mani.selected)
    rows = [q for q in range(1, svd.rank + 1) if q not in chosen]
    if row_cap is None:
        row_cap = mani.p
    rows = rows[:row_cap]
    Y = svd.sigma_vt[np.array(rows, dtype=np.intp) - 1] if rows else np.zeros((0, S.shape[1]))
    F = quad_features(svd.sigma_vt[np.array(mani.selected, dtype=np.intp) - 1])

    Yc = Y - Y.mean(axis=1, keepdims=True)
    Fc = F - F.mean(axis=1, keepdims=True)
    num = Yc @ Fc.T
    C = _safe_ratio(num, np.linalg.norm(Y, axis=1), np.linalg.norm(F, axis=1))
    P = _safe_ratio(num, np.linalg.norm(Yc, axis=1), np.linalg.norm(Fc, axis=1))
    tiny_y = np.linalg.norm(Yc, axis=1) <= _tiny(Y)
    tiny_f = np.linalg.norm(Fc, axis=1) <= _tiny(F)
    # no variance means no correlation; rounding noise would otherwise leak through
    for M in (C, P):
        M[tiny_y] = 0.0
        M[:, tiny_f] = 0.0
    return CorrelationReport(
        Ctilde=C,
        pearson=P,
        row_index=rows,
        col_labels=pair_labels(mani.r),
        zero_rows=tiny_y,
        zero_cols=tiny_f,
    )


def _tiny(A: np.ndarray) -> float:
    scale = float(np.abs(A).max()) if A.size else 0.0
    return 1e-13 * scale * np.sqrt(max(A.shape[1], 1)) if A.ndim == 2 else 0.0


def _safe_ratio(num: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    den = np.outer(a, b)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    # Cauchy-Schwarz bounds the exact value by 1; trim rounding overshoot
    return np.clip(out, -1.0, 1.0)


def singular_value_report(svd_or_sigma) -> list[tuple[int, float, float]]:
    """Rows ``(index, sigma, cumulative energy)`` with energy = running sum of sigma^2."""
    sigma = getattr(svd_or_sigma, "sigma", svd_or_sigma)
    sigma = np.asarray(sigma, dtype=np.float64)
    energy = np.cumsum(sigma**2)
    return [(i + 1, float(s), float(e)) for i, (s, e) in enumerate(zip(sigma, energy))]
