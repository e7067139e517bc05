"""Thin SVD of a training matrix and the index-set bookkeeping of the greedy loop.

Index sets use 1-based singular-vector indices so they line up with the
ordering sigma_1 >= sigma_2 >= ... used in reports and manifold files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .matrixio import as_data_matrix


class SvdError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SvdFactorization:
    U: np.ndarray  # n x l
    sigma: np.ndarray  # l
    Vt: np.ndarray  # l x k
    _sigma_vt: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_sigma_vt", self.sigma[:, None] * self.Vt)

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.Vt.shape[1]

    @property
    def sigma_vt(self) -> np.ndarray:
        """Rows sigma_q * v_q^T, i.e. the coordinates U^T S."""
        return self._sigma_vt


def thin_svd(S, rank: int | None = None) -> SvdFactorization:
    """Thin SVD of ``S`` truncated to ``rank`` triplets (default ``min(n, k)``).

    Zero singular values are kept so that indices match 1..min(n, k).
    """
    S = as_data_matrix(S)
    full = min(S.shape)
    if rank is None:
        rank = full
    if not 1 <= rank <= full:
        raise ValueError(f"rank must be in [1, {full}], got {rank}")
    try:
        U, s, Vt = scipy.linalg.svd(S, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        try:
            U, s, Vt = scipy.linalg.svd(S, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SvdError(f"SVD failed: {exc}") from exc
    return SvdFactorization(U[:, :rank].copy(), s[:rank].copy(), Vt[:rank].copy())


@dataclass(frozen=True)
class IndexSets:
    selected: tuple[int, ...]
    size: int

    def __post_init__(self):
        sel = self.selected
        if len(set(sel)) != len(sel):
            raise ValueError(f"selected indices not distinct: {sel}")
        if any(j < 1 or j > self.size for j in sel):
            raise ValueError(f"selected indices must lie in [1, {self.size}]: {sel}")

    @classmethod
    def empty(cls, size: int) -> "IndexSets":
        return cls((), size)

    @property
    def complement(self) -> tuple[int, ...]:
        chosen = set(self.selected)
        return tuple(q for q in range(1, self.size + 1) if q not in chosen)

    def add(self, j: int) -> "IndexSets":
        return IndexSets(self.selected + (j,), self.size)


def residual_factors(svd: SvdFactorization, idx: IndexSets, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the coordinates U^T S into the part left out of and kept in the basis.

    Returns ``(out, in_)``: ``out`` stacks sigma_q v_q^T for the complement of
    ``idx.selected + (j,)`` in ascending q; ``in_`` stacks the rows of the
    selected indices in selection order with ``j`` last. ``out`` are the
    coordinates of ``S - P S`` in the basis U and ``in_`` the encoded data.
    Only sigma and Vt are touched.
    """
    if idx.size != svd.rank:
        raise ValueError(f"index sets sized for {idx.size}, factorization has rank {svd.rank}")
    if not 1 <= j <= svd.rank:
        raise ValueError(f"candidate index {j} outside [1, {svd.rank}]")
    if j in idx.selected:
        raise ValueError(f"candidate index {j} is already selected")
    keep = np.array(idx.selected + (j,), dtype=np.intp) - 1
    mask = np.ones(svd.rank, dtype=bool)
    mask[keep] = False
    A = svd.sigma_vt
    return A[mask], A[keep]
