"""The fitted quadratic manifold and its QMN1 file format.

QMN1 layout (all little-endian)::

    b"QMANIF1\\0"
    u64 n, u64 r, u64 p, u64 l (SVD rank used)
    f64 gamma
    u8  feature id (1 = condensed quadratic; bit 0x80 set = AM-fitted)
    u64 count, then count x u64 selected indices (1-based)
    f64[n] mean, f64[n*r] V, f64[n*p] Wbar   (column-major)

An AM-fitted manifold has an empty selected-index list, and its linear
encoder only approximates the nonlinear encoder it was trained with.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .features import FeatureMapId, feature_dim
from .matrixio import (
    BadMagicError,
    CenteringShift,
    NonFiniteError,
    TruncatedError,
)

MANIFOLD_MAGIC = b"QMANIF1\x00"
AM_FLAG = 0x80
_HEAD = struct.Struct("<8sQQQQdB")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True, eq=False)
class QuadraticManifold:
    """Decoder ``z -> V z + Wbar h(z)`` plus the training shift it was fitted under."""

    V: np.ndarray
    Wbar: np.ndarray
    selected: tuple[int, ...]
    mean: CenteringShift
    gamma: float
    feature: FeatureMapId = FeatureMapId.CondensedQuadratic
    svd_rank: int = 0
    am_fitted: bool = False
    method: str = field(default="", compare=False)

    def __post_init__(self):
        n, r = self.V.shape
        if self.Wbar.shape != (n, feature_dim(r, self.feature)):
            raise ValueError(f"Wbar shape {self.Wbar.shape} does not match V {self.V.shape}")
        if len(self.mean) != n:
            raise ValueError("mean length differs from state dimension")

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[1]

    @property
    def p(self) -> int:
        return self.Wbar.shape[1]


def write_manifold(mani: QuadraticManifold, path) -> None:
    feature_byte = int(mani.feature) | (AM_FLAG if mani.am_fitted else 0)
    with open(path, "wb") as fh:
        fh.write(
            _HEAD.pack(
                MANIFOLD_MAGIC, mani.n, mani.r, mani.p, mani.svd_rank, float(mani.gamma), feature_byte
            )
        )
        fh.write(_U64.pack(len(mani.selected)))
        fh.write(np.asarray(mani.selected, dtype="<u8").tobytes())
        for a in (mani.mean.mean, mani.V, mani.Wbar):
            fh.write(np.asarray(a, dtype="<f8").tobytes(order="F"))


def read_manifold(path) -> QuadraticManifold:
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size + _U64.size:
        raise TruncatedError(f"{path}: manifold header truncated")
    magic, n, r, p, ell, gamma, feature_byte = _HEAD.unpack_from(data, 0)
    if magic != MANIFOLD_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    feature = FeatureMapId(feature_byte & ~AM_FLAG)
    if p != feature_dim(r, feature):
        raise ValueError(f"{path}: p = {p} inconsistent with r = {r}")
    pos = _HEAD.size
    (count,) = _U64.unpack_from(data, pos)
    pos += _U64.size
    need = pos + 8 * count + 8 * (n + n * r + n * p)
    if len(data) < need:
        raise TruncatedError(f"{path}: manifold payload truncated")
    selected = tuple(int(j) for j in np.frombuffer(data, dtype="<u8", count=count, offset=pos))
    pos += 8 * count

    def take(size, shape):
        nonlocal pos
        a = np.frombuffer(data, dtype="<f8", count=size, offset=pos).astype(np.float64)
        pos += 8 * size
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{path}: non-finite value in manifold")
        return a.reshape(shape, order="F")

    mean = take(n, (n,))
    V = take(n * r, (n, r))
    Wbar = take(n * p, (n, p))
    return QuadraticManifold(
        V=V,
        Wbar=Wbar,
        selected=selected,
        mean=CenteringShift(mean),
        gamma=gamma,
        feature=feature,
        svd_rank=ell,
        am_fitted=bool(feature_byte & AM_FLAG),
        method="am" if feature_byte & AM_FLAG else "",
    )
