"""Condensed quadratic feature map and its Jacobian.

Features are the unique products ``z_a * z_b`` with ``a <= b``, in row-major
upper-triangular order: (1,1), (1,2), ..., (1,r), (2,2), ..., (r,r).
"""

from __future__ import annotations

import enum
from functools import lru_cache

import numpy as np


class FeatureMapId(enum.IntEnum):
    CondensedQuadratic = 1


def feature_dim(r: int, feature: FeatureMapId = FeatureMapId.CondensedQuadratic) -> int:
    if feature is not FeatureMapId.CondensedQuadratic:
        raise ValueError(f"unsupported feature map {feature!r}")
    return r * (r + 1) // 2


@lru_cache(maxsize=256)
def pair_indices(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (a, b) of the feature rows, 0-based."""
    a, b = np.triu_indices(r)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def pair_labels(r: int) -> list[str]:
    a, b = pair_indices(r)
    return [f"z{i + 1}z{j + 1}" for i, j in zip(a, b)]


def quad_features(Z) -> np.ndarray:
    """Evaluate the feature map column-wise; ``Z`` is r x k (or a length-r vector)."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        return quad_features(Z[:, None])[:, 0]
    if Z.ndim != 2 or Z.shape[0] < 1:
        raise ValueError(f"expected an r x k matrix with r >= 1, got shape {Z.shape}")
    a, b = pair_indices(Z.shape[0])
    return Z[a] * Z[b]


def quad_jacobian(z) -> np.ndarray:
    """Jacobian of the feature map at a single point ``z``, shape p x r."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 1:
        raise ValueError(f"expected a length-r vector, got shape {z.shape}")
    return quad_jacobian_batch(z[:, None])[0]


def quad_jacobian_batch(Z) -> np.ndarray:
    """Jacobians for every column of ``Z`` (r x k), returned as k x p x r."""
    Z = np.asarray(Z, dtype=np.float64)
    r, k = Z.shape
    a, b = pair_indices(r)
    p = a.shape[0]
    rows = np.arange(p)
    J = np.zeros((k, p, r))
    # d(z_a z_b)/dz_c = z_b [a == c] + z_a [b == c]
    J[:, rows, a] += Z[b].T
    J[:, rows, b] += Z[a].T
    return J
