import numpy as np
import pytest

from oracles.frozen import PROJ_12x8_SEL146
from quadmani.matrixio import NonFiniteError
from quadmani.svdcore import IndexSets, residual_factors, thin_svd

from conftest import seeded


def test_small_examples():
    assert np.allclose(thin_svd(np.eye(2)).sigma, [1.0, 1.0])
    s = thin_svd(np.ones((2, 2))).sigma
    assert abs(s[0] - 2.0) < 1e-14 and abs(s[1]) < 1e-14
    assert s.shape == (2,)


def test_invariants(rng):
    for shape in [(30, 20), (20, 30), (5, 5)]:
        S = rng.standard_normal(shape)
        f = thin_svd(S)
        ell = min(shape)
        assert f.rank == ell
        assert np.allclose(f.U.T @ f.U, np.eye(ell), atol=1e-10)
        assert np.allclose(f.Vt @ f.Vt.T, np.eye(ell), atol=1e-10)
        assert np.all(np.diff(f.sigma) <= 0)
        assert np.linalg.norm(f.U * f.sigma @ f.Vt - S) <= 1e-10 * np.linalg.norm(S)


def test_truncation_and_bad_rank(rng):
    S = rng.standard_normal((10, 8))
    assert thin_svd(S, 3).U.shape == (10, 3)
    with pytest.raises(ValueError):
        thin_svd(S, 9)
    with pytest.raises(NonFiniteError):
        thin_svd(np.array([[np.nan]]))


def test_index_sets():
    idx = IndexSets.empty(5).add(3).add(1)
    assert idx.selected == (3, 1)
    assert idx.complement == (2, 4, 5)
    with pytest.raises(ValueError):
        idx.add(3)
    with pytest.raises(ValueError):
        idx.add(6)


def test_residual_factor_rows():
    S = seeded(1, 6, 3)
    f = thin_svd(S)
    out, in_ = residual_factors(f, IndexSets.empty(3), 1)
    assert np.array_equal(out, f.sigma_vt[[1, 2]])
    assert np.array_equal(in_, f.sigma_vt[[0]])
    out, in_ = residual_factors(f, IndexSets((3,), 3), 1)
    assert np.array_equal(in_, f.sigma_vt[[2, 0]])  # selection order, candidate last
    out, _ = residual_factors(f, IndexSets((1, 2), 3), 3)
    assert out.shape == (0, 3) and np.linalg.norm(out) == 0.0
    with pytest.raises(ValueError):
        residual_factors(f, IndexSets((1,), 3), 1)
    with pytest.raises(ValueError):
        residual_factors(f, IndexSets((1,), 3), 4)


def test_residual_matches_explicit_projection():
    S = seeded(103, 12, 8)
    f = thin_svd(S)
    out, _ = residual_factors(f, IndexSets((1, 4), 8), 6)
    assert abs(np.linalg.norm(out) - PROJ_12x8_SEL146) <= 1e-9 * PROJ_12x8_SEL146


def test_pythagoras(rng):
    for _ in range(20):
        S = rng.standard_normal(tuple(rng.integers(3, 15, size=2)))
        f = thin_svd(S)
        sel = tuple(int(j) + 1 for j in rng.permutation(f.rank)[: rng.integers(0, f.rank)])
        j = next(q for q in range(1, f.rank + 1) if q not in sel)
        out, in_ = residual_factors(f, IndexSets(sel, f.rank), j)
        total = np.sum(f.sigma**2)
        assert abs(np.sum(out**2) + np.sum(in_**2) - total) <= 1e-10 * total


class _NoU:
    """Stand-in factorization whose U raises on access."""

    def __init__(self, f):
        self._f = f

    @property
    def U(self):
        raise AssertionError("U touched")

    def __getattr__(self, name):
        return getattr(self._f, name)


def test_candidate_loop_never_reads_u(rng):
    from quadmani.greedy import candidate_objective

    f = _NoU(thin_svd(rng.standard_normal((20, 12))))
    residual_factors(f, IndexSets((2,), 12), 5)
    candidate_objective(f, IndexSets((2,), 12), 5, 1e-8)
