"""
Tests for linear algebra over GF(q).
"""

import numpy as np
import pytest

from fqlab.engine.errors import DimensionMismatch, ShapeMismatch
from fqlab.engine.fqlinalg import (
    FqMatrix,
    all_vectors,
    batch_rank,
    complete_basis,
    count_independent_tuples,
    independent_tuples,
    inverse,
    kernel_basis,
    projective_points,
    rank,
    rref,
    solve,
    subspace_batches,
)
from fqlab.engine.gf import build_field
from fqlab.engine.strata import gaussian_binomial


def _random_matrix(F, rows, cols, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    return FqMatrix(F, rng.integers(0, F.q, size=(rows, cols)))


class TestRank:
    """Rank and echelon forms."""

    def test_examples(self, gf2, gf3):
        assert rank(FqMatrix.from_rows(gf2, [[1, 1], [1, 1]])) == 1
        assert rank(FqMatrix.identity(gf3, 4)) == 4
        assert rank(FqMatrix.zeros(gf2, 3, 2)) == 0
        # over GF(2) the three nonzero vectors of a plane have rank 2
        assert rank(FqMatrix.from_rows(gf2, [[1, 0], [0, 1], [1, 1]])) == 2

    def test_rank_depends_on_characteristic(self, gf2, gf3):
        rows = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
        assert rank(FqMatrix.from_rows(gf2, rows)) == 2
        assert rank(FqMatrix.from_rows(gf3, rows)) == 3

    def test_rref_is_deterministic(self, gf3):
        M = _random_matrix(gf3, 4, 5, seed=3)
        R1, p1 = rref(gf3, M.entries)
        R2, p2 = rref(gf3, M.entries)
        assert p1 == p2
        assert np.array_equal(R1, R2)
        for row, pc in enumerate(p1):
            assert R1[row, pc] == 1
            assert np.count_nonzero(R1[:, pc]) == 1

    def test_bad_shape(self, gf2):
        with pytest.raises(ShapeMismatch):
            FqMatrix(gf2, np.zeros(3, dtype=np.int64))
        with pytest.raises(ShapeMismatch):
            FqMatrix(gf2, [[0, 2]])


class TestKernelAndSolve:
    """Kernels, solving and inversion."""

    def test_kernel_examples(self, gf2):
        basis = kernel_basis(FqMatrix.from_rows(gf2, [[1, 1]]))
        assert [v.tolist() for v in basis] == [[1, 1]]
        assert len(kernel_basis(FqMatrix.zeros(gf2, 2, 3))) == 3
        assert kernel_basis(FqMatrix.identity(gf2, 3)) == []

    @pytest.mark.parametrize("p,m", [(2, 1), (3, 1), (2, 2)])
    def test_kernel_vectors_are_annihilated(self, p, m):
        F = build_field(p, m)
        for seed in range(5):
            M = _random_matrix(F, 3, 5, seed)
            basis = kernel_basis(M)
            assert len(basis) == M.cols - rank(M)
            for v in basis:
                assert not M.matvec(v).any()

    def test_solve_examples(self, gf2):
        M = FqMatrix.from_rows(gf2, [[1, 1], [0, 0]])
        assert solve(M, [1, 0]).tolist() == [1, 0]
        assert solve(FqMatrix.zeros(gf2, 2, 2), [1, 0]) is None

    def test_solve_random_consistent_systems(self, gf3):
        for seed in range(5):
            M = _random_matrix(gf3, 4, 3, seed)
            x0 = np.array([seed % 3, 1, 2], dtype=np.int64)
            y = M.matvec(x0)
            x = solve(M, y)
            assert x is not None
            assert np.array_equal(M.matvec(x), y)

    def test_solve_dimension_mismatch(self, gf2):
        with pytest.raises(DimensionMismatch):
            solve(FqMatrix.identity(gf2, 2), [1, 0, 1])

    def test_inverse(self, gf4):
        M = FqMatrix.from_rows(gf4, [[2, 1], [1, 1]])
        inv = inverse(M)
        assert inv is not None
        assert M @ inv == FqMatrix.identity(gf4, 2)
        assert inverse(FqMatrix.from_rows(gf4, [[2, 2], [2, 2]])) is None

    def test_complete_basis(self, gf2):
        full = complete_basis(gf2, np.array([[1, 1, 0]]), 3)
        assert full.shape == (3, 3)
        assert full[0].tolist() == [1, 1, 0]
        assert rank(FqMatrix(gf2, full)) == 3


class TestBatchRank:
    """The packed GF(2^k) kernel agrees with the generic one."""

    @pytest.mark.parametrize("p,m,shape", [(2, 1, (5, 4)), (2, 1, (6, 7)), (2, 3, (4, 5)), (2, 2, (3, 3))])
    def test_packed_matches_generic(self, p, m, shape):
        F = build_field(p, m)
        rng = np.random.Generator(np.random.PCG64(2024))
        mats = rng.integers(0, F.q, size=(10_000,) + shape)
        # sparse rows push ranks below full
        mats[::3, 0] = 0
        mats[::5, :, 1] = 0
        packed = batch_rank(F, mats, kernel="packed")
        generic = batch_rank(F, mats, kernel="generic")
        assert np.array_equal(packed, generic)

    @pytest.mark.parametrize(
        "m,shape",
        [(1, (64, 64)), (1, (20, 70)), (2, (70, 20)), (2, (32, 30)), (4, (16, 16))],
    )
    def test_packed_at_word_width(self, m, shape):
        # rows or columns fill the whole 64-bit word
        F = build_field(2, m)
        rng = np.random.Generator(np.random.PCG64(64 + m))
        mats = rng.integers(0, F.q, size=(300,) + shape)
        mats[::3, : shape[0] // 2] = 0
        mats[1::4, :, -1] = 0
        mats[2::7] = mats[2::7, :1]
        packed = batch_rank(F, mats, kernel="packed")
        generic = batch_rank(F, mats, kernel="generic")
        assert np.array_equal(packed, generic)

    def test_batch_matches_single(self, gf3):
        rng = np.random.Generator(np.random.PCG64(5))
        mats = rng.integers(0, 3, size=(50, 3, 4))
        ranks = batch_rank(gf3, mats)
        for M, r in zip(mats, ranks):
            assert rank(FqMatrix(gf3, M)) == r

    def test_packed_rejects_odd_characteristic(self, gf3):
        with pytest.raises(ShapeMismatch):
            batch_rank(gf3, np.zeros((1, 2, 2), dtype=np.int64), kernel="packed")


class TestEnumeration:
    """Subspaces, independent tuples and projective points."""

    @pytest.mark.parametrize("q", [2, 3])
    def test_subspace_counts(self, q):
        F = build_field(q)
        for n in range(5):
            for c in range(n + 1):
                batch = subspace_batches(F, n, c)
                assert batch.shape[0] == gaussian_binomial(c, n, q)

    def test_subspaces_are_distinct(self, gf2):
        batch = subspace_batches(gf2, 4, 2)
        spans = set()
        for B in batch:
            coeffs = all_vectors(gf2, 2)
            span = frozenset(tuple(gf2.vsum(gf2.vmul(c[:, None], B), axis=0).tolist()) for c in coeffs)
            spans.add(span)
        assert len(spans) == batch.shape[0] == 35

    def test_independent_tuples(self, gf2, gf3):
        assert independent_tuples(gf2, 3, 2).shape == (count_independent_tuples(2, 3, 2), 2, 3)
        assert count_independent_tuples(2, 3, 2) == 42
        assert count_independent_tuples(3, 2, 3) == 0
        assert independent_tuples(gf3, 2, 2).shape[0] == 48

    def test_projective_points(self, gf3):
        points = projective_points(gf3, 2)
        assert points.tolist() == [[1, 0], [1, 1], [1, 2], [0, 1]]
        assert projective_points(build_field(2), 3).shape == (7, 3)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
