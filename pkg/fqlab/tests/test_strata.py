"""
Tests for rank strata, geometric rank, bias and the counting bounds.
"""

from fractions import Fraction
from math import comb

import numpy as np
import pytest

from fqlab.engine.errors import BadConstants, BadRange, BudgetExceeded, EmptyInput, OrderUnsupported
from fqlab.engine.fqlinalg import rank
from fqlab.engine.gf import build_field
from fqlab.engine.strata import (
    ar_stability_ratio,
    bias_and_ar,
    codim_from_z_growth,
    codim_witness,
    estimate_dim,
    finite_field_gr_bound,
    gaussian_binomial,
    geometric_rank,
    gr_upper_via_counting,
    infinite_field_gr_bound,
    inner_degree,
    low_rank_covering,
    rank_strata,
    section_avoids_locus,
    section_degree_bound,
    strata_work,
    z_count,
)
from fqlab.engine.tensor import direct_sum, family, flatten, permute_modes, zero


class TestRankStrata:
    """Exact stratum counts."""

    def test_w(self, w_tensor):
        assert rank_strata(w_tensor, 1) == {0: 1, 1: 1, 2: 2}
        assert rank_strata(w_tensor, 2) == {0: 1, 1: 3, 2: 12}
        assert rank_strata(w_tensor, 3) == {0: 1, 1: 7, 2: 56}

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_identity_binomials(self, gf2, n):
        counts = rank_strata(family("identity", gf2, r=n), 1)
        assert counts == {c: comb(n, c) for c in range(n + 1)}

    def test_zero(self, gf3):
        assert rank_strata(zero(gf3, [2, 2, 2]), 2) == {0: 81}

    def test_order_and_budget(self, gf2, w_tensor):
        with pytest.raises(OrderUnsupported):
            rank_strata(family("W", gf2, d=4), 1)
        with pytest.raises(BudgetExceeded) as exc:
            rank_strata(w_tensor, 3, budget=10)
        assert exc.value.required == 64


class TestEstimateDim:
    """Dimension from point counts."""

    def test_w_generic_stratum(self):
        est = estimate_dim((2, 12, 56), 2, 2)
        assert est.dim == 2
        assert est.certain

    def test_empty(self):
        est = estimate_dim((0, 0, 0), 2, 3)
        assert est.empty
        assert est.codim == 3
        assert est.certain

    def test_linear_subspace(self):
        est = estimate_dim((2, 4, 8), 2, 3)
        assert est.dim == 1
        assert est.certain

    def test_single_count_is_uncertain(self):
        est = estimate_dim((4,), 2, 3)
        assert not est.certain
        assert est.method == "single"

    def test_no_counts(self):
        with pytest.raises(EmptyInput):
            estimate_dim((), 2, 2)


class TestGeometricRank:
    """GR from strata."""

    def test_w(self, w_tensor):
        gr = geometric_rank(w_tensor, 3)
        assert gr.value == 2
        assert gr.certain
        value, certain, profile = gr
        assert profile.counts[1] == {0: 1, 1: 1, 2: 2}

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_identity_gf2(self, gf2, n):
        gr = geometric_rank(family("identity", gf2, r=n), 3)
        assert (gr.value, gr.certain) == (n, True)

    def test_zero(self, gf2):
        gr = geometric_rank(zero(gf2, [2, 2, 2]), 3)
        assert (gr.value, gr.certain) == (0, True)

    def test_matrix(self, gf3):
        M = family("random", gf3, dims=[3, 3], seed=0)
        assert geometric_rank(M).value == rank(flatten(M, [1]))

    def test_order_four_identity(self, gf2):
        gr = geometric_rank(family("identity", gf2, r=2, d=4), 2)
        assert (gr.value, gr.certain) == (2, True)

    def test_order_four_budget_checked_up_front(self, gf4):
        T = family("random", gf4, dims=[2, 2, 2, 2], seed=0)
        with pytest.raises(BudgetExceeded) as exc:
            geometric_rank(T, 3)
        assert exc.value.required == strata_work([2, 2, 2, 2], 4, 3)

    def test_strata_work(self):
        assert strata_work([2, 2, 2], 2, 3) == 4 + 16 + 64
        assert strata_work([2, 2, 2, 2], 2, 2) == 3 * 20 + 5 * 272
        assert strata_work([3, 3], 2, 3) == 0

    def test_inner_degree_stays_under_field_cap(self):
        assert inner_degree(4, 3) == 3
        assert inner_degree(256, 3) == 2
        assert inner_degree(4096, 3) == 1
        assert inner_degree(2 ** 16, 1) == 1

    @pytest.mark.slow
    def test_order_four_near_field_cap(self):
        # GF(256)^2 is the cap; the inner slices drop to K = 1 there
        gr = geometric_rank(family("identity", build_field(2, 8), r=1, d=4), 2)
        assert (gr.value, gr.certain) == (1, True)

    def test_order_one_rejected(self, gf2):
        with pytest.raises(OrderUnsupported):
            geometric_rank(family("identity", gf2, r=2, d=1))

    def test_permutation_invariance(self, gf3):
        T = family("random", gf3, dims=[2, 2, 2], seed=17)
        base = geometric_rank(T, 2).value
        for perm in ([1, 3, 2], [2, 1, 3], [3, 2, 1]):
            assert geometric_rank(permute_modes(T, perm), 2).value == base


class TestLinearSections:
    """Subspaces of covectors that avoid a rank locus."""

    def test_degree_bound(self):
        assert section_degree_bound(1, 3) == 4
        assert section_degree_bound(2, 2) == 3
        assert section_degree_bound(5, 1) == 1

    def test_avoids_locus(self, gf2):
        I3 = family("identity", gf2, r=3)
        assert section_avoids_locus(I3, np.array([[1, 0, 1], [0, 1, 1]]), 1)
        assert not section_avoids_locus(I3, np.array([[1, 0, 0], [0, 1, 0]]), 1)

    def test_identity_witnesses(self, gf2):
        I3 = family("identity", gf2, r=3)
        witness = codim_witness(I3, 1, 2)
        assert witness is not None
        assert witness.field.q == 2
        assert section_avoids_locus(I3, witness.basis, 1)
        # rank <= 1 is a union of coordinate axes, so no plane misses it
        assert codim_witness(I3, 1, 3) is None
        assert codim_witness(I3, 0, 3) is not None
        assert codim_witness(I3, 1, 4) is None

    def test_order_three_only(self, gf2):
        with pytest.raises(OrderUnsupported):
            codim_witness(family("identity", gf2, r=2, d=4), 1, 1)

    def test_conjugate_components_settle(self, gf2):
        # x^2 + x + 1 gives rank-1 slices only over GF(4), so counts alternate with k
        C = family("companion", gf2, poly=(1, 1))
        assert C.dims == (2, 2, 2)
        single = geometric_rank(C, 3)
        assert (single.value, single.certain) == (2, True)
        gr = geometric_rank(direct_sum(C, C), 3)
        assert (gr.value, gr.certain) == (4, True)
        assert any("linear sections" in note for note in gr.notes)


class TestBias:
    """Z-counting, bias and analytic rank."""

    def test_w(self, w_tensor):
        assert z_count(w_tensor) == 8
        bias = bias_and_ar(w_tensor)
        assert (bias.Z, bias.E) == (8, 4)
        assert bias.bias == Fraction(1, 2)
        assert bias.analytic_rank == 1.0

    @pytest.mark.parametrize("q", [2, 3])
    def test_identity(self, q):
        F = build_field(q)
        for n in range(1, 4):
            bias = bias_and_ar(family("identity", F, r=n))
            assert bias.Z == (2 * q - 1) ** n
            assert bias.E == 2 * n

    def test_scalar_one(self, gf2):
        I1 = family("identity", gf2, r=1)
        for k in (1, 2, 3):
            assert z_count(I1, k) == 2 * 2 ** k - 1

    def test_zero(self, gf3):
        bias = bias_and_ar(zero(gf3, [2, 2, 3]))
        assert bias.Z == 3 ** 5
        assert bias.bias == 1
        assert bias.analytic_rank == 0.0

    def test_z_growth_matches_gr(self, w_tensor):
        codim, certain = codim_from_z_growth(w_tensor, K=3)
        assert certain
        assert codim == geometric_rank(w_tensor, 3).value


class TestCountingBounds:
    """Diagnostic bounds and Gaussian binomials."""

    def test_gr_upper_examples(self, gf2, w_tensor):
        assert gr_upper_via_counting(w_tensor, 2, 2, 1.0, 1.0) == 3.0
        assert gr_upper_via_counting(w_tensor, 0, 4, 1.0, 1.0) == 0.0
        I2 = family("identity", gf2, r=2)
        assert gr_upper_via_counting(I2, 1, 2, 1.0, 1.0) == 2.0

    def test_bad_constants(self, w_tensor):
        with pytest.raises(BadConstants):
            gr_upper_via_counting(w_tensor, 1, 2, 0.0, 1.0)
        with pytest.raises(BadConstants):
            finite_field_gr_bound(1, 1.0, -1.0)

    def test_gaussian_binomial(self):
        assert gaussian_binomial(0, 5, 3) == 1
        assert gaussian_binomial(1, 2, 2) == 3
        assert gaussian_binomial(2, 4, 2) == 35
        with pytest.raises(BadRange):
            gaussian_binomial(3, 2, 2)
        with pytest.raises(BadRange):
            gaussian_binomial(1, 2, 1)

    def test_quadratic_bounds(self):
        assert infinite_field_gr_bound(1) == 5
        assert infinite_field_gr_bound(3) == 27
        assert finite_field_gr_bound(1, 1.0, 1.0) == Fraction(6)

    def test_stability_ratio(self):
        ratio = ar_stability_ratio(1.0, 2, 1.0, 1.0)
        assert ratio.lower_ok
        assert not ratio.upper_ok
        assert ratio.ratio == 2.0


class TestCovering:
    """Low-rank covering of the mode-3 covectors."""

    def test_w(self, w_tensor):
        report = low_rank_covering(w_tensor, 1)
        assert report.threshold == 3
        assert report.m == 3
        assert report.bound == Fraction(1)
        assert report.covers is True
        assert report.bound_holds

    def test_identity_four(self, gf2):
        report = low_rank_covering(family("identity", gf2, r=4), 1)
        assert report.m == 14
        assert report.bound == Fraction(5)
        assert report.covers is True

    def test_covering_over_extension(self, w_tensor):
        report = low_rank_covering(w_tensor, 1, k=2)
        assert report.m == 15
        assert report.covers is True


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
