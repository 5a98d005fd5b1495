"""
End-to-end checks of the inequality chain on small exhaustive ensembles.
"""

import itertools
import time

import numpy as np
import pytest

from fqlab.engine.errors import BudgetExceeded
from fqlab.engine.gf import build_field
from fqlab.engine.slicerank import partition_rank, slice_rank_exact, slice_rank_oracle, slice_rank_upper
from fqlab.engine.strata import bias_and_ar, geometric_rank, rank_strata
from fqlab.engine.subrank import (
    SubrankCertificate,
    SubrankOptions,
    check_certificate,
    greedy_diagonalize,
    kron_certificate,
    minrank_certificate,
    subrank_exhaustive,
    subrank_report,
)
from fqlab.engine.tensor import Covector, contract, direct_sum, family, kronecker, permute_modes
from fqlab.harness.experiments import settled_geometric_rank

PERMUTATIONS = [list(p) for p in itertools.permutations([1, 2, 3])]


def naive_z(T):
    """Count (u_2, ..., u_d) whose contraction with T vanishes, one tuple at a time."""
    q = T.field.q
    spaces = [itertools.product(range(q), repeat=n) for n in T.dims[1:]]
    total = 0
    for us in itertools.product(*spaces):
        covectors = [Covector(mode, u) for mode, u in enumerate(us, start=2)]
        if contract(T, covectors).is_zero():
            total += 1
    return total


def largest_subrank(T, rmax):
    best = 0
    for r in range(1, rmax + 1):
        if subrank_exhaustive(T, r).found:
            best = r
    return best


def greedy_certificate(T, c, seed):
    """The verified certificate a greedy run hands out, full or partial."""
    try:
        outcome = greedy_diagonalize(T, c, seed=seed)
    except BudgetExceeded as exc:
        return exc.partial
    return outcome if isinstance(outcome, SubrankCertificate) else outcome.partial


def best_certificate(T, rmax):
    for r in range(rmax, 0, -1):
        outcome = subrank_exhaustive(T, r)
        if outcome.found:
            return outcome.certificate
    return SubrankCertificate.empty(T.order)


def bias_case(seed):
    """A seeded random tensor small enough to enumerate every covector tuple."""
    rng = np.random.default_rng(seed)
    q = 2 if seed % 2 == 0 else 3
    cap = 10 if q == 2 else 6
    order = int(rng.integers(3, 5))
    dims = [int(n) for n in rng.integers(1, 4, size=order)]
    for i in range(1, order):
        while sum(dims[1:]) > cap and dims[i] > 1:
            dims[i] -= 1
    return family("random", build_field(q), dims=dims, seed=seed)


def random_pair(seed, high):
    rng = np.random.default_rng(seed)
    F = build_field(2)
    S = family("random", F, dims=rng.integers(1, high + 1, size=3).tolist(), seed=2 * seed)
    T = family("random", F, dims=rng.integers(1, high + 1, size=3).tolist(), seed=2 * seed + 1)
    return S, T


def assert_additive(S, T, max_K):
    results = [settled_geometric_rank(X, 3, max_K)[0] for X in (S, T, direct_sum(S, T))]
    assert all(gr.certain for gr in results), [(gr.value, gr.notes) for gr in results]
    gs, gt, gst = (gr.value for gr in results)
    assert gst == gs + gt


STRUCTURED = [
    ("identity", {"r": 3}, 3),
    ("W", {}, 2),
    ("companion", {}, 2),
    ("matmul", {}, 2),
    ("diagonal", {"values": [1, 1, 0]}, 2),
]


class TestBinaryCubeSweep:
    """All 256 tensors in GF(2)^{2x2x2}."""

    @pytest.fixture(scope="class")
    def sweep(self, all_2x2x2):
        rows = []
        for T in all_2x2x2:
            gr = geometric_rank(T, 3)
            rows.append((T, gr))
        return rows

    def test_gr_always_certain(self, sweep):
        assert all(gr.certain for _, gr in sweep)

    def test_subrank_below_gr(self, sweep):
        for T, gr in sweep:
            assert largest_subrank(T, 2) <= gr.value

    def test_gr_below_slice_rank(self, sweep):
        for T, gr in sweep:
            assert gr.value <= slice_rank_exact(T).value

    def test_gr_permutation_invariant(self, sweep):
        for T, gr in sweep:
            for perm in PERMUTATIONS[1:]:
                assert geometric_rank(permute_modes(T, perm), 3).value == gr.value

    def test_oracle_matches_exact(self, sweep):
        for T, _ in sweep:
            assert slice_rank_oracle(T).value == slice_rank_exact(T).value


class TestIdentities:
    """I_n has every rank equal to n."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_gf2(self, gf2, n):
        I = family("identity", gf2, r=n)
        gr = geometric_rank(I, 3)
        assert (gr.value, gr.certain) == (n, True)
        assert subrank_report(I, SubrankOptions(K=3), gr=gr).exact == n
        assert slice_rank_upper(I).value == n
        assert partition_rank(I, budget=30000, K=3).exact == n
        if n <= 3:
            assert slice_rank_exact(I).value == n

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_gf3(self, gf3, n):
        I = family("identity", gf3, r=n)
        gr = geometric_rank(I, 2)
        assert (gr.value, gr.certain) == (n, True)
        assert subrank_report(I, SubrankOptions(K=2), gr=gr).exact == n
        assert slice_rank_upper(I).value == n
        # n = 4 leaves the exact search budget, so the bounds meet at GR
        assert partition_rank(I, budget=30000, K=2).exact == n
        if n <= 3:
            assert slice_rank_exact(I).value == n

    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_bias(self, q, n):
        bias = bias_and_ar(family("identity", build_field(q), r=n))
        assert bias.Z == (2 * q - 1) ** n
        assert bias.E == 2 * n


class TestBiasAgainstEnumeration:
    """Exact Z against a direct count over all covector tuples."""

    @pytest.mark.parametrize(
        "q,dims,seed",
        [
            (2, [2, 2, 2], 1),
            (2, [2, 3, 2], 2),
            (2, [3, 2, 2], 3),
            (2, [2, 2, 2, 2], 4),
            (3, [2, 2, 2], 5),
            (3, [2, 1, 2], 6),
        ],
    )
    def test_random(self, q, dims, seed):
        T = family("random", build_field(q), dims=dims, seed=seed)
        assert bias_and_ar(T).Z == naive_z(T)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(100))
    def test_seeded_ensemble(self, seed):
        T = bias_case(seed)
        assert bias_and_ar(T).Z == naive_z(T)

    def test_w(self, w_tensor):
        assert bias_and_ar(w_tensor).Z == naive_z(w_tensor) == 8


class TestGeometricRankAdditivity:
    """GR(S ⊕ T) = GR(S) + GR(T), with every value certain."""

    @pytest.mark.parametrize("seed", range(10))
    def test_small_pairs(self, seed):
        S, T = random_pair(seed, 2)
        assert_additive(S, T, max_K=4)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_pairs_up_to_three(self, seed):
        S, T = random_pair(seed, 3)
        assert_additive(S, T, max_K=5)


@pytest.mark.slow
class TestCertificateSoundness:
    """Every certificate the searches hand out verifies: 1000 seeded runs."""

    @pytest.mark.parametrize("seed", range(200))
    def test_greedy_random(self, seed):
        F = build_field(2 if seed % 2 == 0 else 3)
        T = family("random", F, dims=[3, 3, 3], seed=seed)
        assert check_certificate(T, greedy_certificate(T, 3, seed))

    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("q", [2, 3])
    @pytest.mark.parametrize("name,params,c", STRUCTURED)
    def test_greedy_families(self, name, params, c, q, seed):
        T = family(name, build_field(q), **params)
        assert check_certificate(T, greedy_certificate(T, c, seed))

    @pytest.mark.parametrize("seed", range(200))
    def test_exhaustive_gf3(self, gf3, seed):
        T = family("random", gf3, dims=[2, 2, 2], seed=seed)
        outcome = subrank_exhaustive(T, 2)
        if outcome.found:
            assert check_certificate(T, outcome.certificate)

    @pytest.mark.parametrize("seed", range(200))
    def test_exhaustive_gf2(self, gf2, seed):
        T = family("random", gf2, dims=[3, 3, 3], seed=seed)
        outcome = subrank_exhaustive(T, 2)
        if outcome.found:
            assert check_certificate(T, outcome.certificate)

    @pytest.mark.parametrize("seed", range(200))
    def test_kron_composition(self, gf2, seed):
        S = family("random", gf2, dims=[2, 2, 2], seed=seed)
        T = family("random", gf2, dims=[2, 2, 2], seed=seed + 1000)
        cs, ct = best_certificate(S, 2), best_certificate(T, 2)
        composed = kron_certificate(S, cs, T, ct)
        assert composed.c == cs.c * ct.c
        assert check_certificate(kronecker(S, T), composed)


class TestCompanion:
    """The companion construction carries I_2."""

    def test_minrank_and_search_agree(self, companion_tensor):
        assert minrank_certificate(companion_tensor, 2).ok
        outcome = subrank_exhaustive(companion_tensor, 2)
        assert outcome.found
        assert check_certificate(companion_tensor, outcome.certificate)
        assert subrank_report(companion_tensor, SubrankOptions(K=3)).lower >= 2


@pytest.mark.slow
class TestPerformance:
    """Strata over GF(8) for a 6x6x6 tensor within a minute."""

    def test_strata_6x6x6(self, gf2):
        T = family("random", gf2, dims=[6, 6, 6], seed=0)
        started = time.perf_counter()
        counts = rank_strata(T, 3)
        elapsed = time.perf_counter() - started
        assert sum(counts.values()) == 8 ** 6
        assert elapsed < 60


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
