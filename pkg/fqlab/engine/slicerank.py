"""
Slice Rank and Partition Rank.

Exact slice rank of an order-3 tensor uses the vanishing-subspace criterion:
SR(T) is the least Σ_j codim V_j over subspaces V_j of mode-j covectors with
T identically zero on V_1 × V_2 × V_3. For fixed V_1, V_2 the best V_3 is the
annihilator of the contracted tensor, so only two modes are enumerated.

Every value comes with an explicit decomposition built from the subspaces,
and decompositions are checked by reconstruction. An independent oracle
enumerates decompositions directly for validation at tiny sizes.
"""

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fqlab.config.settings import get_settings
from fqlab.engine.constants import LAB
from fqlab.engine.errors import InvariantViolation, LabError, OrderUnsupported, require_budget
from fqlab.engine.fqlinalg import (
    FqMatrix,
    batch_rank,
    complete_basis,
    field_matmul,
    inverse,
    kernel_basis,
    projective_points,
    rank,
    rref,
    solve,
    subspace_batches,
    vectors_from_indices,
)
from fqlab.engine.gf import FieldSpec, build_field
from fqlab.engine.parallel import run_tasks
from fqlab.engine.strata import gaussian_binomial, geometric_rank
from fqlab.engine.tensor import FqTensor, apply_mode, contract_axis, flatten
from fqlab.observability import logger


# ─── Domain Types ───

@dataclass(frozen=True, eq=False)
class SliceTerm:
    """vector on `mode` (1-based) tensored with a cofactor over the other modes."""
    mode: int
    vector: np.ndarray
    cofactor: np.ndarray

    def expand(self, F: FieldSpec) -> np.ndarray:
        axis = self.mode - 1
        shape = [1] * (self.cofactor.ndim + 1)
        shape[axis] = self.vector.shape[0]
        return F.vmul(self.vector.reshape(shape), np.expand_dims(self.cofactor, axis))


@dataclass
class SliceDecomposition:
    field: FieldSpec
    dims: Tuple[int, ...]
    terms: List[SliceTerm] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.terms)

    def counts(self) -> Dict[int, int]:
        out = {j: 0 for j in range(1, len(self.dims) + 1)}
        for t in self.terms:
            out[t.mode] += 1
        return out

    def reconstruct(self) -> FqTensor:
        data = np.zeros(self.dims, dtype=np.int64)
        for t in self.terms:
            data = self.field.vadd(data, t.expand(self.field))
        return FqTensor(self.field, data)

    def verify(self, T: FqTensor) -> bool:
        """Terms sum to T and each has a mode flattening of rank <= 1."""
        for t in self.terms:
            term = FqTensor(self.field, t.expand(self.field))
            if len(self.dims) > 1 and rank(flatten(term, [t.mode])) > 1:
                return False
        return self.reconstruct() == T

    def to_dict(self) -> dict:
        return {
            "field": self.field.name,
            "dims": list(self.dims),
            "terms": [
                {"mode": t.mode, "vector": t.vector.tolist(), "cofactor": t.cofactor.reshape(-1).tolist()}
                for t in self.terms
            ],
        }


@dataclass
class SliceRankResult:
    value: int
    method: str                     # exact | oracle | flattening | peel
    decomposition: SliceDecomposition
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "counts": self.decomposition.counts(),
            "notes": list(self.notes),
        }


@dataclass
class PartitionRankResult:
    order: int
    lower: int
    upper: int
    exact: Optional[int]
    method: str
    convention: str
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "method": self.method,
            "convention": self.convention,
            "notes": list(self.notes),
        }


# ─── Decompositions ───

def _flattening_terms(F: FieldSpec, R: np.ndarray, axis: int) -> List[SliceTerm]:
    """Rank-many terms on `axis` from the RREF of the axis flattening."""
    moved = np.moveaxis(R, axis, 0)
    rest = moved.shape[1:]
    M = moved.reshape(moved.shape[0], -1)
    if M.size == 0:
        return []
    R0, pivots = rref(F, M)
    return [
        SliceTerm(axis + 1, M[:, pc].copy(), R0[t].reshape(rest).copy())
        for t, pc in enumerate(pivots)
    ]


def decomposition_from_subspaces(T: FqTensor, bases: Dict[int, np.ndarray], last: int) -> SliceDecomposition:
    """
    Slice decomposition with n_i - dim V_i terms on every axis i in `bases`
    (0-based, each V_i given by independent rows) and rank-many terms on
    `last` for what remains after projecting onto the V_i.
    """
    F = T.field
    R = T.data
    terms: List[SliceTerm] = []
    for axis in sorted(bases):
        Bv = np.asarray(bases[axis], dtype=np.int64).reshape(-1, T.dims[axis])
        n, dv = T.dims[axis], Bv.shape[0]
        full = complete_basis(F, Bv, n)
        inv = inverse(FqMatrix(F, full))
        if inv is None:
            raise InvariantViolation(f"Completed basis on mode {axis + 1} is singular")
        C = inv.entries
        for a in range(dv, n):
            terms.append(SliceTerm(axis + 1, C[:, a].copy(), contract_axis(F, R, axis, full[a])))
        P = field_matmul(F, C[:, :dv], Bv) if dv else np.zeros((n, n), dtype=np.int64)
        R = apply_mode(F, R, axis, P)
    terms += _flattening_terms(F, R, last)
    return SliceDecomposition(F, T.dims, terms)


def _residual_rank(F: FieldSpec, data: np.ndarray, bases: Dict[int, np.ndarray], last: int) -> int:
    R = data
    for axis, B in bases.items():
        R = apply_mode(F, R, axis, B)
    M = np.moveaxis(R, last, -1).reshape(-1, data.shape[last])
    if M.shape[0] == 0:
        return 0
    return rank(FqMatrix(F, M))


def _verified(T: FqTensor, result: SliceRankResult) -> SliceRankResult:
    if result.decomposition.size != result.value or not result.decomposition.verify(T):
        raise InvariantViolation(f"{result.method} slice decomposition of size {result.value} does not rebuild T")
    return result


# ─── Exact Slice Rank ───

def exact_work(T: FqTensor) -> int:
    """Π_j Σ_r (number of r-dimensional subspaces of mode j)."""
    work = 1
    for n in T.dims:
        work *= sum(gaussian_binomial(r, n, T.field.q) for r in range(n + 1))
    return work


def _exact_chunk(p: int, m: int, data: np.ndarray, d1: int) -> Tuple[int, Optional[np.ndarray], Optional[np.ndarray]]:
    """Best (cost, V_1, V_2) over V_1 of dimension d1."""
    F = build_field(p, m)
    n1, n2, n3 = data.shape
    best: Tuple[int, Optional[np.ndarray], Optional[np.ndarray]] = (n1 + n2 + n3 + 1, None, None)
    for B1 in subspace_batches(F, n1, d1):
        A = apply_mode(F, data, 0, B1)
        for d2 in range(n2 + 1):
            B2 = subspace_batches(F, n2, d2)
            S = B2.shape[0]
            C = F.vsum(F.vmul(A[None, :, None, :, :], B2[:, None, :, :, None]), axis=3)
            ranks = batch_rank(F, C.reshape(S, d1 * d2, n3))
            costs = (n1 - d1) + (n2 - d2) + ranks
            s = int(np.argmin(costs))
            if int(costs[s]) < best[0]:
                best = (int(costs[s]), B1.copy(), B2[s].copy())
    return best


def slice_rank_exact(T: FqTensor, budget: Optional[int] = None, workers: Optional[int] = None) -> SliceRankResult:
    """
    Exact slice rank of an order-3 tensor by subspace enumeration.

    Raises:
        OrderUnsupported: order other than 3.
        BudgetExceeded: the subspace product exceeds the budget.
    """
    if T.order != 3:
        raise OrderUnsupported(f"slice_rank_exact needs an order-3 tensor, got order {T.order}; use slice_rank_upper")
    budget = get_settings().SLICERANK_BUDGET if budget is None else int(budget)
    require_budget("slice_rank_exact", exact_work(T), budget)

    F = T.field
    tasks = [(F.p, F.m, np.asarray(T.data), d1) for d1 in range(T.dims[0] + 1)]
    results = run_tasks(_exact_chunk, tasks, workers)
    value, B1, B2 = min(results, key=lambda res: res[0])
    decomposition = decomposition_from_subspaces(T, {0: B1, 1: B2}, 2)
    logger.info("slice_rank_exact", dims=list(T.dims), field=F.name, value=value)
    return _verified(T, SliceRankResult(value, "exact", decomposition))


# ─── Upper Bounds ───

def _flattening_decomposition(T: FqTensor, axis: int) -> SliceDecomposition:
    return SliceDecomposition(T.field, T.dims, _flattening_terms(T.field, T.data, axis))


def _hyperplanes(F: FieldSpec, B: np.ndarray) -> List[np.ndarray]:
    """Bases of hyperplanes of the row space of B, capped per call."""
    dim = B.shape[0]
    out = []
    for lam in projective_points(F, dim)[: LAB.PEEL_CANDIDATES]:
        K = kernel_basis(FqMatrix(F, lam[None, :]))
        K = np.stack(K) if K else np.zeros((0, dim), dtype=np.int64)
        out.append(field_matmul(F, K, B) if K.shape[0] else np.zeros((0, B.shape[1]), dtype=np.int64))
    return out


def _peel(T: FqTensor, last: int) -> SliceDecomposition:
    """
    Shrink the covector subspaces of the other modes one hyperplane at a
    time while the total Σ codim V_i + residual rank on `last` strictly
    drops.
    """
    F = T.field
    bases = {i: np.eye(n, dtype=np.int64) for i, n in enumerate(T.dims) if i != last}
    codims = 0
    total = _residual_rank(F, T.data, bases, last)
    while True:
        best = None
        for axis in sorted(bases):
            if bases[axis].shape[0] == 0:
                continue
            for H in _hyperplanes(F, bases[axis]):
                trial = dict(bases)
                trial[axis] = H
                cost = codims + 1 + _residual_rank(F, T.data, trial, last)
                if cost < total and (best is None or cost < best[0]):
                    best = (cost, axis, H)
        if best is None:
            break
        total, axis, H = best
        bases[axis] = H
        codims += 1
    return decomposition_from_subspaces(T, bases, last)


def slice_rank_upper(T: FqTensor, peel: bool = True) -> SliceRankResult:
    """
    Best of the flattening decompositions (min_j rank T_{j} <= min_j n_j)
    and, when `peel` is set, a greedy hyperplane peel for every choice of
    the residual mode.
    """
    if T.order == 0:
        raise OrderUnsupported("Slice rank needs order >= 1")
    if T.order == 1:
        terms = [] if T.is_zero() else [SliceTerm(1, T.data.copy(), np.array(1, dtype=np.int64))]
        return _verified(T, SliceRankResult(len(terms), "flattening", SliceDecomposition(T.field, T.dims, terms)))

    candidates = [_flattening_decomposition(T, axis) for axis in range(T.order)]
    best = min(candidates, key=lambda dec: dec.size)
    method = "flattening"
    if peel and best.size > 1:
        for last in range(T.order):
            peeled = _peel(T, last)
            if peeled.size < best.size:
                best, method = peeled, "peel"
    return _verified(T, SliceRankResult(best.size, method, best))


# ─── Decomposition Oracle ───

def oracle_work(T: FqTensor) -> int:
    """Number of (split, vector choice) candidates the oracle may visit."""
    q = T.field.q
    bound = min(T.dims)
    work = 0
    for r in range(bound + 1):
        for split in _splits(r, T.order):
            count = 1
            for rj, n in zip(split, T.dims):
                count *= _comb(q ** n - 1, rj)
            work += count
    return work


def _comb(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    out = 1
    for i in range(k):
        out = out * (n - i) // (i + 1)
    return out


def _splits(r: int, parts: int) -> List[Tuple[int, ...]]:
    return [s for s in product(range(r + 1), repeat=parts) if sum(s) == r]


def _generators(F: FieldSpec, dims: Sequence[int], choice: Sequence[np.ndarray]) -> List[Tuple[int, np.ndarray, np.ndarray]]:
    """(mode axis, vector, flattened term) for every vector ⊗ cofactor-basis element."""
    gens = []
    for axis, vecs in enumerate(choice):
        rest = [n for i, n in enumerate(dims) if i != axis]
        size = int(np.prod(rest, dtype=np.int64))
        for v in vecs:
            for e in range(size):
                cof = np.zeros(size, dtype=np.int64)
                cof[e] = 1
                term = SliceTerm(axis + 1, v, cof.reshape(rest))
                gens.append((axis, v, term.expand(F).reshape(-1)))
    return gens


def slice_rank_oracle(T: FqTensor, budget: Optional[int] = None) -> SliceRankResult:
    """
    Slice rank by direct search: for r = 0, 1, ... try every split
    r = r_1 + ... + r_d and every set of r_j nonzero mode-j vectors, and ask
    whether T lies in the span of vector ⊗ (anything) over those choices.
    Cofactors come from solving the linear system.

    Raises:
        BudgetExceeded: the candidate count exceeds the budget.
    """
    if T.order < 2:
        raise OrderUnsupported(f"slice_rank_oracle needs order >= 2, got {T.order}")
    budget = get_settings().ORACLE_BUDGET if budget is None else int(budget)
    require_budget("slice_rank_oracle", oracle_work(T), budget)

    F = T.field
    target = T.data.reshape(-1)
    if not target.any():
        return SliceRankResult(0, "oracle", SliceDecomposition(F, T.dims, []))
    pools = [vectors_from_indices(np.arange(1, F.q ** n, dtype=np.int64), n, F.q) for n in T.dims]

    for r in range(1, min(T.dims) + 1):
        for split in _splits(r, T.order):
            choices = [list(combinations(range(pool.shape[0]), rj)) for pool, rj in zip(pools, split)]
            for pick in product(*choices):
                chosen = [pool[list(idx)] if idx else np.zeros((0, pool.shape[1]), dtype=np.int64) for pool, idx in zip(pools, pick)]
                gens = _generators(F, T.dims, chosen)
                G = np.stack([g[2] for g in gens], axis=1)
                x = solve(FqMatrix(F, G), target)
                if x is None:
                    continue
                decomposition = _oracle_decomposition(F, T.dims, chosen, x)
                return _verified(T, SliceRankResult(r, "oracle", decomposition))
    raise InvariantViolation("Oracle found no decomposition within min(dims) terms")


def _oracle_decomposition(F: FieldSpec, dims: Sequence[int], chosen: Sequence[np.ndarray], x: np.ndarray) -> SliceDecomposition:
    terms = []
    offset = 0
    for axis, vecs in enumerate(chosen):
        rest = [n for i, n in enumerate(dims) if i != axis]
        size = int(np.prod(rest, dtype=np.int64))
        for v in vecs:
            terms.append(SliceTerm(axis + 1, v.copy(), x[offset:offset + size].reshape(rest).copy()))
            offset += size
    return SliceDecomposition(F, tuple(dims), terms)


# ─── Partition Rank ───

ORDERED_CONVENTION = "ordered: J and its complement are separate summands"
UNORDERED_CONVENTION = "unordered: {J, J^c} counted once"


def partition_rank(
    T: FqTensor,
    budget: Optional[int] = None,
    K: Optional[int] = None,
    workers: Optional[int] = None,
) -> PartitionRankResult:
    """
    Order 3: partition rank equals slice rank, computed exactly when within
    budget. Order >= 4: bounds only, GR (when certain) below and the least
    flattening rank over proper subsets above.
    """
    d = T.order
    notes: List[str] = []
    if d <= 2:
        value = 0 if T.is_zero() else (1 if d == 1 else rank(flatten(T, [1])))
        return PartitionRankResult(d, value, value, value, "rank", ORDERED_CONVENTION)

    if d == 3:
        try:
            sr = slice_rank_exact(T, budget=budget, workers=workers)
            return PartitionRankResult(3, sr.value, sr.value, sr.value, "slice_rank_exact", ORDERED_CONVENTION)
        except LabError as exc:
            notes.append(f"slice_rank_exact: {exc}")
        upper = slice_rank_upper(T).value
        lower = 0
        try:
            gr = geometric_rank(T, K, workers=workers)
            if gr.certain:
                lower = gr.value
        except LabError as exc:
            notes.append(f"geometric_rank: {exc}")
        exact = lower if lower == upper else None
        return PartitionRankResult(3, lower, upper, exact, "bounds", ORDERED_CONVENTION, notes)

    subsets = [
        [j + 1 for j in range(d) if mask >> j & 1]
        for mask in range(1, 2 ** d - 1)
    ]
    upper = min(rank(flatten(T, J)) for J in subsets)
    lower = 0
    try:
        gr = geometric_rank(T, K, workers=workers)
        if gr.certain:
            lower = gr.value
        else:
            notes.append(f"geometric rank {gr.value} uncertain, lower bound not used")
    except LabError as exc:
        notes.append(f"geometric_rank: {exc}")
    notes.append("upper bound uses one flattening, so both conventions give the same value")
    if lower > upper:
        raise InvariantViolation(f"GR {lower} exceeds the partition rank upper bound {upper}")
    exact = lower if lower == upper else None
    return PartitionRankResult(d, lower, upper, exact, "bounds", ORDERED_CONVENTION, notes)
