"""
Subrank Engine: certified lower bounds, exhaustive decisions, upper bounds.

A certificate for I_c ≤ T stores exactly the state of an inductive
diagonalization: c covectors per mode 1..d-1 and c coefficient vectors
recombining the mode-d slices into T'_1..T'_c with

    <T'_k, u_{j_1} ⊗ ... ⊗ u_{j_{d-1}}> = δ(k, j_1, ..., j_{d-1}).

The restriction maps are rebuilt from it on demand, so every certificate is
replayable without trusting the search that produced it.

Procedures:
  - greedy_diagonalize: level-by-level search, lexicographic then sampled
  - minrank_certificate: every nonzero combination of c slices has rank
    at least 2c(c-1), which implies Q >= c for order-3 tensors
  - subrank_exhaustive: ground-truth decision of I_r ≤ T for tiny tensors
  - subrank_report: combines all of the above with GR and flattening bounds
"""

import time
from dataclasses import dataclass, field, replace
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from fqlab.config.settings import get_settings, resolve_workers
from fqlab.engine.errors import (
    BadParams,
    BudgetExceeded,
    InvariantViolation,
    LabError,
    OrderUnsupported,
    ShapeMismatch,
    require_budget,
)
from fqlab.engine.fqlinalg import (
    FqMatrix,
    batch_rank,
    count_independent_tuples,
    independent_tuples,
    rank,
    solve,
    vectors_from_indices,
)
from fqlab.engine.gf import FieldSpec, build_field, embedding_table
from fqlab.engine.parallel import chunk_ranges, first_hit, run_tasks
from fqlab.engine.strata import GeometricRank, geometric_rank
from fqlab.engine.tensor import (
    FqTensor,
    apply_mode,
    combine_slices,
    contract_axis,
    extend_field,
    family,
    flatten,
    mode_slices,
    restrict,
)
from fqlab.observability import logger


# ─── Domain Types ───

@dataclass(frozen=True)
class SubrankCertificate:
    """Witness of I_c ≤ T: u[i][j] on mode i+1, coeff[k] over mode-d slices."""
    c: int
    u: Tuple[Tuple[Tuple[int, ...], ...], ...]
    coeff: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        if self.c < 0:
            raise BadParams(f"Certificate size must be >= 0, got {self.c}")
        object.__setattr__(self, "u", tuple(tuple(tuple(int(x) for x in v) for v in mode) for mode in self.u))
        object.__setattr__(self, "coeff", tuple(tuple(int(x) for x in v) for v in self.coeff))

    @classmethod
    def from_arrays(cls, c: int, us: Sequence[np.ndarray], coeff: np.ndarray) -> "SubrankCertificate":
        return cls(c, tuple(tuple(map(tuple, np.asarray(U)[:c].tolist())) for U in us), tuple(map(tuple, np.asarray(coeff)[:c].tolist())))

    @classmethod
    def empty(cls, order: int) -> "SubrankCertificate":
        return cls(0, ((),) * (order - 1), ())

    def u_matrix(self, i: int) -> np.ndarray:
        return np.array(self.u[i], dtype=np.int64)

    def coeff_matrix(self) -> np.ndarray:
        return np.array(self.coeff, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"c": self.c, "u": [[list(v) for v in mode] for mode in self.u], "coeff": [list(v) for v in self.coeff]}


@dataclass(frozen=True)
class Failure:
    """Greedy search exhausted at `level`; `partial` certifies Q >= level."""
    level: int
    partial: SubrankCertificate

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ExhaustiveOutcome:
    r: int
    found: bool
    certificate: Optional[SubrankCertificate]
    nodes: int

    def __bool__(self) -> bool:
        return self.found


@dataclass(frozen=True)
class MinrankResult:
    ok: bool
    c: int
    threshold: int
    witness: Optional[Tuple[int, ...]]       # violating combination of the c slices
    implied_lower: int
    reason: str = ""


@dataclass
class SubrankOptions:
    K: Optional[int] = None
    greedy_budget: Optional[int] = None
    exhaustive_budget: Optional[int] = None
    minrank_budget: Optional[int] = None
    strata_budget: Optional[int] = None
    minrank: bool = True
    exhaustive: bool = True
    use_gr: bool = True
    seed: int = 0
    workers: Optional[int] = None


@dataclass
class RankReport:
    field_name: str
    dims: Tuple[int, ...]
    lower: int
    lower_method: str
    certificate: Optional[SubrankCertificate]
    upper: int
    upper_method: str
    exact: Optional[int] = None
    gr_value: Optional[int] = None
    gr_certain: bool = False
    notes: List[str] = field(default_factory=list)
    baseline: Optional["RankReport"] = None

    def to_dict(self) -> dict:
        out = {
            "field": self.field_name,
            "dims": list(self.dims),
            "lower": self.lower,
            "lower_method": self.lower_method,
            "upper": self.upper,
            "upper_method": self.upper_method,
            "exact": self.exact,
            "gr": {"value": self.gr_value, "certain": self.gr_certain},
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "notes": list(self.notes),
        }
        if self.baseline is not None:
            out["baseline"] = self.baseline.to_dict()
        return out


# ─── Certificate Checking ───

def _check_shapes(T: FqTensor, cert: SubrankCertificate) -> None:
    if T.order < 2:
        raise ShapeMismatch(f"Certificates need order >= 2, got {T.order}")
    if len(cert.u) != T.order - 1:
        raise ShapeMismatch(f"Certificate has {len(cert.u)} covector modes, tensor needs {T.order - 1}")
    for i, vecs in enumerate(cert.u):
        if len(vecs) != cert.c or any(len(v) != T.dims[i] for v in vecs):
            raise ShapeMismatch(f"Mode {i + 1} needs {cert.c} covectors of length {T.dims[i]}")
    if len(cert.coeff) != cert.c or any(len(v) != T.dims[-1] for v in cert.coeff):
        raise ShapeMismatch(f"Need {cert.c} coefficient vectors of length {T.dims[-1]}")


def _entries_in_field(F: FieldSpec, cert: SubrankCertificate) -> bool:
    values = [x for mode in cert.u for v in mode for x in v] + [x for v in cert.coeff for x in v]
    return all(0 <= x < F.q for x in values)


def certificate_maps(T: FqTensor, cert: SubrankCertificate) -> List[FqMatrix]:
    """
    Restriction maps (g_1, ..., g_d): rows of g_i are u[i], rows of g_d the
    slice coefficients.

    Raises:
        ShapeMismatch: the certificate does not fit T, or is empty.
    """
    _check_shapes(T, cert)
    if cert.c == 0:
        raise ShapeMismatch("An empty certificate has no restriction maps")
    F = T.field
    return [FqMatrix(F, cert.u_matrix(i)) for i in range(T.order - 1)] + [FqMatrix(F, cert.coeff_matrix())]


def check_certificate(T: FqTensor, cert: SubrankCertificate) -> bool:
    """
    Verify independence of every covector family and of the coefficients,
    the δ pattern by direct contraction, and restrict(T, maps) == I_c.

    Raises:
        ShapeMismatch: the certificate does not fit T.
    """
    _check_shapes(T, cert)
    c, d, F = cert.c, T.order, T.field
    if c == 0:
        return True
    if not _entries_in_field(F, cert):
        return False

    U = [cert.u_matrix(i) for i in range(d - 1)]
    coeff = cert.coeff_matrix()
    if any(rank(FqMatrix(F, Ui)) != c for Ui in U) or rank(FqMatrix(F, coeff)) != c:
        return False

    for k in range(c):
        Tk = combine_slices(T, coeff[k])
        for J in product(range(c), repeat=d - 1):
            value = Tk
            for i in reversed(range(d - 1)):
                value = contract_axis(F, value, i, U[i][J[i]])
            if int(value) != (1 if all(j == k for j in J) else 0):
                return False

    return restrict(T, certificate_maps(T, cert)) == family("identity", F, r=c, d=d)


def kron_certificate(
    S: FqTensor, cs: SubrankCertificate, T: FqTensor, ct: SubrankCertificate
) -> SubrankCertificate:
    """
    Certificate for I_{cs·ct} ≤ S ⊠ T; vector pair (a, b) sits at a·ct + b
    and each vector is the Kronecker product of its factors.
    """
    _check_shapes(S, cs)
    _check_shapes(T, ct)
    if S.field != T.field or S.order != T.order:
        raise ShapeMismatch("Kronecker certificates need tensors of equal order over one field")
    F = S.field

    def kron_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if A.shape[0] == 0 or B.shape[0] == 0:
            return np.zeros((0, A.shape[1] * B.shape[1]), dtype=np.int64)
        prod = F.vmul(A[:, None, :, None], B[None, :, None, :])
        return prod.reshape(A.shape[0] * B.shape[0], -1)

    def padded(rows: Tuple[Tuple[int, ...], ...], n: int) -> np.ndarray:
        return np.array(rows, dtype=np.int64).reshape(len(rows), n)

    us = [
        kron_rows(padded(cs.u[i], S.dims[i]), padded(ct.u[i], T.dims[i]))
        for i in range(S.order - 1)
    ]
    coeff = kron_rows(padded(cs.coeff, S.dims[-1]), padded(ct.coeff, T.dims[-1]))
    return SubrankCertificate.from_arrays(cs.c * ct.c, us, coeff)


# ─── Greedy Diagonalization ───

def _batched_contract(F: FieldSpec, S: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """
    S is (c, n_1, ..., n_{d-1}); mats[i] is (B, r_i, n_i).
    Returns (B, c, r_1, ..., r_{d-1}).
    """
    out = S[None]
    for i, W in enumerate(mats):
        axis = 2 + i
        moved = np.moveaxis(out, axis, -1)
        Wb = W.reshape((W.shape[0],) + (1,) * (moved.ndim - 2) + W.shape[1:])
        out = np.moveaxis(F.vsum(F.vmul(moved[..., None, :], Wb), axis=-1), -1, axis)
    return out


def _decode_tuples(F: FieldSpec, dims: Sequence[int], digits: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [vectors_from_indices(dg + 1, n, F.q) for dg, n in zip(digits, dims)]


def _lex_digits(idx: np.ndarray, radices: Sequence[int]) -> List[np.ndarray]:
    digits = []
    rem = idx
    for R in reversed(radices):
        digits.append(rem % R)
        rem = rem // R
    return digits[::-1]


def _mixed_mask(m: int, order: int) -> np.ndarray:
    """Index tuples over [m+1]^order using the new vector and an old one."""
    grid = np.indices((m + 1,) * order).reshape(order, -1)
    has_new = (grid == m).any(axis=0)
    has_old = (grid < m).any(axis=0)
    return (has_new & has_old).reshape((m + 1,) * order)


def _valid_tuples(F: FieldSpec, S: np.ndarray, U: List[np.ndarray], r: int, m: int, V: List[np.ndarray]) -> np.ndarray:
    B = V[0].shape[0]
    mats = [
        np.concatenate([np.broadcast_to(Ui[None], (B,) + Ui.shape), Vi[:, None, :]], axis=1)
        for Ui, Vi in zip(U, V)
    ]
    vals = _batched_contract(F, S, mats)
    ok = vals[(slice(None), r) + (m,) * len(U)] == 1
    if m > 0:
        mixed = vals[:, :, _mixed_mask(m, len(U))]
        ok &= ~(mixed != 0).any(axis=(1, 2))
    return ok


def _search_level(
    F: FieldSpec,
    S: np.ndarray,
    U: List[np.ndarray],
    r: int,
    m: int,
    dims: Sequence[int],
    budget: int,
    samples: int,
    rng: np.random.Generator,
) -> Tuple[Optional[List[np.ndarray]], bool, int]:
    """First valid (v_1, ..., v_{d-1}) for slice r at level m: (hit, exhausted, total)."""
    radices = [F.q ** n - 1 for n in dims]
    total = int(np.prod(radices, dtype=object))
    for start, stop in chunk_ranges(min(total, budget)):
        V = _decode_tuples(F, dims, _lex_digits(np.arange(start, stop, dtype=np.int64), radices))
        ok = _valid_tuples(F, S, U, r, m, V)
        if ok.any():
            b = int(np.argmax(ok))
            return [Vi[b] for Vi in V], True, total
    if total <= budget:
        return None, True, total

    for start, stop in chunk_ranges(samples):
        digits = [rng.integers(0, R, size=stop - start, dtype=np.int64) for R in radices]
        V = _decode_tuples(F, dims, digits)
        ok = _valid_tuples(F, S, U, r, m, V)
        if ok.any():
            b = int(np.argmax(ok))
            return [Vi[b] for Vi in V], False, total
    return None, False, total


def _independent_prefix(F: FieldSpec, rows: np.ndarray, count: int) -> List[int]:
    chosen: List[int] = []
    for l in range(rows.shape[0]):
        if len(chosen) == count:
            break
        if rank(FqMatrix(F, rows[chosen + [l]])) > len(chosen):
            chosen.append(l)
    return chosen


def greedy_diagonalize(
    T: FqTensor,
    target_c: int,
    budget: Optional[int] = None,
    seed: int = 0,
    samples: Optional[int] = None,
) -> Union[SubrankCertificate, Failure]:
    """
    Build a certificate for I_target_c ≤ T one diagonal entry at a time.

    Level m+1 looks, among the not yet placed recombined slices, for one
    slice T'_r and vectors v_i with <T'_r, v_1 ⊗ ... ⊗ v_{d-1}> = 1 while every
    recombined slice vanishes on tuples mixing v's with earlier u's; the
    other slices then subtract their value at (v, ..., v) times T'_r.

    Returns:
        A verified certificate, or Failure(level, partial) when a level's
        search space was exhausted.

    Raises:
        BudgetExceeded: a level was neither solved nor exhausted; `partial`
            holds the verified certificate reached so far.
    """
    if T.order < 2:
        raise OrderUnsupported(f"greedy_diagonalize needs order >= 2, got {T.order}")
    if target_c < 0:
        raise BadParams(f"target_c must be >= 0, got {target_c}")
    settings = get_settings()
    budget = settings.GREEDY_BUDGET if budget is None else int(budget)
    samples = settings.GREEDY_SAMPLES if samples is None else int(samples)

    F, d = T.field, T.order
    dims = T.dims[:-1]
    n_d = T.dims[-1]
    flat = mode_slices(T).reshape(n_d, -1)
    chosen = _independent_prefix(F, flat, target_c)
    if len(chosen) < target_c:
        return Failure(0, SubrankCertificate.empty(d))

    coeff = np.zeros((target_c, n_d), dtype=np.int64)
    coeff[np.arange(target_c), chosen] = 1
    U = [np.zeros((0, n), dtype=np.int64) for n in dims]
    rng = np.random.Generator(np.random.PCG64(seed))

    for m in range(target_c):
        S = np.stack([combine_slices(T, coeff[k]) for k in range(target_c)])
        hit, exhausted, required = None, True, 0
        for r in range(m, target_c):
            v, done, total = _search_level(F, S, U, r, m, dims, budget, samples, rng)
            exhausted &= done
            required = max(required, total)
            if v is not None:
                hit = (r, v)
                break

        if hit is None:
            partial = SubrankCertificate.from_arrays(m, U, coeff[:m])
            if not exhausted:
                logger.warning("budget_exceeded", search="greedy_diagonalize", level=m, required=required, budget=budget)
                raise BudgetExceeded("greedy_diagonalize", required, budget, partial=partial)
            logger.info("greedy_failed", level=m, target=target_c)
            return Failure(m, partial)

        r, v = hit
        coeff[[m, r]] = coeff[[r, m]]
        S[[m, r]] = S[[r, m]]
        alpha = _batched_contract(F, S, [vi[None, None, :] for vi in v]).reshape(target_c)
        for k in range(target_c):
            if k != m and alpha[k]:
                coeff[k] = F.vsub(coeff[k], F.vmul(int(alpha[k]), coeff[m]))
        U = [np.concatenate([Ui, vi[None, :]], axis=0) for Ui, vi in zip(U, v)]

    cert = SubrankCertificate.from_arrays(target_c, U, coeff)
    if not check_certificate(T, cert):
        raise InvariantViolation(f"Greedy certificate of size {target_c} failed verification")
    logger.info("certificate_found", method="greedy", c=target_c, field=F.name, dims=list(T.dims))
    return cert


# ─── Min-rank Criterion ───

def minrank_certificate(
    T: FqTensor,
    c: int,
    coeff: Optional[Sequence[Sequence[int]]] = None,
    budget: Optional[int] = None,
) -> MinrankResult:
    """
    Check that T'_1..T'_c are independent and every nonzero combination has
    rank >= 2c(c-1); if so, Q(T) >= c. The default coefficients pick the
    first c slices.

    Raises:
        OrderUnsupported: T is not of order 3.
        BudgetExceeded: q^c exceeds the budget.
    """
    if T.order != 3:
        raise OrderUnsupported(f"minrank_certificate needs an order-3 tensor, got order {T.order}")
    if c < 1:
        raise BadParams(f"c must be >= 1, got {c}")
    F = T.field
    n1, n2, n3 = T.dims
    budget = get_settings().MINRANK_BUDGET if budget is None else int(budget)
    require_budget("minrank_certificate", F.q ** c, budget)

    if coeff is None:
        if c > n3:
            raise ShapeMismatch(f"Only {n3} slices available for c={c}")
        coeff = np.eye(n3, dtype=np.int64)[:c]
    coeff = np.asarray(coeff, dtype=np.int64)
    if coeff.shape != (c, n3):
        raise ShapeMismatch(f"Need {c} coefficient vectors of length {n3}, got shape {coeff.shape}")

    threshold = 2 * c * (c - 1)
    slices = np.stack([combine_slices(T, coeff[k]) for k in range(c)])
    if rank(FqMatrix(F, slices.reshape(c, n1 * n2))) != c:
        return MinrankResult(False, c, threshold, None, 0, "recombined slices are dependent")

    combos = vectors_from_indices(np.arange(1, F.q ** c, dtype=np.int64), c, F.q)
    mats = F.vsum(F.vmul(combos[:, :, None, None], slices[None]), axis=1)
    ranks = batch_rank(F, mats)
    low = np.flatnonzero(ranks < threshold)
    if low.size:
        witness = tuple(int(x) for x in combos[low[0]])
        return MinrankResult(False, c, threshold, witness, 0, f"combination of rank {int(ranks[low[0]])}")
    return MinrankResult(True, c, threshold, None, c)


# ─── Exhaustive Search ───

def exhaustive_nodes(T: FqTensor, r: int) -> int:
    """Π over modes 1..d-1 of the number of independent r-tuples."""
    nodes = 1
    for n in T.dims[:-1]:
        nodes *= count_independent_tuples(T.field.q, n, r)
    return nodes


def _diagonal_targets(r: int, order: int) -> np.ndarray:
    E = np.zeros((r ** order, r), dtype=np.int64)
    step = sum(r ** i for i in range(order))
    for k in range(r):
        E[k * step, k] = 1
    return E


def _exhaustive_chunk(p: int, m: int, data: np.ndarray, r: int, start: int, stop: int) -> Optional[SubrankCertificate]:
    F = build_field(p, m)
    d = data.ndim
    outer = [independent_tuples(F, n, r) for n in data.shape[:d - 2]]
    inner = independent_tuples(F, data.shape[d - 2], r)
    radices = [t.shape[0] for t in outer]
    E = _diagonal_targets(r, d - 1)
    N, n_d = inner.shape[0], data.shape[-1]

    for flat in range(start, stop):
        picks = [int(x) for x in _lex_digits(np.array(flat, dtype=np.int64), radices)] if radices else []
        A0 = data
        for axis, (tuples, pick) in enumerate(zip(outer, picks)):
            A0 = apply_mode(F, A0, axis, tuples[pick])
        A0x = np.moveaxis(A0, -2, -1)
        Vb = inner.reshape((N,) + (1,) * (A0x.ndim - 1) + inner.shape[1:])
        M = F.vsum(F.vmul(A0x[None, ..., None, :], Vb), axis=-1)
        A = np.moveaxis(M, -1, -2).reshape(N, r ** (d - 1), n_d)
        aug = np.concatenate([A, np.broadcast_to(E[None], (N,) + E.shape)], axis=2)
        valid = batch_rank(F, A) == batch_rank(F, aug)
        if not valid.any():
            continue
        b = int(np.argmax(valid))
        system = FqMatrix(F, A[b])
        coeff = np.stack([solve(system, E[:, k]) for k in range(r)])
        us = [tuples[pick] for tuples, pick in zip(outer, picks)] + [inner[b]]
        return SubrankCertificate.from_arrays(r, us, coeff)
    return None


def subrank_exhaustive(
    T: FqTensor,
    r: int,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> ExhaustiveOutcome:
    """
    Decide I_r ≤ T by enumerating independent r-tuples on modes 1..d-1 and
    solving for the slice coefficients. The first certificate in
    lexicographic order is returned.

    Raises:
        BudgetExceeded: the node count exceeds the budget.
    """
    if T.order < 2:
        raise OrderUnsupported(f"subrank_exhaustive needs order >= 2, got {T.order}")
    if r < 0:
        raise BadParams(f"r must be >= 0, got {r}")
    if r == 0:
        return ExhaustiveOutcome(0, True, SubrankCertificate.empty(T.order), 0)
    if r > min(T.dims):
        return ExhaustiveOutcome(r, False, None, 0)

    nodes = exhaustive_nodes(T, r)
    budget = get_settings().EXHAUSTIVE_BUDGET if budget is None else int(budget)
    require_budget("subrank_exhaustive", nodes, budget)

    F = T.field
    started = time.perf_counter()
    outer_total = 1
    for n in T.dims[:-2]:
        outer_total *= count_independent_tuples(F.q, n, r)
    tasks = [(F.p, F.m, np.asarray(T.data), r, start, stop) for start, stop in chunk_ranges(outer_total, 64)]

    if resolve_workers(workers) == 1:
        cert = None
        for task in tasks:
            cert = _exhaustive_chunk(*task)
            if cert is not None:
                break
    else:
        cert = first_hit(run_tasks(_exhaustive_chunk, tasks, workers))

    if cert is not None and not check_certificate(T, cert):
        raise InvariantViolation(f"Exhaustive certificate of size {r} failed verification")
    logger.info(
        "exhaustive_search",
        r=r,
        nodes=nodes,
        found=cert is not None,
        elapsed_ms=round((time.perf_counter() - started) * 1000, 2),
    )
    return ExhaustiveOutcome(r, cert is not None, cert, nodes)


# ─── Reports ───

def _flattening_upper(T: FqTensor) -> int:
    return min(rank(flatten(T, [i])) for i in range(1, T.order + 1))


def subrank_report(
    T: FqTensor,
    options: Optional[SubrankOptions] = None,
    gr: Optional[GeometricRank] = None,
) -> RankReport:
    """
    Lower bounds from greedy search and exhaustive closure, upper bounds
    from dimensions, flattening ranks and a certain geometric rank. Errors
    of the sub-procedures become notes.

    Args:
        gr: a geometric rank already computed for T (or for T over a
            subfield, since GR does not change under field extension).
    """
    opts = options or SubrankOptions()
    notes: List[str] = []
    d = T.order
    if d < 2:
        raise OrderUnsupported(f"subrank_report needs order >= 2, got {d}")

    upper, upper_method = min(T.dims), "min_dim"
    flat = _flattening_upper(T)
    if flat < upper:
        upper, upper_method = flat, "flattening_rank"

    gr_value, gr_certain = None, False
    if opts.use_gr:
        try:
            if gr is None:
                gr = geometric_rank(T, opts.K, budget=opts.strata_budget, workers=opts.workers)
            gr_value, gr_certain = gr.value, gr.certain
            if gr.certain and gr.value < upper:
                upper, upper_method = gr.value, "geometric_rank"
            if not gr.certain:
                notes.append(f"geometric rank {gr.value} is uncertain, not used as upper bound")
        except LabError as exc:
            notes.append(f"geometric_rank: {exc}")

    lower, lower_method = 0, "trivial"
    certificate: Optional[SubrankCertificate] = SubrankCertificate.empty(d)
    for c in range(1, upper + 1):
        try:
            outcome = greedy_diagonalize(T, c, budget=opts.greedy_budget, seed=opts.seed)
        except BudgetExceeded as exc:
            notes.append(f"greedy c={c}: {exc}")
            if exc.partial is not None and exc.partial.c > lower:
                lower, lower_method, certificate = exc.partial.c, "greedy", exc.partial
            break
        if isinstance(outcome, Failure):
            if outcome.level > lower:
                lower, lower_method, certificate = outcome.level, "greedy", outcome.partial
            notes.append(f"greedy stopped at level {outcome.level} for target {c}")
            break
        lower, lower_method, certificate = c, "greedy", outcome

    if opts.minrank and d == 3:
        for c in range(max(lower + 1, 2), upper + 1):
            try:
                criterion = minrank_certificate(T, c, budget=opts.minrank_budget)
            except LabError as exc:
                notes.append(f"minrank c={c}: {exc}")
                break
            if criterion.ok:
                notes.append(f"minrank criterion holds at c={c}: Q >= {c} (uncertified)")

    if opts.exhaustive:
        for r in range(lower + 1, upper + 1):
            try:
                outcome = subrank_exhaustive(T, r, budget=opts.exhaustive_budget, workers=opts.workers)
            except BudgetExceeded as exc:
                notes.append(f"exhaustive r={r}: {exc}")
                break
            if outcome.found:
                lower, lower_method, certificate = r, "exhaustive", outcome.certificate
            else:
                upper, upper_method = r - 1, "exhaustive"
                break

    if certificate is not None and not check_certificate(T, certificate):
        raise InvariantViolation("Reported lower bound does not re-verify")
    if lower > upper:
        raise InvariantViolation(f"Subrank lower bound {lower} exceeds upper bound {upper}")

    return RankReport(
        field_name=T.field.name,
        dims=T.dims,
        lower=lower,
        lower_method=lower_method,
        certificate=certificate,
        upper=upper,
        upper_method=upper_method,
        exact=lower if lower == upper else None,
        gr_value=gr_value,
        gr_certain=gr_certain,
        notes=notes,
    )


def lift_certificate(cert: SubrankCertificate, T: FqTensor, k: int) -> SubrankCertificate:
    """Carry a certificate for T over GF(q) to extend_field(T, k)."""
    if k == 1 or cert.c == 0:
        return cert
    table = embedding_table(T.field, extend_field(T, k).field)
    return SubrankCertificate(
        cert.c,
        tuple(tuple(tuple(int(table[x]) for x in v) for v in mode) for mode in cert.u),
        tuple(tuple(int(table[x]) for x in v) for v in cert.coeff),
    )


def subrank_over_extension(
    T: FqTensor,
    k: int,
    options: Optional[SubrankOptions] = None,
    gr: Optional[GeometricRank] = None,
) -> RankReport:
    """
    subrank_report over GF(q^k) with the base-field report attached. A base
    certificate stronger than the extension search is lifted and re-verified,
    so the extension lower bound never falls below the base one.

    Raises:
        DegreeTooLarge: q^k exceeds the field cap.
    """
    ext = extend_field(T, k)
    opts = options or SubrankOptions()
    if gr is None and opts.use_gr:
        try:
            gr = geometric_rank(T, opts.K, budget=opts.strata_budget, workers=opts.workers)
        except LabError:
            gr = None
    base = subrank_report(T, options, gr=gr)
    report = subrank_report(ext, options, gr=gr)
    if report.lower < base.lower and base.certificate is not None:
        lifted = lift_certificate(base.certificate, T, k)
        if not check_certificate(ext, lifted):
            raise InvariantViolation(f"Certificate of size {lifted.c} did not survive the degree-{k} extension")
        report = replace(report, lower=lifted.c, lower_method="lifted", certificate=lifted)
        report.notes.append(f"lower bound lifted from GF({T.field.name})")
        if report.lower > report.upper:
            raise InvariantViolation(f"Lifted lower bound {report.lower} exceeds upper bound {report.upper}")
        report.exact = report.lower if report.lower == report.upper else None
    return replace(report, baseline=base)
