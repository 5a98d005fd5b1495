"""
Stratified Point Counting: geometric rank, bias and analytic rank.

The mode-d covectors u of a tensor T split into strata X_c by the invariant
of the slice T_u = <T, u>: matrix rank when T_u is a matrix, geometric rank
otherwise. Counting every stratum over GF(q^k) for k = 1..K gives growth
exponents, hence dimensions, and

    GR(T) = min_c ( codim X_c + c ).

Dimensions are read off point counts, never from ideals. Three facts pin
down most strata exactly, independent of the count heuristics:
  - X_0 = {u : T_u = 0} is the left kernel of the mode-d flattening;
  - the stratum with the largest invariant is open, hence codimension 0
    (certain once q^K exceeds the degree of the defining minors);
  - every other stratum lies in a proper closed set, so its contribution
    is at least c + 1 and cannot undercut a value <= c + 1.
A result is flagged certain only when no uncertain stratum could lower it.
For rank strata that bound is sharpened by linear sections: an l-dimensional
subspace, over GF(q) or a small extension, whose nonzero points all have
rank > c over the algebraic closure proves codim {rank <= c} >= l.
Finitely many extensions decide that.

Z-counting and bias reuse the same slice ranks: the number of u_2 with
<T_u, u_2> = 0 is q^{k(n_2 - rank T_u)}.
"""

import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fqlab.config.settings import get_settings
from fqlab.engine.constants import CERTAINTY_WINDOW, LAB
from fqlab.engine.errors import (
    BadConstants,
    BadParams,
    BadRange,
    EmptyInput,
    InvariantViolation,
    OrderUnsupported,
    require_budget,
)
from fqlab.engine.fqlinalg import (
    FqMatrix,
    batch_rank,
    enumerate_subspaces,
    projective_points,
    rank,
    subspace_batches,
    vectors_from_indices,
)
from fqlab.engine.gf import FieldSpec, build_field, extension_of
from fqlab.engine.parallel import chunk_ranges, run_tasks, sum_counters
from fqlab.engine.tensor import FqTensor, contract_axis, extend_field, flatten, mode_slices
from fqlab.observability import logger


# ─── Domain Types ───

@dataclass
class StratumProfile:
    """Point counts N_c(k) of every stratum for k = 1..K."""
    q: int
    ambient: int
    invariant: str                               # "rank" or "geometric_rank"
    counts: Dict[int, Dict[int, int]] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return max(self.counts) if self.counts else 0

    def invariants(self) -> List[int]:
        return sorted({c for per_k in self.counts.values() for c in per_k})

    def series(self, c: int) -> List[int]:
        return [self.counts.get(k, {}).get(c, 0) for k in range(1, self.K + 1)]

    def check_totals(self) -> None:
        for k, per_k in self.counts.items():
            expected = self.q ** (k * self.ambient)
            if sum(per_k.values()) != expected:
                raise InvariantViolation(
                    f"Stratum counts at k={k} sum to {sum(per_k.values())}, expected {expected}"
                )

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "ambient": self.ambient,
            "invariant": self.invariant,
            "counts": {str(k): {str(c): n for c, n in sorted(v.items())} for k, v in sorted(self.counts.items())},
        }


@dataclass(frozen=True)
class DimEstimate:
    """Dimension of a constructible set inferred from its point counts."""
    counts: Tuple[int, ...]
    q: int
    ambient: int
    dim: Optional[int]          # None for an empty set
    certain: bool
    method: str                 # empty | full | exact | growth | single

    @property
    def empty(self) -> bool:
        return self.dim is None

    @property
    def codim(self) -> int:
        return self.ambient if self.dim is None else self.ambient - self.dim


@dataclass(frozen=True)
class StratumContribution:
    c: int
    role: str                   # kernel | generic | interior
    codim: int
    contribution: int
    lower: int                  # provable lower bound on the true contribution
    certain: bool
    estimate: Optional[DimEstimate] = None


@dataclass(frozen=True)
class SectionWitness:
    """An ell-dimensional subspace over GF(q^s) on which every nonzero u has rank T_u > c."""
    c: int
    ell: int
    field: FieldSpec
    basis: np.ndarray


@dataclass
class GeometricRank:
    value: int
    certain: bool
    profile: Optional[StratumProfile]
    strata: List[StratumContribution] = field(default_factory=list)
    flattening_bound: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.value, self.certain, self.profile))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "certain": self.certain,
            "flattening_bound": self.flattening_bound,
            "profile": self.profile.to_dict() if self.profile else None,
            "strata": [
                {
                    "c": s.c,
                    "role": s.role,
                    "codim": s.codim,
                    "contribution": s.contribution,
                    "certain": s.certain,
                    "dim_method": s.estimate.method if s.estimate else None,
                }
                for s in self.strata
            ],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class BiasValue:
    """bias(T) = Z / q^E held exactly."""
    Z: int
    E: int
    q: int
    field_name: str

    @property
    def bias(self) -> Fraction:
        return Fraction(self.Z, self.q ** self.E)

    @property
    def analytic_rank(self) -> float:
        return self.E - _log_q(self.Z, self.q)

    @property
    def exact(self) -> str:
        return f"{self.E} - log_{self.q}({self.Z})"

    def to_dict(self) -> dict:
        return {
            "field": self.field_name,
            "Z": str(self.Z),
            "E": self.E,
            "bias": str(self.bias),
            "ar_exact": self.exact,
            "ar": round(self.analytic_rank, 12),
        }


@dataclass(frozen=True)
class CoveringReport:
    """Low-rank covering data for a candidate subrank value c."""
    c: int
    threshold: int
    k: int
    m: int                          # nonzero points of X = {u : rank T_u <= threshold}
    bound: Fraction                 # (Q^{n3} - 1) / (Q^{c+1} - 1)
    covers: Optional[bool]          # None when the subspace enumeration is over budget
    bound_holds: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bound"] = str(self.bound)
        return out


@dataclass(frozen=True)
class StabilityRatio:
    ar: float
    gr: int
    C1: float
    C2: float
    lower_ok: bool                  # C1·AR <= GR
    upper_ok: bool                  # GR <= C2·AR
    ratio: Optional[float]


# ─── Helpers ───

def _log_q(m: int, q: int) -> float:
    """log_q m, exact when m is a power of q."""
    e, power = 0, 1
    while power < m:
        power *= q
        e += 1
    if power == m:
        return float(e)
    return math.log(m) / math.log(q)


def _budget(budget: Optional[int]) -> int:
    return get_settings().STRATA_BUDGET if budget is None else int(budget)


def assemble_slices(E: FieldSpec, u: np.ndarray, slices: np.ndarray) -> np.ndarray:
    """Σ_l u[:, l]·slices[l] for a batch of covectors u (B, n_d)."""
    B = u.shape[0]
    out = np.zeros((B,) + slices.shape[1:], dtype=np.int64)
    expand = (slice(None),) + (None,) * (slices.ndim - 1)
    for l in range(slices.shape[0]):
        out = E.vadd(out, E.vmul(u[:, l][expand], slices[l][None]))
    return out


def _strata_chunk(p: int, m: int, slices: np.ndarray, start: int, stop: int) -> Counter:
    E = build_field(p, m)
    u = vectors_from_indices(np.arange(start, stop, dtype=np.int64), slices.shape[0], E.q)
    ranks = batch_rank(E, assemble_slices(E, u, slices))
    values, counts = np.unique(ranks, return_counts=True)
    return Counter({int(v): int(n) for v, n in zip(values, counts)})


def _rank_array_chunk(p: int, m: int, slices: np.ndarray, start: int, stop: int) -> np.ndarray:
    E = build_field(p, m)
    u = vectors_from_indices(np.arange(start, stop, dtype=np.int64), slices.shape[0], E.q)
    return batch_rank(E, assemble_slices(E, u, slices))


# ─── Rank Strata (order 3) ───

def rank_strata(
    T: FqTensor,
    k: int,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> Dict[int, int]:
    """
    Count u ∈ GF(q^k)^{n_3} by the rank of the slice Σ u_l T_l.

    Raises:
        OrderUnsupported: T is not of order 3.
        BudgetExceeded: q^{k·n_3} exceeds the budget.
    """
    if T.order != 3:
        raise OrderUnsupported(f"rank_strata needs an order-3 tensor, got order {T.order}")
    E = extension_of(T.field, k)
    n3 = T.dims[2]
    total = E.q ** n3
    require_budget("rank_strata", total, _budget(budget))

    started = time.perf_counter()
    slices = mode_slices(extend_field(T, k))
    tasks = [(E.p, E.m, slices, start, stop) for start, stop in chunk_ranges(total)]
    counts = sum_counters(run_tasks(_strata_chunk, tasks, workers))
    logger.info(
        "strata_counted",
        field=E.name,
        dims=list(T.dims),
        k=k,
        slices=total,
        elapsed_ms=round((time.perf_counter() - started) * 1000, 2),
    )
    return dict(sorted(counts.items()))


def slice_rank_array(T: FqTensor, k: int = 1, budget: Optional[int] = None, workers: Optional[int] = None) -> np.ndarray:
    """rank(T_u) for every u ∈ GF(q^k)^{n_3}, indexed lexicographically."""
    if T.order != 3:
        raise OrderUnsupported(f"slice ranks need an order-3 tensor, got order {T.order}")
    E = extension_of(T.field, k)
    total = E.q ** T.dims[2]
    require_budget("slice_rank_array", total, _budget(budget))
    slices = mode_slices(extend_field(T, k))
    tasks = [(E.p, E.m, slices, start, stop) for start, stop in chunk_ranges(total)]
    parts = run_tasks(_rank_array_chunk, tasks, workers)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


# ─── Dimension Estimation ───

def _exact_fits(counts: Sequence[int], q: int, ambient: int) -> List[Tuple[int, int, int]]:
    """
    All (i, j, a) with N(k) = a·Q^i·(Q - 1)^j for every k, Q = q^k, a >= 1.
    Covers affine spaces, tori and their finite unions of translates.
    """
    fits = []
    for e in range(ambient + 1):
        for i in range(e + 1):
            j = e - i
            base = q ** i * (q - 1) ** j
            if counts[0] % base:
                continue
            a = counts[0] // base
            if a < 1:
                continue
            if all(n == a * (q ** k) ** i * (q ** k - 1) ** j for k, n in enumerate(counts, start=1)):
                fits.append((i, j, a))
    return fits


def estimate_dim(counts: Sequence[int], q: int, ambient: int) -> DimEstimate:
    """
    Infer dim of a set from N(k) = |X(GF(q^k))|, k = 1..K.

    Exact point-count classes a·Q^i·(Q-1)^j are recognized first; otherwise
    the growth rate between the last two extensions decides, and the result
    is certain only if the previous pair agrees and N(K) sits within the
    certainty window of the extrapolated count.

    Raises:
        EmptyInput: no counts given.
    """
    counts = tuple(int(n) for n in counts)
    if not counts:
        raise EmptyInput("estimate_dim needs at least one point count")
    K = len(counts)

    if all(n == 0 for n in counts):
        return DimEstimate(counts, q, ambient, None, True, "empty")
    if all(n == q ** (k * ambient) for k, n in enumerate(counts, start=1)):
        return DimEstimate(counts, q, ambient, ambient, True, "full")
    if K == 1:
        guess = min(max(round(_log_q(counts[0], q)), 0), ambient)
        return DimEstimate(counts, q, ambient, guess, False, "single")

    fits = _exact_fits(counts, q, ambient)
    dims = {i + j for i, j, _ in fits}
    if len(dims) == 1:
        return DimEstimate(counts, q, ambient, dims.pop(), True, "exact")

    nonzero = [k for k, n in enumerate(counts, start=1) if n > 0]
    last = nonzero[-1]
    if counts[-1] == 0 or counts[-2] == 0:
        guess = min(max(round(_log_q(counts[last - 1], q) / last), 0), ambient)
        return DimEstimate(counts, q, ambient, guess, False, "growth")

    def step(k: int) -> int:
        return round((math.log(counts[k - 1]) - math.log(counts[k - 2])) / math.log(q))

    e = step(K)
    agree = True
    if K >= 3 and counts[K - 3] > 0:
        agree = step(K - 1) == e
    elif K >= 3:
        agree = False

    in_window = False
    if counts[0] > 0:
        expected = Fraction(counts[0] * q ** ((K - 1) * e)) if e >= 0 else Fraction(counts[0], q ** ((K - 1) * -e))
        ratio = Fraction(counts[-1]) / expected
        low, high = CERTAINTY_WINDOW
        in_window = Fraction(low) <= ratio <= Fraction(high)

    clamped = min(max(e, 0), ambient)
    certain = agree and in_window and clamped == e
    return DimEstimate(counts, q, ambient, clamped, certain, "growth")


# ─── Linear Sections of Rank Loci ───

def section_degree_bound(c: int, ell: int) -> int:
    """
    J = (c+1)^(ell-1): a nonempty rank-<=c locus inside an ell-dimensional
    section has a point over GF(q^j) for some j <= J.

    Positive-dimensional loci meet a rational hyperplane, which lowers ell.
    Finite loci are cut out by (c+1)-minors, forms of degree c+1 in ell
    variables, so Bezout bounds their Galois orbits by J.
    """
    return (c + 1) ** (ell - 1)


def section_work(q: int, c: int, ell: int) -> int:
    """Projective points checked by section_avoids_locus: GF(q^j) for J/2 < j <= J."""
    J = section_degree_bound(c, ell)
    return sum((q ** (j * ell) - 1) // (q ** j - 1) for j in range(J // 2 + 1, J + 1))


def _section_meets_locus(T: FqTensor, basis: np.ndarray, c: int, degrees: Sequence[int]) -> bool:
    """Whether some nonzero u over GF(q^j), j in `degrees`, in the span of `basis` has rank T_u <= c."""
    F = T.field
    section = assemble_slices(F, np.asarray(basis, dtype=np.int64), mode_slices(T))
    restricted = FqTensor(F, np.moveaxis(section, 0, -1))
    for j in degrees:
        E = extension_of(F, j)
        slices = mode_slices(extend_field(restricted, j))
        points = projective_points(E, basis.shape[0])
        for start, stop in chunk_ranges(points.shape[0]):
            ranks = batch_rank(E, assemble_slices(E, points[start:stop], slices))
            if (ranks <= c).any():
                return True
    return False


def section_avoids_locus(T: FqTensor, basis: np.ndarray, c: int) -> bool:
    """
    True iff rank T_u > c for every nonzero u in the span of `basis`, over
    the algebraic closure.

    Every j <= J has a multiple in (J/2, J], so checking those fields
    covers all points of degree <= J.
    """
    J = section_degree_bound(c, basis.shape[0])
    return not _section_meets_locus(T, basis, c, range(J // 2 + 1, J + 1))


def _candidate_sections(F: FieldSpec, n: int, ell: int, count: int, seed: int):
    """Every ell-subspace of F^n when there are at most `count`, else `count` random ones."""
    if gaussian_binomial(ell, n, F.q) <= count:
        yield from enumerate_subspaces(F, n, ell)
        return
    rng = np.random.default_rng(seed)
    for _ in range(count):
        basis = rng.integers(0, F.q, size=(ell, n), dtype=np.int64)
        if rank(FqMatrix(F, basis)) == ell:
            yield basis


def _witness_over(T: FqTensor, c: int, ell: int, seed: int, settings) -> Optional[np.ndarray]:
    F = T.field
    J = section_degree_bound(c, ell)
    if F.q ** J > LAB.MAX_FIELD_SIZE or section_work(F.q, c, ell) > settings.SECTION_BUDGET:
        return None
    quick = [j for j in (1, 2) if j <= J]
    full_checks = 0
    for basis in _candidate_sections(F, T.dims[2], ell, settings.SECTION_CANDIDATES, seed):
        if _section_meets_locus(T, basis, c, quick):
            continue
        if section_avoids_locus(T, basis, c):
            return basis
        full_checks += 1
        if full_checks >= settings.SECTION_TRIES:
            break
    return None


def codim_witness(T: FqTensor, c: int, ell: int, seed: int = 0) -> Optional[SectionWitness]:
    """
    A subspace L of dimension ell meeting {u : rank T_u <= c} only in 0,
    which proves codim {u : rank T_u <= c} >= ell. Subspaces defined over
    GF(q) are tried first, then over GF(q^s) up to SECTION_EXTENSION.

    Returns None when no candidate works, or when the degree bound leaves
    the field cap or SECTION_BUDGET.

    Raises:
        OrderUnsupported: T is not of order 3.
    """
    if T.order != 3:
        raise OrderUnsupported(f"codim_witness needs an order-3 tensor, got order {T.order}")
    if not 1 <= ell <= T.dims[2] or c < 0:
        return None
    settings = get_settings()
    for s in range(1, settings.SECTION_EXTENSION + 1):
        if T.field.q ** s > LAB.MAX_FIELD_SIZE:
            break
        lifted = extend_field(T, s)
        basis = _witness_over(lifted, c, ell, seed, settings)
        if basis is not None:
            logger.debug("codim_witness_found", field=lifted.field.name, dims=list(T.dims), c=c, ell=ell)
            return SectionWitness(c, ell, lifted.field, basis)
    return None


def _sharpen_strata(
    T: FqTensor, strata: List[StratumContribution]
) -> Tuple[List[StratumContribution], List[int]]:
    """
    Lift uncertain rank strata to the smallest certain contribution when a
    linear section proves their codimension large enough.
    """
    settled = [s.contribution for s in strata if s.certain]
    if not settled:
        return strata, []
    target = min(settled)
    sharpened, lifted = [], []
    for s in strata:
        if s.role != "interior" or s.certain or s.lower >= target:
            sharpened.append(s)
            continue
        if codim_witness(T, s.c, target - s.c, seed=s.c) is not None:
            s = replace(s, codim=max(s.codim, target - s.c), contribution=max(s.contribution, target), lower=target)
            lifted.append(s.c)
        sharpened.append(s)
    return sharpened, lifted


# ─── Geometric Rank ───

def _flattening_bound(T: FqTensor) -> int:
    d = T.order
    best = None
    for mask in range(1, 2 ** d - 1):
        J = [j + 1 for j in range(d) if mask >> j & 1]
        r = rank(flatten(T, J))
        best = r if best is None else min(best, r)
    return best if best is not None else 0


def inner_degree(Q: int, K: int) -> int:
    """Largest k <= K with Q^k within the field cap (at least 1)."""
    k = 1
    while k < K and Q ** (k + 1) <= LAB.MAX_FIELD_SIZE:
        k += 1
    return k


def strata_work(dims: Sequence[int], q: int, K: int) -> int:
    """
    Slices whose rank a geometric_rank call enumerates. Orders above 3
    recurse over the projective points of the last mode, with the inner
    K clamped by inner_degree.
    """
    dims = tuple(dims)
    if len(dims) < 3:
        return 0
    if len(dims) == 3:
        return sum(q ** (k * dims[2]) for k in range(1, K + 1))
    total = 0
    for k in range(1, K + 1):
        Q = q ** k
        points = (Q ** dims[-1] - 1) // (Q - 1)
        total += points * strata_work(dims[:-1], Q, inner_degree(Q, K))
    return total


def _invariant_profile(
    T: FqTensor, K: int, budget: int, workers: Optional[int]
) -> Tuple[StratumProfile, bool]:
    """Strata counts for k = 1..K; the flag says whether every invariant was certain."""
    n_d = T.dims[-1]
    if T.order == 3:
        profile = StratumProfile(T.field.q, n_d, "rank")
        for k in range(1, K + 1):
            profile.counts[k] = rank_strata(T, k, budget=budget, workers=workers)
        return profile, True

    profile = StratumProfile(T.field.q, n_d, "geometric_rank")
    all_certain = True
    for k in range(1, K + 1):
        E = extension_of(T.field, k)
        Text = extend_field(T, k)
        inner_K = inner_degree(E.q, K)
        counts: Counter = Counter({0: 1})
        for u in projective_points(E, n_d):
            inner = FqTensor(E, contract_axis(E, Text.data, T.order - 1, u))
            result = geometric_rank(inner, inner_K, budget=budget, workers=workers)
            all_certain = all_certain and result.certain
            counts[result.value] += E.q - 1
        profile.counts[k] = dict(sorted(counts.items()))
    return profile, all_certain


def geometric_rank(
    T: FqTensor,
    K: Optional[int] = None,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> GeometricRank:
    """
    GR(T) = min_c (codim X_c + c), contracting modes 2..d.

    Order 2 returns the matrix rank. Order 3 counts rank strata over
    GF(q^k), k = 1..K. Higher orders recurse on the slices T_u.

    Raises:
        OrderUnsupported: order below 2.
        BudgetExceeded: an enumeration exceeds its budget.
    """
    if T.order < 2:
        raise OrderUnsupported(f"geometric_rank needs order >= 2, got {T.order}")
    if T.order == 2:
        r = rank(flatten(T, [1]))
        return GeometricRank(r, True, None, flattening_bound=r)

    K = get_settings().DEFAULT_K if K is None else int(K)
    if K < 1:
        raise BadParams(f"K must be >= 1, got {K}")
    budget = _budget(budget)
    q = T.field.q
    n_d = T.dims[-1]
    if T.order > 3:
        require_budget("geometric_rank", strata_work(T.dims, q, K), budget)

    profile, inner_certain = _invariant_profile(T, K, budget, workers)
    profile.check_totals()
    notes: List[str] = []
    if not inner_certain:
        notes.append("some slice invariants were uncertain")

    kernel_codim = rank(flatten(T, [T.order]))
    c_top = max(profile.invariants())
    q_K = q ** K
    if T.order == 3:
        generic_certain = q_K > min(T.dims[0], T.dims[1])
    else:
        generic_certain = inner_certain and 2 * profile.counts[K].get(c_top, 0) > q_K ** n_d

    strata: List[StratumContribution] = []
    for c in profile.invariants():
        series = profile.series(c)
        if c == 0:
            strata.append(StratumContribution(c, "kernel", kernel_codim, kernel_codim, kernel_codim, True))
            continue
        if c == c_top:
            strata.append(StratumContribution(c, "generic", 0, c, c, generic_certain))
            continue
        est = estimate_dim(series, q, n_d)
        codim = max(est.codim, 1)
        certain = est.certain and inner_certain
        contribution = codim + c
        strata.append(
            StratumContribution(c, "interior", codim, contribution, contribution if certain else c + 1, certain, est)
        )

    if T.order == 3:
        strata, lifted = _sharpen_strata(T, strata)
        if lifted:
            notes.append(f"linear sections bound strata {lifted} from below")
    value = min(s.contribution for s in strata)
    achieved = any(s.certain and s.contribution == value for s in strata)
    undercut = any(not s.certain and s.lower < value for s in strata)
    certain = achieved and not undercut
    if not certain:
        notes.append("raise K: an uncertain stratum could change the minimum")

    bound = _flattening_bound(T)
    if value > bound:
        notes.append(f"estimate {value} exceeded the flattening bound {bound}")
        value, certain = bound, False

    logger.info("geometric_rank_computed", dims=list(T.dims), field=T.field.name, K=K, value=value, certain=certain)
    return GeometricRank(value, certain, profile, strata, bound, notes)


# ─── Z-counting, Bias, Analytic Rank ───

def z_count(
    T: FqTensor,
    k: int = 1,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> int:
    """
    |{(u_2, ..., u_d) over GF(q^k) : <T, u_2 ⊗ ... ⊗ u_d> = 0}|.

    Raises:
        OrderUnsupported: order below 2.
        BudgetExceeded: Π_{i>=3} q^{k·n_i} exceeds the budget.
    """
    if T.order < 2:
        raise OrderUnsupported(f"z_count needs order >= 2, got {T.order}")
    budget = _budget(budget)
    E = extension_of(T.field, k)
    require_budget("z_count", E.q ** sum(T.dims[2:]), budget)
    return _z_count_over(extend_field(T, k), budget, workers)


def _z_count_over(T: FqTensor, budget: int, workers: Optional[int]) -> int:
    Q = T.field.q
    if T.order == 2:
        return Q ** (T.dims[1] - rank(flatten(T, [1])))
    if T.order == 3:
        n2 = T.dims[1]
        strata = rank_strata(T, 1, budget=budget, workers=workers)
        return sum(n * Q ** (n2 - c) for c, n in strata.items())
    total = Q ** sum(T.dims[1:-1])
    for u in projective_points(T.field, T.dims[-1]):
        inner = FqTensor(T.field, contract_axis(T.field, T.data, T.order - 1, u))
        total += (Q - 1) * _z_count_over(inner, budget, workers)
    return total


def bias_and_ar(T: FqTensor, budget: Optional[int] = None, workers: Optional[int] = None) -> BiasValue:
    """
    Exact bias Z/q^E with E = n_2 + ... + n_d, and the analytic rank
    E - log_q Z.
    """
    Z = z_count(T, 1, budget=budget, workers=workers)
    E = sum(T.dims[1:])
    q = T.field.q
    if not 1 <= Z <= q ** E:
        raise InvariantViolation(f"Z = {Z} outside [1, q^E = {q ** E}]")
    return BiasValue(Z, E, q, T.field.name)


def codim_from_z_growth(T: FqTensor, K: Optional[int] = None, budget: Optional[int] = None) -> Tuple[int, bool]:
    """Codimension of the annihilating variety from z_count growth over k = 1..K."""
    K = get_settings().DEFAULT_K if K is None else int(K)
    ambient = sum(T.dims[1:])
    counts = [z_count(T, k, budget=budget) for k in range(1, K + 1)]
    est = estimate_dim(counts, T.field.q, ambient)
    return est.codim, est.certain


# ─── Counting Bounds ───

def gr_upper_via_counting(T: FqTensor, c: int, m: int, C1: float, C2: float) -> float:
    """
    Diagnostic bound C2·(c/C1 + n_d - log_q m) for a stratum of m points.

    Raises:
        BadConstants: C1 or C2 not positive.
    """
    if C1 <= 0 or C2 <= 0:
        raise BadConstants(f"C1 and C2 must be positive, got C1={C1}, C2={C2}")
    if m < 1:
        raise BadParams(f"m must be >= 1, got {m}")
    return C2 * (c / C1 + T.dims[-1] - _log_q(int(m), T.field.q))


def gaussian_binomial(c: int, n: int, q: int) -> int:
    """
    Number of c-dimensional subspaces of GF(q)^n.

    Raises:
        BadRange: unless 0 <= c <= n and q >= 2.
    """
    if not 0 <= c <= n or q < 2:
        raise BadRange(f"gaussian_binomial needs 0 <= c <= n and q >= 2, got c={c}, n={n}, q={q}")
    num = den = 1
    for i in range(c):
        num *= q ** n - q ** i
        den *= q ** c - q ** i
    value, remainder = divmod(num, den)
    if remainder:
        raise InvariantViolation(f"Gaussian binomial division left remainder {remainder}")
    return value


def infinite_field_gr_bound(Q: int) -> int:
    """2Q² + 3Q."""
    return 2 * Q * Q + 3 * Q


def finite_field_gr_bound(Q: int, c1: float, c2: float) -> Fraction:
    """(2c2/c1)Q² + (2c2/c1 + c2)Q + (2c2 - c2/c1)."""
    if c1 <= 0 or c2 <= 0:
        raise BadConstants(f"c1 and c2 must be positive, got c1={c1}, c2={c2}")
    c1, c2 = Fraction(c1), Fraction(c2)
    return 2 * c2 / c1 * Q * Q + (2 * c2 / c1 + c2) * Q + (2 * c2 - c2 / c1)


def ar_stability_ratio(ar: float, gr: int, C1: float, C2: float) -> StabilityRatio:
    if C1 <= 0 or C2 <= 0:
        raise BadConstants(f"C1 and C2 must be positive, got C1={C1}, C2={C2}")
    tol = 1e-9
    return StabilityRatio(
        ar=ar,
        gr=gr,
        C1=C1,
        C2=C2,
        lower_ok=C1 * ar <= gr + tol,
        upper_ok=gr <= C2 * ar + tol,
        ratio=(gr / ar) if ar > tol else None,
    )


def low_rank_covering(
    T: FqTensor,
    c: int,
    k: int = 1,
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> CoveringReport:
    """
    Covering data for X = {u : rank(T_u) <= 2c(c+1) - 1} over GF(q^k).

    When every (c+1)-dimensional subspace of mode-3 covectors meets X
    outside 0, the nonzero points of X number at least
    (Q^{n3} - 1)/(Q^{c+1} - 1); a violation raises InvariantViolation.
    """
    if T.order != 3:
        raise OrderUnsupported(f"low_rank_covering needs an order-3 tensor, got order {T.order}")
    if c < 0:
        raise BadParams(f"c must be >= 0, got {c}")
    budget = _budget(budget)
    E = extension_of(T.field, k)
    Q, n3 = E.q, T.dims[2]
    threshold = 2 * c * (c + 1) - 1

    ranks = slice_rank_array(T, k, budget=budget, workers=workers)
    m = int(np.count_nonzero(ranks <= threshold)) - (1 if threshold >= 0 else 0)

    if c + 1 > n3:
        return CoveringReport(c, threshold, k, m, Fraction(0), True, True)

    bound = Fraction(Q ** n3 - 1, Q ** (c + 1) - 1)
    if n3 >= 1 and c >= 0 and Fraction(gaussian_binomial(c + 1, n3, Q), gaussian_binomial(c, n3 - 1, Q)) != bound:
        raise InvariantViolation("subspace count ratio disagrees with the closed form")

    work = gaussian_binomial(c + 1, n3, Q) * Q ** (c + 1)
    covers: Optional[bool] = None
    if work <= budget:
        bases = subspace_batches(E, n3, c + 1)
        coeffs = vectors_from_indices(np.arange(1, Q ** (c + 1), dtype=np.int64), c + 1, Q)
        vecs = E.vsum(E.vmul(coeffs[None, :, :, None], bases[:, None, :, :]), axis=2)
        powers = Q ** np.arange(n3 - 1, -1, -1, dtype=np.int64)
        idx = (vecs * powers).sum(axis=-1)
        covers = bool((ranks[idx] <= threshold).any(axis=1).all())

    bound_holds = m >= bound
    if covers and not bound_holds:
        raise InvariantViolation(f"covering holds but |X| - 1 = {m} < {bound}")
    return CoveringReport(c, threshold, k, m, bound, covers, bound_holds)
