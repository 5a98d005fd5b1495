"""
Exact Dense Linear Algebra over GF(q).

Pivoting is deterministic everywhere: columns are scanned left to right and
the first row (in index order) holding a nonzero entry becomes the pivot.

Two rank kernels serve the counting hot path:
  - a generic batched kernel on (B, r, c) integer arrays, any field;
  - a bit-packed kernel for GF(2^k): each row is one uint64 word holding
    c lanes of k bits, so a whole batch eliminates with a handful of numpy
    word operations per column. Usable when c·k <= 64.
`batch_rank` dispatches between them; both agree on every input.
"""

from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from fqlab.engine.constants import LAB
from fqlab.engine.errors import DimensionMismatch, FieldMismatch, ShapeMismatch
from fqlab.engine.gf import FieldSpec


# ─── Matrix Type ───

@dataclass(frozen=True, eq=False)
class FqMatrix:
    """Dense matrix over a finite field, entries as an int64 (rows, cols) array."""
    field: FieldSpec
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=np.int64)
        if arr.ndim != 2:
            raise ShapeMismatch(f"FqMatrix needs a 2-D entry array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.field.q):
            raise ShapeMismatch(f"Matrix entries outside GF({self.field.name})")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def from_rows(cls, field: FieldSpec, rows: Sequence[Sequence[int]], cols: Optional[int] = None) -> "FqMatrix":
        rows = [list(r) for r in rows]
        if not rows:
            return cls(field, np.zeros((0, cols or 0), dtype=np.int64))
        return cls(field, np.array(rows, dtype=np.int64))

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> "FqMatrix":
        return cls(field, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "FqMatrix":
        return cls(field, np.eye(n, dtype=np.int64))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def transpose(self) -> "FqMatrix":
        return FqMatrix(self.field, self.entries.T)

    def __matmul__(self, other: "FqMatrix") -> "FqMatrix":
        if other.field != self.field:
            raise FieldMismatch(self.field.name, other.field.name)
        if self.cols != other.rows:
            raise DimensionMismatch(f"Cannot multiply {self.shape} by {other.shape}")
        return FqMatrix(self.field, field_matmul(self.field, self.entries, other.entries))

    def matvec(self, x: Sequence[int]) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.cols,):
            raise DimensionMismatch(f"Vector of length {x.shape[0]} against {self.cols} columns")
        return self.field.vdot(self.entries, x[None, :], axis=-1)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FqMatrix)
            and other.field == self.field
            and other.shape == self.shape
            and bool(np.array_equal(other.entries, self.entries))
        )

    def tolist(self) -> List[List[int]]:
        return self.entries.tolist()


def field_matmul(F: FieldSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    A (..., n) times B (n, m) over F, batched over leading axes of A.
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if F.m == 1 and A.shape[-1] * (F.p - 1) ** 2 < 2 ** 62:
        return (A @ B) % F.p
    return F.vsum(F.vmul(A[..., :, None], B), axis=-2)


# ─── Echelon Forms ───

def rref(F: FieldSpec, M: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """
    Reduced row echelon form with deterministic pivoting.

    Returns:
        (R, pivots): R has the nonzero rows first, pivots lists pivot columns.
    """
    R = np.array(M, dtype=np.int64, copy=True)
    rows, cols = R.shape
    pivots: List[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(R[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            R[[r, piv]] = R[[piv, r]]
        R[r] = F.vmul(R[r], F.inv(int(R[r, c])))
        factors = R[:, c].copy()
        factors[r] = 0
        if factors.any():
            R = F.vsub(R, F.vmul(factors[:, None], R[r][None, :]))
        pivots.append(c)
        r += 1
    return R, pivots


def rank(M: FqMatrix) -> int:
    """Rank over the matrix's field."""
    if M.rows == 0 or M.cols == 0:
        return 0
    return int(batch_rank(M.field, M.entries[None, :, :])[0])


def kernel_basis(M: FqMatrix) -> List[np.ndarray]:
    """
    Basis of {x : Mx = 0}, itself in reduced echelon form.
    Size is cols - rank(M).
    """
    F = M.field
    R, pivots = rref(F, M.entries)
    free = [c for c in range(M.cols) if c not in pivots]
    if not free:
        return []
    basis = np.zeros((len(free), M.cols), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, pc in enumerate(pivots):
            basis[i, pc] = F.neg(int(R[row, f]))
    K, kpiv = rref(F, basis)
    return [K[i].copy() for i in range(len(kpiv))]


def solve(M: FqMatrix, y: Sequence[int]) -> Optional[np.ndarray]:
    """
    One solution of Mx = y with free variables set to 0, or None.

    Raises:
        DimensionMismatch: len(y) != rows.
    """
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (M.rows,):
        raise DimensionMismatch(f"Right-hand side has length {y.shape[0] if y.ndim else 0}, matrix has {M.rows} rows")
    F = M.field
    aug = np.concatenate([M.entries, y[:, None]], axis=1)
    R, pivots = rref(F, aug)
    if pivots and pivots[-1] == M.cols:
        return None
    x = np.zeros(M.cols, dtype=np.int64)
    for row, pc in enumerate(pivots):
        x[pc] = R[row, M.cols]
    return x


def inverse(M: FqMatrix) -> Optional[FqMatrix]:
    """Inverse of a square matrix, or None when singular."""
    if M.rows != M.cols:
        raise ShapeMismatch(f"Only square matrices are invertible, got {M.shape}")
    n = M.rows
    R, pivots = rref(M.field, np.concatenate([M.entries, np.eye(n, dtype=np.int64)], axis=1))
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        return None
    return FqMatrix(M.field, R[:, n:])


def complete_basis(F: FieldSpec, rows: np.ndarray, n: int) -> np.ndarray:
    """
    Extend independent rows to a basis of F^n with standard unit vectors
    (non-pivot columns of the echelon form), returned below the input rows.
    """
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, n)
    _, pivots = rref(F, rows) if rows.shape[0] else (None, [])
    extra = [c for c in range(n) if c not in pivots]
    unit = np.zeros((len(extra), n), dtype=np.int64)
    for i, c in enumerate(extra):
        unit[i, c] = 1
    return np.concatenate([rows, unit], axis=0)


# ─── Batched Rank Kernels ───

def _generic_batch_rank(F: FieldSpec, mats: np.ndarray) -> np.ndarray:
    M = np.array(mats, dtype=np.int64, copy=True)
    B, r, c = M.shape
    rank_ = np.zeros(B, dtype=np.int64)
    row_idx = np.arange(r)
    for j in range(c):
        col = M[:, :, j]
        cand = (col != 0) & (row_idx[None, :] >= rank_[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.flatnonzero(has)
        piv = np.argmax(cand[b], axis=1)
        tgt = rank_[b]
        prow = M[b, piv].copy()
        M[b, piv] = M[b, tgt]
        M[b, tgt] = prow
        pinv = F.vinv(prow[:, j])
        prow = F.vmul(prow, pinv[:, None])
        below = row_idx[None, :] > tgt[:, None]
        coef = np.where(below, M[b, :, j], 0)
        M[b] = F.vsub(M[b], F.vmul(coef[:, :, None], prow[:, None, :]))
        rank_[b] += 1
    return rank_


def _lane_products(F: FieldSpec) -> np.ndarray:
    """prod[b][c] = c · x^b in GF(2^k), as uint64."""
    k = F.m
    tab = np.zeros((k, F.q), dtype=np.uint64)
    elems = F.elements()
    for b in range(k):
        tab[b] = F.vmul(elems, 1 << b).astype(np.uint64)
    return tab


_LANE_CACHE = {}


def pack_rows(F: FieldSpec, mats: np.ndarray) -> np.ndarray:
    """Pack (B, r, c) GF(2^k) entries into (B, r) uint64 words, lane j at bits j·k."""
    k = F.m
    shifts = (np.arange(mats.shape[-1], dtype=np.uint64) * np.uint64(k))
    words = np.asarray(mats, dtype=np.uint64) << shifts
    return np.bitwise_or.reduce(words, axis=-1)


def _packed_batch_rank(F: FieldSpec, mats: np.ndarray) -> np.ndarray:
    k = F.m
    B, r, c = mats.shape
    if F not in _LANE_CACHE:
        _LANE_CACHE[F] = _lane_products(F)
    prod = _LANE_CACHE[F]
    lane_mask = np.uint64((1 << k) - 1)
    bit0 = np.uint64(sum(1 << (j * k) for j in range(c)))
    inv = F.inv_table.astype(np.int64)

    def scale(words: np.ndarray, coef: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast(words, coef).shape, dtype=np.uint64)
        for bit in range(k):
            spread = (words >> np.uint64(bit)) & bit0
            out ^= spread * prod[bit][coef]
        return out

    W = pack_rows(F, mats)
    rank_ = np.zeros(B, dtype=np.int64)
    row_idx = np.arange(r)
    for j in range(c):
        shift = np.uint64(j * k)
        lane = ((W >> shift) & lane_mask).astype(np.int64)
        cand = (lane != 0) & (row_idx[None, :] >= rank_[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.flatnonzero(has)
        piv = np.argmax(cand[b], axis=1)
        tgt = rank_[b]
        prow = W[b, piv].copy()
        W[b, piv] = W[b, tgt]
        W[b, tgt] = prow
        pval = lane[b, piv]
        prow = scale(prow, inv[pval])
        coef = ((W[b] >> shift) & lane_mask).astype(np.int64)
        coef = np.where(row_idx[None, :] > tgt[:, None], coef, 0)
        W[b] ^= scale(prow[:, None], coef)
        rank_[b] += 1
    return rank_


def packed_applicable(F: FieldSpec, rows: int, cols: int) -> bool:
    return F.p == 2 and min(rows, cols) * F.m <= LAB.PACKED_WORD_BITS


def batch_rank(F: FieldSpec, mats: np.ndarray, kernel: str = "auto") -> np.ndarray:
    """
    Ranks of a batch of matrices of shape (B, r, c).

    Args:
        kernel: "auto", "generic" or "packed".
    """
    mats = np.asarray(mats, dtype=np.int64)
    B, r, c = mats.shape
    if B == 0:
        return np.zeros(0, dtype=np.int64)
    if r == 0 or c == 0:
        return np.zeros(B, dtype=np.int64)
    use_packed = kernel == "packed" or (kernel == "auto" and packed_applicable(F, r, c))
    if use_packed:
        if F.p != 2 or min(r, c) * F.m > LAB.PACKED_WORD_BITS:
            raise ShapeMismatch(f"Packed kernel needs GF(2^k) and lanes within {LAB.PACKED_WORD_BITS} bits")
        if c * F.m > LAB.PACKED_WORD_BITS:
            mats = mats.transpose(0, 2, 1)
        return _packed_batch_rank(F, mats)
    return _generic_batch_rank(F, mats)


# ─── Enumeration Helpers ───

def vectors_from_indices(idx: np.ndarray, n: int, q: int) -> np.ndarray:
    """
    Decode integers into length-n vectors over [0, q), first coordinate most
    significant, so increasing integers enumerate vectors lexicographically.
    """
    idx = np.asarray(idx, dtype=np.int64)
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[..., None] // powers) % q


def all_vectors(F: FieldSpec, n: int, nonzero: bool = False) -> np.ndarray:
    start = 1 if nonzero else 0
    return vectors_from_indices(np.arange(start, F.q ** n, dtype=np.int64), n, F.q)


def echelon_pivot_sets(n: int, dim: int) -> Iterator[Tuple[int, ...]]:
    return combinations(range(n), dim)


def enumerate_subspaces(F: FieldSpec, n: int, dim: int) -> Iterator[np.ndarray]:
    """
    Every dim-dimensional subspace of F^n exactly once, as its reduced
    echelon basis (dim x n). Pivot sets are visited in lexicographic order,
    free entries in lexicographic order of their values.
    """
    if dim == 0:
        yield np.zeros((0, n), dtype=np.int64)
        return
    for pivots in echelon_pivot_sets(n, dim):
        pivot_set = set(pivots)
        free = [(i, c) for i, pc in enumerate(pivots) for c in range(pc + 1, n) if c not in pivot_set]
        for values in product(range(F.q), repeat=len(free)):
            basis = np.zeros((dim, n), dtype=np.int64)
            for i, pc in enumerate(pivots):
                basis[i, pc] = 1
            for (i, c), v in zip(free, values):
                basis[i, c] = v
            yield basis


def subspace_batches(F: FieldSpec, n: int, dim: int) -> np.ndarray:
    """All dim-dimensional subspaces of F^n stacked as (count, dim, n)."""
    bases = list(enumerate_subspaces(F, n, dim))
    if not bases:
        return np.zeros((0, dim, n), dtype=np.int64)
    return np.stack(bases)


def count_independent_tuples(q: int, n: int, r: int) -> int:
    """Ordered r-tuples of linearly independent vectors in GF(q)^n."""
    if r > n:
        return 0
    out = 1
    for j in range(r):
        out *= q ** n - q ** j
    return out


def independent_tuples(F: FieldSpec, n: int, r: int) -> np.ndarray:
    """
    All ordered r-tuples of independent vectors of F^n as (count, r, n),
    in lexicographic order of the tuple of canonical encodings.
    """
    if r == 0:
        return np.zeros((1, 0, n), dtype=np.int64)
    if r > n:
        return np.zeros((0, r, n), dtype=np.int64)
    vecs = all_vectors(F, n, nonzero=True)
    tuples = vecs[:, None, :]
    for _ in range(1, r):
        m = tuples.shape[0]
        ext = np.concatenate(
            [np.repeat(tuples, vecs.shape[0], axis=0), np.tile(vecs, (m, 1))[:, None, :]],
            axis=1,
        )
        keep = batch_rank(F, ext) == ext.shape[1]
        tuples = ext[keep]
    return tuples


def projective_points(F: FieldSpec, n: int) -> np.ndarray:
    """
    One vector per line through the origin of F^n: the first nonzero entry
    is 1. Ordered by leading position, then lexicographically.
    """
    blocks = []
    for lead in range(n):
        tail = n - lead - 1
        rest = vectors_from_indices(np.arange(F.q ** tail, dtype=np.int64), tail, F.q)
        block = np.zeros((rest.shape[0], n), dtype=np.int64)
        block[:, lead] = 1
        block[:, lead + 1:] = rest
        blocks.append(block)
    if not blocks:
        return np.zeros((0, 0), dtype=np.int64)
    return np.concatenate(blocks, axis=0)
