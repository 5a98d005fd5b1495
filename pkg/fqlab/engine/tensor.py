"""
Dense Tensors over GF(q).

FqTensor stores its entries as a row-major numpy array of canonical field
integers. Modes are numbered from 1 in every public signature; covectors act
by contraction, linear maps by restriction (g_1 ⊗ ... ⊗ g_d)(T).

The named-family registry builds the standard test tensors: identity I_r,
the W tensor, matrix multiplication, seeded random tensors, diagonals,
zero tensors and the two-slice companion construction.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from fqlab.engine.errors import (
    BadParams,
    BadSubset,
    DuplicateMode,
    FieldMismatch,
    IndexOutOfRange,
    ModeOutOfRange,
    OrderMismatch,
    ShapeMismatch,
    UnknownFamily,
)
from fqlab.engine.fqlinalg import FqMatrix
from fqlab.engine.gf import FieldSpec, embedding_table, extension_of


# ─── Domain Types ───

@dataclass(frozen=True, eq=False)
class FqTensor:
    """Order-d tensor over a finite field. Order 0 holds a single scalar."""
    field: FieldSpec
    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.int64, copy=True)
        if arr.size and (arr.min() < 0 or arr.max() >= self.field.q):
            raise ShapeMismatch(f"Tensor entries outside GF({self.field.name})")
        if any(n < 1 for n in arr.shape):
            raise ShapeMismatch(f"Every dimension must be >= 1, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_entries(cls, field: FieldSpec, dims: Sequence[int], entries: Sequence[int]) -> "FqTensor":
        dims = tuple(int(n) for n in dims)
        entries = np.asarray(list(entries), dtype=np.int64)
        if entries.size != int(np.prod(dims, dtype=np.int64)):
            raise ShapeMismatch(f"{entries.size} entries do not fill dims {list(dims)}")
        return cls(field, entries.reshape(dims))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def entries(self) -> List[int]:
        return self.data.reshape(-1).tolist()

    @property
    def scalar(self) -> int:
        if self.order != 0:
            raise OrderMismatch(f"Tensor of order {self.order} is not a scalar")
        return int(self.data)

    def is_zero(self) -> bool:
        return not self.data.any()

    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.data))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FqTensor)
            and other.field == self.field
            and other.dims == self.dims
            and bool(np.array_equal(other.data, self.data))
        )

    def __hash__(self) -> int:
        return hash((self.field, self.dims, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"FqTensor(GF({self.field.name}), dims={list(self.dims)}, nnz={self.nonzero_count()})"


@dataclass(frozen=True)
class Covector:
    """A linear functional on mode `mode` (1-based)."""
    mode: int
    coords: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))


def basis_covector(mode: int, n: int, index: int) -> Covector:
    """Standard basis covector e_index (1-based) on a mode of dimension n."""
    coords = [0] * n
    coords[index - 1] = 1
    return Covector(mode, tuple(coords))


# ─── Internal helpers ───

def _same_field(S: FqTensor, T: FqTensor) -> FieldSpec:
    if S.field != T.field:
        raise FieldMismatch(S.field.name, T.field.name)
    return S.field


def _check_mode(T: FqTensor, mode: int) -> None:
    if not 1 <= mode <= T.order:
        raise ModeOutOfRange(f"Mode {mode} is outside [1, {T.order}]")


def apply_mode(F: FieldSpec, data: np.ndarray, axis: int, g: np.ndarray) -> np.ndarray:
    """Apply the (m x n) matrix g to axis `axis` (0-based) of data."""
    moved = np.moveaxis(data, axis, -1)
    out = F.vsum(F.vmul(moved[..., None, :], g), axis=-1)
    return np.moveaxis(out, -1, axis)


def contract_axis(F: FieldSpec, data: np.ndarray, axis: int, u: np.ndarray) -> np.ndarray:
    """Contract axis `axis` (0-based) with the coordinate vector u."""
    moved = np.moveaxis(data, axis, -1)
    return F.vdot(moved, u, axis=-1)


# ─── Operations ───

def contract(T: FqTensor, covectors: Sequence[Covector]) -> FqTensor:
    """
    Contract T with covectors on distinct modes; remaining modes keep their
    order. Contracting every mode gives an order-0 tensor.

    Raises:
        ModeOutOfRange, DuplicateMode, ShapeMismatch.
    """
    modes = [c.mode for c in covectors]
    for mode in modes:
        _check_mode(T, mode)
    if len(set(modes)) != len(modes):
        raise DuplicateMode(f"Covector modes must be distinct, got {modes}")
    data = T.data
    for cov in sorted(covectors, key=lambda c: -c.mode):
        n = T.dims[cov.mode - 1]
        if len(cov.coords) != n:
            raise ShapeMismatch(f"Covector on mode {cov.mode} has length {len(cov.coords)}, expected {n}")
        u = np.asarray(cov.coords, dtype=np.int64)
        if u.size and (u.min() < 0 or u.max() >= T.field.q):
            raise FieldMismatch(T.field.name, "covector coordinates")
        data = contract_axis(T.field, data, cov.mode - 1, u)
    return FqTensor(T.field, data)


def slice(T: FqTensor, mode: int, index: int) -> FqTensor:  # noqa: A001
    """Coordinate slice <T, e_index> on a mode (both 1-based)."""
    _check_mode(T, mode)
    n = T.dims[mode - 1]
    if not 1 <= index <= n:
        raise IndexOutOfRange(f"Index {index} is outside [1, {n}] on mode {mode}")
    return FqTensor(T.field, np.take(T.data, index - 1, axis=mode - 1))


def restrict(T: FqTensor, maps: Sequence[FqMatrix]) -> FqTensor:
    """
    (g_1 ⊗ ... ⊗ g_d)(T) with g_j of shape m_j x n_j.

    Raises:
        ShapeMismatch, FieldMismatch.
    """
    if len(maps) != T.order:
        raise ShapeMismatch(f"Need {T.order} maps, got {len(maps)}")
    data = T.data
    for j, g in enumerate(maps):
        if g.field != T.field:
            raise FieldMismatch(T.field.name, g.field.name)
        if g.cols != T.dims[j]:
            raise ShapeMismatch(f"Map {j + 1} has {g.cols} columns, mode {j + 1} has dimension {T.dims[j]}")
        if g.rows == 0:
            raise ShapeMismatch(f"Map {j + 1} has no rows")
        data = apply_mode(T.field, data, j, g.entries)
    return FqTensor(T.field, data)


def direct_sum(S: FqTensor, T: FqTensor) -> FqTensor:
    """Block tensor with S leading and T trailing."""
    F = _same_field(S, T)
    if S.order != T.order:
        raise OrderMismatch(f"Orders differ: {S.order} vs {T.order}")
    dims = tuple(a + b for a, b in zip(S.dims, T.dims))
    out = np.zeros(dims, dtype=np.int64)
    out[tuple(np.s_[:a] for a in S.dims)] = S.data
    out[tuple(np.s_[a:] for a in S.dims)] = T.data
    return FqTensor(F, out)


def kronecker(S: FqTensor, T: FqTensor) -> FqTensor:
    """Kronecker product; index pair (i, i') maps to i·n + i' on every mode."""
    F = _same_field(S, T)
    if S.order != T.order:
        raise OrderMismatch(f"Orders differ: {S.order} vs {T.order}")
    d = S.order
    s_shape, t_shape = [], []
    for a, b in zip(S.dims, T.dims):
        s_shape += [a, 1]
        t_shape += [1, b]
    prod = F.vmul(S.data.reshape(s_shape), T.data.reshape(t_shape))
    return FqTensor(F, prod.reshape([a * b for a, b in zip(S.dims, T.dims)]) if d else prod)


def flatten(T: FqTensor, J: Iterable[int]) -> FqMatrix:
    """
    Flattening T_J: rows indexed by modes in J, columns by the rest, both
    row-major in ascending mode order.

    Raises:
        BadSubset: J empty, not proper, or with out-of-range modes.
    """
    J = sorted(set(int(j) for j in J))
    if not J or len(J) >= T.order or J[0] < 1 or J[-1] > T.order:
        raise BadSubset(f"{J} is not a proper nonempty subset of modes 1..{T.order}")
    rest = [j for j in range(1, T.order + 1) if j not in J]
    moved = np.transpose(T.data, [j - 1 for j in J] + [j - 1 for j in rest])
    rows = int(np.prod([T.dims[j - 1] for j in J]))
    return FqMatrix(T.field, moved.reshape(rows, -1))


def extend_field(T: FqTensor, k: int) -> FqTensor:
    """Reinterpret T over GF(q^k) through the subfield embedding."""
    if k == 1:
        return T
    ext = extension_of(T.field, k)
    table = embedding_table(T.field, ext)
    return FqTensor(ext, table[T.data])


def permute_modes(T: FqTensor, perm: Sequence[int]) -> FqTensor:
    """Mode permutation; perm lists the old mode placed at each new position (1-based)."""
    if sorted(perm) != list(range(1, T.order + 1)):
        raise BadParams(f"{list(perm)} is not a permutation of 1..{T.order}")
    return FqTensor(T.field, np.transpose(T.data, [p - 1 for p in perm]))


def mode_slices(T: FqTensor, mode: Optional[int] = None) -> np.ndarray:
    """All slices along a mode (default: the last), stacked first."""
    mode = T.order if mode is None else mode
    _check_mode(T, mode)
    return np.moveaxis(T.data, mode - 1, 0)


def combine_slices(T: FqTensor, coeff: Sequence[int]) -> np.ndarray:
    """Σ_l coeff[l]·T_l over the last-mode slices T_l."""
    return contract_axis(T.field, T.data, T.order - 1, np.asarray(coeff, dtype=np.int64))


def zero(field: FieldSpec, dims: Sequence[int]) -> FqTensor:
    return FqTensor(field, np.zeros(tuple(dims), dtype=np.int64))


# ─── Family Registry ───

def _identity(field: FieldSpec, r: int = 2, d: int = 3) -> FqTensor:
    if r < 1 or d < 1:
        raise BadParams(f"identity needs r >= 1 and d >= 1, got r={r}, d={d}")
    data = np.zeros((r,) * d, dtype=np.int64)
    for i in range(r):
        data[(i,) * d] = 1
    return FqTensor(field, data)


def _w_tensor(field: FieldSpec, d: int = 3) -> FqTensor:
    if d < 2:
        raise BadParams(f"W needs d >= 2, got {d}")
    data = np.zeros((2,) * d, dtype=np.int64)
    for j in range(d):
        idx = [0] * d
        idx[j] = 1
        data[tuple(idx)] = 1
    return FqTensor(field, data)


def _matmul(field: FieldSpec, a: int = 2, b: int = 2, c: int = 2) -> FqTensor:
    if min(a, b, c) < 1:
        raise BadParams(f"matmul needs positive sizes, got {(a, b, c)}")
    data = np.zeros((a * b, b * c, c * a), dtype=np.int64)
    for i in range(a):
        for k in range(b):
            for j in range(c):
                data[i * b + k, k * c + j, j * a + i] = 1
    return FqTensor(field, data)


def _random(field: FieldSpec, dims: Sequence[int] = (2, 2, 2), seed: Optional[int] = None) -> FqTensor:
    if seed is None:
        raise BadParams("random family needs an explicit seed")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return FqTensor(field, rng.integers(0, field.q, size=tuple(dims), dtype=np.int64))


def _diagonal(field: FieldSpec, values: Sequence[int] = (1,), d: int = 3) -> FqTensor:
    values = [int(v) for v in values]
    if not values:
        raise BadParams("diagonal needs at least one value")
    n = len(values)
    data = np.zeros((n,) * d, dtype=np.int64)
    for i, v in enumerate(values):
        data[(i,) * d] = field.check(v)
    return FqTensor(field, data)


def _zero(field: FieldSpec, dims: Sequence[int] = (2, 2, 2)) -> FqTensor:
    return zero(field, dims)


def companion_matrix(field: FieldSpec, poly: Sequence[int]) -> np.ndarray:
    """Companion matrix of the monic polynomial x^n + Σ poly[i] x^i."""
    n = len(poly)
    C = np.zeros((n, n), dtype=np.int64)
    for i in range(1, n):
        C[i, i - 1] = 1
    for i, c in enumerate(poly):
        C[i, n - 1] = field.neg(field.check(int(c)))
    return C


def _companion(field: FieldSpec, poly: Sequence[int] = (1, 1, 0, 0)) -> FqTensor:
    """n x n x 2 tensor with slices I_n and the companion matrix of poly."""
    if not poly:
        raise BadParams("companion needs a polynomial of degree >= 1")
    n = len(poly)
    data = np.stack([np.eye(n, dtype=np.int64), companion_matrix(field, poly)], axis=-1)
    return FqTensor(field, data)


FAMILIES: Dict[str, Callable[..., FqTensor]] = {
    "identity": _identity,
    "W": _w_tensor,
    "matmul": _matmul,
    "random": _random,
    "diagonal": _diagonal,
    "zero": _zero,
    "companion": _companion,
}


def family(name: str, field: FieldSpec, **params) -> FqTensor:
    """
    Build a named tensor family.

    Raises:
        UnknownFamily: name not registered.
        BadParams: parameters rejected by the family.
    """
    if name not in FAMILIES:
        raise UnknownFamily(f"Unknown family '{name}'. Must be one of: {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](field, **params)
    except TypeError as exc:
        raise BadParams(f"Bad parameters for family '{name}': {exc}") from exc
