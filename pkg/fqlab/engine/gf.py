"""
Finite Field Arithmetic: GF(p^m) for q = p^m <= 2^16.

Elements are canonical integers in [0, q): the base-p digits of an element
are the coefficients (constant term first) of its residue modulo the field
modulus. The modulus is the monic irreducible of degree m with the smallest
canonical encoding, so every run on every platform builds the same field.

Two layers live here:
  - scalar arithmetic on Python ints (FieldSpec.add / mul / ... and Elem)
  - vectorized arithmetic on numpy int64 arrays (FieldSpec.vadd / vmul / ...)
    used by the linear-algebra and counting kernels.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from fqlab.engine.constants import LAB
from fqlab.engine.errors import (
    BadParams,
    DegreeTooLarge,
    DivisionByZero,
    FieldMismatch,
    NotAnExtension,
    NotPrime,
)
from fqlab.observability import logger


# ─── Integer helpers ───

def is_prime(n: int) -> bool:
    """Trial division; n is bounded by the field cap."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def prime_factors(n: int) -> List[int]:
    """Distinct prime factors of n, ascending."""
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def to_digits(value: int, p: int, m: int) -> List[int]:
    """Base-p digits of value, least significant first, padded to m."""
    out = []
    for _ in range(m):
        value, r = divmod(value, p)
        out.append(r)
    return out


def from_digits(digits: Sequence[int], p: int) -> int:
    value = 0
    for d in reversed(digits):
        value = value * p + d
    return value


# ─── Polynomials over GF(p), coefficient lists constant term first ───

def _poly_trim(a: List[int]) -> List[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_rem(a: Sequence[int], b: Sequence[int], p: int) -> List[int]:
    """Remainder of a modulo the monic polynomial b over GF(p)."""
    r = _poly_trim([x % p for x in a])
    db = len(b) - 1
    while len(r) - 1 >= db and r:
        shift = len(r) - 1 - db
        lead = r[-1]
        for i, c in enumerate(b):
            r[shift + i] = (r[shift + i] - lead * c) % p
        _poly_trim(r)
    return r


def is_irreducible(modulus: Sequence[int], p: int) -> bool:
    """
    Irreducibility of a monic polynomial by trial division against every
    monic polynomial of degree 1 .. deg/2.
    """
    m = len(modulus) - 1
    if m <= 1:
        return m == 1
    for deg in range(1, m // 2 + 1):
        for low in range(p ** deg):
            divisor = to_digits(low, p, deg) + [1]
            if not poly_rem(modulus, divisor, p):
                return False
    return True


def _smallest_irreducible(p: int, m: int) -> Tuple[int, ...]:
    # Candidates x^m + r(x) in increasing canonical order of r.
    for r in range(p ** m):
        candidate = to_digits(r, p, m) + [1]
        if is_irreducible(candidate, p):
            return tuple(candidate)
    raise AssertionError(f"no irreducible polynomial of degree {m} over GF({p})")


# ─── Field Specification ───

@dataclass(frozen=True, eq=False)
class FieldSpec:
    """
    A concrete finite field GF(p^m).

    exp/log tables are present when m > 1; prime fields use modular
    arithmetic and carry empty tables.
    """
    p: int
    m: int
    q: int
    modulus: Tuple[int, ...]
    generator: int
    exp: np.ndarray = field(repr=False)
    log: np.ndarray = field(repr=False)
    inv_table: np.ndarray = field(repr=False)
    # Odd characteristic extensions small enough for a full addition table
    add_table: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64), repr=False)

    # ─── identity ───

    @property
    def name(self) -> str:
        return str(self.p) if self.m == 1 else f"{self.p}^{self.m}"

    @property
    def is_binary(self) -> bool:
        return self.p == 2

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldSpec) and (self.p, self.m) == (other.p, other.m)

    def __hash__(self) -> int:
        return hash((self.p, self.m))

    def __repr__(self) -> str:
        return f"GF({self.name})"

    def __reduce__(self):
        return (build_field, (self.p, self.m))

    def check(self, value: int) -> int:
        if not 0 <= int(value) < self.q:
            raise BadParams(f"{value} is not an element of GF({self.name}); valid range is [0, {self.q})")
        return int(value)

    def elem(self, value: int) -> "Elem":
        return Elem(self.check(value), self)

    # ─── scalar arithmetic ───

    def add(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        if self.m == 1:
            return (a + b) % self.p
        da, db = to_digits(a, self.p, self.m), to_digits(b, self.p, self.m)
        return from_digits([(x + y) % self.p for x, y in zip(da, db)], self.p)

    def neg(self, a: int) -> int:
        if self.p == 2:
            return a
        if self.m == 1:
            return (-a) % self.p
        return from_digits([(-x) % self.p for x in to_digits(a, self.p, self.m)], self.p)

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.m == 1:
            return (a * b) % self.p
        return int(self.exp[(int(self.log[a]) + int(self.log[b])) % (self.q - 1)])

    def inv(self, a: int) -> int:
        if a == 0:
            raise DivisionByZero("inversion")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise DivisionByZero()
        return self.mul(a, self.inv(b))

    def pow(self, a: int, n: int) -> int:
        if n < 0:
            return self.pow(self.inv(a), -n)
        if a == 0:
            return 1 if n == 0 else 0
        if self.m == 1:
            return pow(a, n, self.p)
        return int(self.exp[(int(self.log[a]) * n) % (self.q - 1)])

    # ─── vectorized arithmetic (numpy int64 arrays, broadcasting) ───

    def _digits(self, a: np.ndarray) -> np.ndarray:
        powers = self.p ** np.arange(self.m, dtype=np.int64)
        return (np.asarray(a, dtype=np.int64)[..., None] // powers) % self.p

    def _undigits(self, d: np.ndarray) -> np.ndarray:
        powers = self.p ** np.arange(self.m, dtype=np.int64)
        return (d * powers).sum(axis=-1)

    def vadd(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.p == 2:
            return a ^ b
        if self.m == 1:
            return (a + b) % self.p
        if self.add_table.size:
            return self.add_table[a, b]
        return self._undigits((self._digits(a) + self._digits(b)) % self.p)

    def vneg(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.p == 2:
            return a
        if self.m == 1:
            return (-a) % self.p
        return self._undigits((-self._digits(a)) % self.p)

    def vsub(self, a, b) -> np.ndarray:
        return self.vadd(a, self.vneg(b))

    def vmul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.m == 1:
            return (a * b) % self.p
        out = self.exp[(self.log[a] + self.log[b]) % (self.q - 1)]
        return np.where((a == 0) | (b == 0), 0, out)

    def vinv(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise DivisionByZero("inversion")
        return self.inv_table[a]

    def vsum(self, a, axis: int = -1) -> np.ndarray:
        """Field sum along an axis."""
        a = np.asarray(a, dtype=np.int64)
        if self.p == 2:
            return np.bitwise_xor.reduce(a, axis=axis)
        if self.m == 1:
            return a.sum(axis=axis) % self.p
        digit_axis = axis if axis >= 0 else axis - 1
        return self._undigits(self._digits(a).sum(axis=digit_axis) % self.p)

    def vdot(self, a, b, axis: int = -1) -> np.ndarray:
        """Field inner product along an axis after broadcasting."""
        return self.vsum(self.vmul(a, b), axis=axis)

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def frobenius(self, a: int) -> int:
        return self.pow(a, self.p)


# ─── Scalar wrapper ───

@dataclass(frozen=True)
class Elem:
    """A field element bound to its field; operators refuse to mix fields."""
    value: int
    field: FieldSpec

    def _other(self, other) -> int:
        if isinstance(other, Elem):
            if other.field != self.field:
                raise FieldMismatch(self.field.name, other.field.name)
            return other.value
        return self.field.check(other)

    def __add__(self, other):
        return Elem(self.field.add(self.value, self._other(other)), self.field)

    __radd__ = __add__

    def __sub__(self, other):
        return Elem(self.field.sub(self.value, self._other(other)), self.field)

    def __rsub__(self, other):
        return Elem(self.field.sub(self._other(other), self.value), self.field)

    def __neg__(self):
        return Elem(self.field.neg(self.value), self.field)

    def __mul__(self, other):
        return Elem(self.field.mul(self.value, self._other(other)), self.field)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Elem(self.field.div(self.value, self._other(other)), self.field)

    def __rtruediv__(self, other):
        return Elem(self.field.div(self._other(other), self.value), self.field)

    def __pow__(self, n: int):
        return Elem(self.field.pow(self.value, n), self.field)

    def inv(self) -> "Elem":
        return Elem(self.field.inv(self.value), self.field)

    def __int__(self) -> int:
        return self.value

    def __bool__(self) -> bool:
        return self.value != 0


# ─── Construction ───

def _clmul_mod(a: int, b: int, modulus_int: int, m: int) -> int:
    """Carry-less multiplication modulo a binary polynomial of degree m."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> m & 1:
            a ^= modulus_int
    return out


def _poly_mulmod(a: int, b: int, p: int, modulus: Sequence[int]) -> int:
    m = len(modulus) - 1
    if p == 2:
        return _clmul_mod(a, b, from_digits(modulus, 2), m)
    da, db = to_digits(a, p, m), to_digits(b, p, m)
    prod = [0] * (2 * m - 1)
    for i, x in enumerate(da):
        if x:
            for j, y in enumerate(db):
                prod[i + j] = (prod[i + j] + x * y) % p
    return from_digits(poly_rem(prod, modulus, p), p)


def _poly_powmod(a: int, n: int, p: int, modulus: Sequence[int]) -> int:
    result, base = 1, a
    while n:
        if n & 1:
            result = _poly_mulmod(result, base, p, modulus)
        base = _poly_mulmod(base, base, p, modulus)
        n >>= 1
    return result


def _find_generator(p: int, m: int, modulus: Sequence[int]) -> int:
    q = p ** m
    factors = prime_factors(q - 1)
    for g in range(2, q):
        if all(_poly_powmod(g, (q - 1) // f, p, modulus) != 1 for f in factors):
            return g
    return 1  # q == 2


def _addition_table(p: int, m: int) -> np.ndarray:
    powers = p ** np.arange(m, dtype=np.int64)
    digits = (np.arange(p ** m, dtype=np.int64)[:, None] // powers) % p
    summed = (digits[:, None, :] + digits[None, :, :]) % p
    return (summed * powers).sum(axis=-1)


@lru_cache(maxsize=None)
def build_field(p: int, m: int = 1) -> FieldSpec:
    """
    Build GF(p^m) deterministically.

    Raises:
        NotPrime: p is not prime.
        DegreeTooLarge: p^m exceeds the field cap.
    """
    if not is_prime(p):
        raise NotPrime(p)
    if m < 1:
        raise BadParams(f"Extension degree must be >= 1, got {m}")
    q = p ** m
    if q > LAB.MAX_FIELD_SIZE:
        raise DegreeTooLarge(p, m, LAB.MAX_FIELD_SIZE)

    modulus = _smallest_irreducible(p, m)
    empty = np.zeros(0, dtype=np.int64)

    if m == 1:
        inv_table = np.zeros(q, dtype=np.int64)
        for a in range(1, q):
            inv_table[a] = pow(a, p - 2, p)
        generator = _find_generator(p, 1, modulus) if q > 2 else 1
        spec = FieldSpec(p, m, q, modulus, generator, empty, empty, inv_table)
    else:
        generator = _find_generator(p, m, modulus)
        exp = np.zeros(q - 1, dtype=np.int64)
        log = np.zeros(q, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            exp[i] = x
            log[x] = i
            x = _poly_mulmod(x, generator, p, modulus)
        inv_table = np.zeros(q, dtype=np.int64)
        inv_table[1:] = exp[(q - 1 - log[1:]) % (q - 1)]
        add_table = _addition_table(p, m) if p != 2 and q * q * m <= 2 ** 22 else np.zeros((0, 0), dtype=np.int64)
        spec = FieldSpec(p, m, q, modulus, generator, exp, log, inv_table, add_table)

    logger.debug("field_built", field=spec.name, modulus=list(modulus), generator=generator)
    return spec


def parse_field(text: Union[str, int, FieldSpec]) -> FieldSpec:
    """Parse a field name such as "2", "3" or "2^3"."""
    if isinstance(text, FieldSpec):
        return text
    base, _, exponent = str(text).strip().partition("^")
    try:
        p, m = int(base), int(exponent or 1)
    except ValueError as exc:
        raise BadParams(f"Invalid field '{text}'. Expected 'p' or 'p^m'") from exc
    return build_field(p, m)


# ─── Subfield Embedding ───

def _check_extension(base: FieldSpec, ext: FieldSpec) -> None:
    if base.p != ext.p:
        raise NotAnExtension(f"GF({ext.name}) has characteristic {ext.p}, GF({base.name}) has {base.p}")
    if ext.m % base.m != 0:
        raise NotAnExtension(f"GF({ext.name}) does not contain GF({base.name}): {base.m} does not divide {ext.m}")


def _evaluate(poly: Sequence[int], x: int, F: FieldSpec) -> int:
    acc = 0
    for c in reversed(poly):
        acc = F.add(F.mul(acc, x), c)
    return acc


@lru_cache(maxsize=None)
def _embedding(base_p: int, base_m: int, ext_m: int) -> Tuple[int, np.ndarray]:
    base = build_field(base_p, base_m)
    ext = build_field(base_p, ext_m)
    if base.m == 1:
        return 0, np.arange(base.q, dtype=np.int64)
    # Smallest element of ext whose minimal polynomial is the base modulus.
    image = next(b for b in range(ext.q) if _evaluate(base.modulus, b, ext) == 0)
    powers = [1]
    for _ in range(1, base.m):
        powers.append(ext.mul(powers[-1], image))
    table = np.zeros(base.q, dtype=np.int64)
    for a in range(base.q):
        acc = 0
        for c, pw in zip(to_digits(a, base.p, base.m), powers):
            acc = ext.add(acc, ext.mul(c, pw))
        table[a] = acc
    return image, table


def embedding_table(base: FieldSpec, ext: FieldSpec) -> np.ndarray:
    """Array mapping every element of base to its image in ext."""
    _check_extension(base, ext)
    return _embedding(base.p, base.m, ext.m)[1]


def generator_image(base: FieldSpec, ext: FieldSpec) -> int:
    """Image of the class of x under the embedding (0 for prime fields)."""
    _check_extension(base, ext)
    return _embedding(base.p, base.m, ext.m)[0]


def subfield_embed(a: Union[int, Elem], base: FieldSpec, ext: FieldSpec) -> Elem:
    """Embed an element of base into the extension ext."""
    if isinstance(a, Elem):
        if a.field != base:
            raise FieldMismatch(a.field.name, base.name)
        a = a.value
    table = embedding_table(base, ext)
    return Elem(int(table[base.check(a)]), ext)


def extension_of(F: FieldSpec, k: int) -> FieldSpec:
    """GF(q^k) for F = GF(q)."""
    if k < 1:
        raise BadParams(f"Extension degree must be >= 1, got {k}")
    return build_field(F.p, F.m * k)


def ensure_same_field(*fields: Optional[FieldSpec]) -> FieldSpec:
    first = fields[0]
    for other in fields[1:]:
        if other != first:
            raise FieldMismatch(first.name, other.name)
    return first
