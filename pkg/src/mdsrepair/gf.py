"""Arithmetic in prime fields F_q, 2 <= q <= 65521.

Elements are plain residues ``0 <= v < q``. The bulk paths (matrices,
stripes) work on numpy integer arrays reduced mod q; :class:`FieldElement`
is the scalar wrapper for places where a typed value reads better.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import (
    DivisionByZeroError,
    FieldMismatchError,
    NotPrimeError,
    OutOfRangeError,
)

MAX_MODULUS = 65521  # largest prime below 2**16: every symbol fits a 2-byte cell


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    d = 3
    while d * d <= q:
        if q % d == 0:
            return False
        d += 2
    return True


def inv_mod(a: int, q: int) -> int:
    """Inverse of ``a`` modulo ``q`` by the extended Euclidean algorithm."""
    a %= q
    if a == 0:
        raise DivisionByZeroError(f"0 has no inverse in F_{q}")
    r0, r1 = q, a
    s0, s1 = 0, 1
    while r1:
        quot = r0 // r1
        r0, r1 = r1, r0 - quot * r1
        s0, s1 = s1, s0 - quot * s1
    if r0 != 1:
        raise DivisionByZeroError(f"{a} is not invertible modulo {q}")
    return s0 % q


@dataclass(frozen=True)
class PrimeField:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or not 2 <= self.q <= MAX_MODULUS:
            raise OutOfRangeError(f"modulus must lie in [2, {MAX_MODULUS}], got {self.q!r}")
        if not is_prime(self.q):
            raise NotPrimeError(f"{self.q} is not prime")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.q, self)

    def __repr__(self):
        return f"F_{self.q}"

    @property
    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    @property
    def one(self) -> FieldElement:
        return FieldElement(1, self)

    def neg(self, value: int) -> int:
        return (-value) % self.q

    def inv(self, value: int) -> int:
        return inv_mod(value, self.q)

    def elements(self):
        return (FieldElement(v, self) for v in range(self.q))


@lru_cache(maxsize=None)
def make_field(q: int) -> PrimeField:
    """Field handle for F_q; raises NotPrimeError / OutOfRangeError."""
    return PrimeField(q)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise OutOfRangeError(f"{self.value} is not a residue of {self.field!r}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")
            return other.value
        if isinstance(other, int):
            return other % self.field.q
        return NotImplemented

    def _wrap(self, v: int) -> FieldElement:
        return FieldElement(v % self.field.q, self.field)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.value * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._wrap(self.value * inv_mod(o, self.field.q))

    def __neg__(self):
        return self._wrap(-self.value)

    def __pow__(self, e: int):
        return pow_(self, e)

    def inv(self) -> FieldElement:
        return inv(self)

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __bool__(self):
        return self.value != 0

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.field == other.field and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.field.q
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.field.q))

    def __repr__(self):
        return f"{self.value} (mod {self.field.q})"


def arith(op: str, a: FieldElement, b: FieldElement) -> FieldElement:
    if a.field != b.field:
        raise FieldMismatchError(f"{a.field!r} vs {b.field!r}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def inv(a: FieldElement) -> FieldElement:
    return FieldElement(inv_mod(a.value, a.field.q), a.field)


def pow_(a: FieldElement, e: int) -> FieldElement:
    """``a**e`` for e >= 0, with 0**0 == 1."""
    if e < 0:
        raise ValueError("negative exponent; use inv() first")
    return FieldElement(pow(a.value, e, a.field.q), a.field)
