"""Dense matrices over F_q.

:class:`Matrix` wraps a read-only ``int64`` numpy array of residues plus its
field. Entries stay below 65521, so a single product fits comfortably in
int64 and every elimination step reduces immediately.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    FieldMismatchError,
    NotAPermutationError,
    NotSquareError,
    ScanBoundExceededError,
    SingularError,
)
from .gf import FieldElement, PrimeField, inv_mod, make_field

DEFAULT_SCAN_BOUND = 4096


class Matrix:
    __slots__ = ("field", "_a")

    def __init__(self, data, field: PrimeField | int):
        if isinstance(field, int):
            field = make_field(field)
        a = np.array(data, dtype=np.int64)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
            raise DimensionMismatchError(f"matrix data must be a non-empty 2-D array, got shape {a.shape}")
        a %= field.q
        a.setflags(write=False)
        self.field = field
        self._a = a

    @classmethod
    def _raw(cls, a: np.ndarray, field: PrimeField) -> Matrix:
        # caller guarantees a is int64 and already reduced
        m = cls.__new__(cls)
        a.setflags(write=False)
        m.field = field
        m._a = a
        return m

    @classmethod
    def identity(cls, n: int, field: PrimeField | int) -> Matrix:
        return cls(np.eye(n, dtype=np.int64), field)

    @classmethod
    def zeros(cls, rows: int, cols: int, field: PrimeField | int) -> Matrix:
        return cls(np.zeros((rows, cols), dtype=np.int64), field)

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the residues."""
        return self._a

    def __getitem__(self, idx) -> FieldElement:
        r, c = idx
        return FieldElement(int(self._a[r, c]), self.field)

    def entries(self) -> list[FieldElement]:
        """Row-major list of entries."""
        return [FieldElement(int(v), self.field) for v in self._a.ravel()]

    def tolist(self) -> list[list[int]]:
        return self._a.tolist()

    def _check(self, other: Matrix):
        if not isinstance(other, Matrix):
            raise TypeError(f"expected Matrix, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(f"{self.field!r} vs {other.field!r}")

    def __matmul__(self, other: Matrix) -> Matrix:
        return matmul(self, other)

    def __add__(self, other: Matrix) -> Matrix:
        self._check(other)
        if self.shape != other.shape:
            raise DimensionMismatchError(f"{self.shape} + {other.shape}")
        return Matrix._raw((self._a + other._a) % self.q, self.field)

    def __sub__(self, other: Matrix) -> Matrix:
        self._check(other)
        if self.shape != other.shape:
            raise DimensionMismatchError(f"{self.shape} - {other.shape}")
        return Matrix._raw((self._a - other._a) % self.q, self.field)

    def __neg__(self) -> Matrix:
        return Matrix._raw((-self._a) % self.q, self.field)

    def scale(self, c: int | FieldElement) -> Matrix:
        return Matrix._raw((self._a * (int(c) % self.q)) % self.q, self.field)

    def __rmul__(self, c):
        if isinstance(c, (int, FieldElement)):
            return self.scale(c)
        return NotImplemented

    @property
    def T(self) -> Matrix:
        return Matrix._raw(np.ascontiguousarray(self._a.T), self.field)

    def __pow__(self, e: int) -> Matrix:
        return matrix_power(self, e)

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.field == other.field and self.shape == other.shape and bool(np.array_equal(self._a, other._a))

    def __hash__(self):
        return hash((self.q, self.shape, self._a.tobytes()))

    def __repr__(self):
        body = "\n ".join(" ".join(f"{v:>{len(str(self.q - 1))}d}" for v in row) for row in self._a)
        return f"Matrix {self.rows}x{self.cols} over F_{self.q}\n[{body}]"


def _same_field(*ms: Matrix) -> PrimeField:
    f = ms[0].field
    for m in ms[1:]:
        if m.field != f:
            raise FieldMismatchError(f"{f!r} vs {m.field!r}")
    return f


def matmul(A: Matrix, B: Matrix) -> Matrix:
    f = _same_field(A, B)
    if A.cols != B.rows:
        raise DimensionMismatchError(f"cannot multiply {A.shape} by {B.shape}")
    return Matrix._raw(mat_mod(A.array, B.array, f.q), f)


def mat_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """``a @ b mod q`` on raw residue arrays without int64 overflow."""
    # each product < q**2 < 2**32; chunk the inner dimension so partial sums stay < 2**63
    inner = a.shape[-1]
    step = max(1, (2**62) // ((q - 1) ** 2 or 1))
    if inner <= step:
        return (a @ b) % q
    out = np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
    for s in range(0, inner, step):
        out = (out + a[..., s : s + step] @ b[s : s + step]) % q
    return out


def vstack(mats: Sequence[Matrix]) -> Matrix:
    f = _same_field(*mats)
    if len({m.cols for m in mats}) != 1:
        raise DimensionMismatchError("vstack needs equal column counts")
    return Matrix._raw(np.vstack([m.array for m in mats]), f)


def hstack(mats: Sequence[Matrix]) -> Matrix:
    f = _same_field(*mats)
    if len({m.rows for m in mats}) != 1:
        raise DimensionMismatchError("hstack needs equal row counts")
    return Matrix._raw(np.hstack([m.array for m in mats]), f)


def block(grid: Sequence[Sequence[Matrix]]) -> Matrix:
    return vstack([hstack(row) for row in grid])


# --- elimination core -------------------------------------------------------


def row_reduce(a: np.ndarray, q: int, full: bool = True) -> tuple[np.ndarray, list[int]]:
    """Gaussian elimination mod q on a copy of ``a``.

    Pivot for each column is the first nonzero entry at or below the current
    row (lowest row index wins). With ``full`` the result is the reduced row
    echelon form; otherwise rows above a pivot are left alone.
    Returns the reduced array and the pivot column list.
    """
    a = np.array(a, dtype=np.int64) % q
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = (a[r] * inv_mod(int(a[r, c]), q)) % q
        col = a[:, c].copy()
        col[r] = 0
        if not full:
            col[:r] = 0
        targets = np.flatnonzero(col)
        if targets.size:
            a[targets] = (a[targets] - np.outer(col[targets], a[r])) % q
        pivots.append(c)
        r += 1
    return a, pivots


def rank_array(a: np.ndarray, q: int) -> int:
    return len(row_reduce(a, q, full=False)[1])


def rank(A: Matrix) -> int:
    return rank_array(A.array, A.q)


def det(A: Matrix) -> FieldElement:
    if A.rows != A.cols:
        raise NotSquareError(f"det of a {A.rows}x{A.cols} matrix")
    q = A.q
    a = A.array.copy()
    n = A.rows
    d = 1
    for c in range(n):
        nz = np.flatnonzero(a[c:, c])
        if nz.size == 0:
            return A.field.zero
        p = c + int(nz[0])
        if p != c:
            a[[c, p]] = a[[p, c]]
            d = -d
        piv = int(a[c, c])
        d = (d * piv) % q
        below = a[c + 1 :, c]
        targets = np.flatnonzero(below) + c + 1
        if targets.size:
            factors = (a[targets, c] * inv_mod(piv, q)) % q
            a[targets] = (a[targets] - np.outer(factors, a[c])) % q
    return FieldElement(d % q, A.field)


def solve(A: Matrix, b: Matrix) -> Matrix:
    """Solve ``A x = b`` for square full-rank A; b may hold several columns."""
    f = _same_field(A, b)
    if A.rows != A.cols:
        raise NotSquareError(f"solve needs a square matrix, got {A.shape}")
    if b.rows != A.rows:
        raise DimensionMismatchError(f"b has {b.rows} rows, A has {A.rows}")
    x = solve_array(A.array, b.array, f.q)
    return Matrix._raw(x, f)


def solve_array(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    n = a.shape[0]
    aug = np.hstack([a, b.reshape(n, -1)])
    red, piv = row_reduce(aug, q)
    if len(piv) < n or piv[n - 1] != n - 1:
        raise SingularError("matrix is singular over F_%d" % q)
    x = red[:, n:]
    return x.reshape(b.shape) if b.ndim == 1 else x


def inverse(A: Matrix) -> Matrix:
    return solve(A, Matrix.identity(A.rows, A.field))


def matrix_power(A: Matrix, e: int) -> Matrix:
    if A.rows != A.cols:
        raise NotSquareError("power of a non-square matrix")
    if e < 0:
        return matrix_power(inverse(A), -e)
    result = Matrix.identity(A.rows, A.field)
    base = A
    while e:
        if e & 1:
            result = result @ base
        base = base @ base
        e >>= 1
    return result


def nullspace(A: Matrix) -> Matrix | None:
    """Right nullspace basis as the columns of the returned matrix (None if trivial).

    Each basis vector is scaled so its first nonzero entry is 1.
    """
    q = A.q
    red, piv = row_reduce(A.array, q)
    free = [c for c in range(A.cols) if c not in piv]
    if not free:
        return None
    basis = np.zeros((A.cols, len(free)), dtype=np.int64)
    for j, fc in enumerate(free):
        basis[fc, j] = 1
        for i, pc in enumerate(piv):
            basis[pc, j] = (-red[i, fc]) % q
        first = int(basis[np.flatnonzero(basis[:, j])[0], j])
        basis[:, j] = (basis[:, j] * inv_mod(first, q)) % q
    return Matrix._raw(basis, A.field)


def kron(A: Matrix, B: Matrix) -> Matrix:
    f = _same_field(A, B)
    return Matrix._raw(np.kron(A.array, B.array) % f.q, f)


def kron_all(mats: Iterable[Matrix]) -> Matrix:
    return reduce(kron, mats)


def rowspan_equal(A: Matrix, B: Matrix) -> bool:
    _same_field(A, B)
    if A.cols != B.cols:
        raise DimensionMismatchError(f"{A.cols} vs {B.cols} columns")
    ra, rb = rank(A), rank(B)
    return ra == rb == rank(vstack([A, B]))


def rowspan_independent(A: Matrix, B: Matrix) -> bool:
    """True iff rowspan(A) and rowspan(B) meet only in the zero vector."""
    _same_field(A, B)
    if A.cols != B.cols:
        raise DimensionMismatchError(f"{A.cols} vs {B.cols} columns")
    return rank(vstack([A, B])) == rank(A) + rank(B)


def eigen_scan(A: Matrix, bound: int = DEFAULT_SCAN_BOUND) -> list[tuple[FieldElement, Matrix]]:
    """Eigenvalues of A lying in F_q by trying every field element.

    Returns ``(eigenvalue, basis)`` pairs where the columns of ``basis``
    span the eigenspace.
    """
    if A.rows != A.cols:
        raise NotSquareError("eigen_scan of a non-square matrix")
    if A.q > bound:
        raise ScanBoundExceededError(f"q={A.q} exceeds scan bound {bound}")
    eye = Matrix.identity(A.rows, A.field)
    out = []
    for lam in A.field.elements():
        ns = nullspace(A - eye.scale(lam))
        if ns is not None:
            out.append((lam, ns))
    return out


def permutation_matrix(mapping: Sequence[int], field: PrimeField | int) -> Matrix:
    """Row m (1-based) is the standard basis row e(mapping[m])."""
    n = len(mapping)
    if n == 0 or sorted(mapping) != list(range(1, n + 1)):
        raise NotAPermutationError(f"{list(mapping)!r} is not a permutation of 1..{n}")
    a = np.zeros((n, n), dtype=np.int64)
    a[np.arange(n), np.asarray(mapping) - 1] = 1
    if isinstance(field, int):
        field = make_field(field)
    return Matrix._raw(a, field)


def nonzero_columns(A: Matrix) -> list[int]:
    """0-based indices of columns holding a nonzero entry."""
    return np.flatnonzero(A.array.any(axis=0)).tolist()
