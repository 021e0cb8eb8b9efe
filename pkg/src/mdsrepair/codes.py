"""Systematic (n, k) MDS codes with optimal single-node repair.

A code stores k source vectors of length L = (n-k)**k on k systematic nodes
and n-k parity nodes. Parity node j holds ``sum_i C[j, i] @ a_i`` where each
coding block is a scalar times a structured L x L matrix:

* permutation family (random / explicit 2-parity / explicit 3-parity):
  ``C[j, i] = lam[j, i] * P_i**(j-k-1)``, P_i cycling digit i of the index;
* tensor family: ``C[k+1, i] = lam * I`` and
  ``C[k+m, i] = lam * (G0 x .. x G_{m-1} x .. x G0)`` with G_{m-1} in slot i.

Parity rows are indexed 0..n-k-1 internally (row r is node k+1+r).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field as dc_field, replace
from functools import cached_property
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .errors import (
    BadFieldForCubeRootsError,
    ConstructionError,
    FieldTooSmallError,
    FrameworkConditionViolatedError,
    NotSystematicError,
    ResampleLimitExceededError,
    SerializationError,
)
from .gf import PrimeField, make_field
from .indexing import IndexSystem
from .linalg import Matrix, kron_all, rank, rowspan_equal, vstack

MDS_RESAMPLE_LIMIT = 32


class Construction(enum.IntEnum):
    RANDOM = 0
    EXPLICIT2 = 1
    EXPLICIT3 = 2
    TENSOR = 3

    @classmethod
    def parse(cls, name: str | int | Construction) -> Construction:
        if isinstance(name, (int, Construction)):
            return cls(name)
        aliases = {
            "random": cls.RANDOM,
            "explicit2": cls.EXPLICIT2,
            "explicit3": cls.EXPLICIT3,
            "tensor": cls.TENSOR,
        }
        try:
            return aliases[name.lower()]
        except KeyError:
            raise ConstructionError(f"unknown construction {name!r}; choose from {sorted(aliases)}") from None


PERMUTATION_FAMILY = (Construction.RANDOM, Construction.EXPLICIT2, Construction.EXPLICIT3)


@dataclass(frozen=True)
class TensorFramework:
    """Kronecker factors for tensor codes: U0 is 1 x s, U1 and G[m] are s x s."""

    U0: Matrix
    U1: Matrix
    G: tuple[Matrix, ...]
    preset: str | None = None

    @property
    def width(self) -> int:
        return self.U0.cols


@dataclass(frozen=True)
class CodeSpec:
    n: int
    k: int
    q: int
    construction: Construction
    lambdas: tuple[tuple[int, ...], ...]  # [parity row r][source i-1]
    seed: int = 0
    framework: TensorFramework | None = dc_field(default=None, compare=False)
    draws: int = dc_field(default=1, compare=False)

    def __post_init__(self):
        if self.k < 1 or self.n - self.k < 2:
            raise ValueError(f"need k >= 1 and n-k >= 2, got (n, k) = ({self.n}, {self.k})")
        if len(self.lambdas) != self.parities or any(len(row) != self.k for row in self.lambdas):
            raise ValueError("lambda table must be (n-k) x k")
        if any(not 0 < v < self.q for row in self.lambdas for v in row):
            raise ValueError("every lambda must be a nonzero residue")
        if self.construction == Construction.TENSOR:
            if self.framework is None or self.framework.width != self.parities:
                raise ValueError("tensor codes need a framework of width n-k")

    @property
    def field(self) -> PrimeField:
        return make_field(self.q)

    @property
    def parities(self) -> int:
        return self.n - self.k

    @property
    def L(self) -> int:
        return self.parities**self.k

    @property
    def index(self) -> IndexSystem:
        return IndexSystem(self.k, self.parities)

    @property
    def permutation_family(self) -> bool:
        return self.construction in PERMUTATION_FAMILY

    def lam(self, j: int, i: int) -> int:
        """Scalar on block C[j, i] (1-based node j > k, source i)."""
        return self.lambdas[j - self.k - 1][i - 1]

    @cached_property
    def _blocks(self) -> np.ndarray:
        # shape (n-k, k, L, L): scaled coding blocks as raw residues
        s, k, L, q = self.parities, self.k, self.L, self.q
        out = np.empty((s, k, L, L), dtype=np.int64)
        for r in range(s):
            for i in range(k):
                out[r, i] = (self._base_block(r, i + 1).array * self.lambdas[r][i]) % q
        out.setflags(write=False)
        return out

    def _base_block(self, r: int, i: int) -> Matrix:
        f = self.field
        if self.permutation_family:
            return build_P(self.index, i, r, f)
        if r == 0:
            return Matrix.identity(self.L, f)
        fw = self.framework
        factors = [fw.G[0]] * (i - 1) + [fw.G[r]] + [fw.G[0]] * (self.k - i)
        return kron_all(factors)

    def submatrix(self, j: int, i: int) -> Matrix:
        """C[j, i] for any node j in 1..n (systematic rows are I / 0)."""
        if not 1 <= i <= self.k or not 1 <= j <= self.n:
            raise IndexError(f"no block C[{j}, {i}] in a ({self.n}, {self.k}) code")
        if j <= self.k:
            return Matrix.identity(self.L, self.field) if j == i else Matrix.zeros(self.L, self.L, self.field)
        return Matrix._raw(self._blocks[j - self.k - 1, i - 1].copy(), self.field)

    def block_array(self, j: int, i: int) -> np.ndarray:
        return self._blocks[j - self.k - 1, i - 1]

    def repair_matrix(self, l: int) -> Matrix:
        return repair_matrix(self, l)

    def to_bytes(self) -> bytes:
        return serialize(self)


@dataclass(frozen=True)
class MdsReport:
    verified: bool
    subsets_checked: int
    failing_subset: tuple[int, ...] | None = None
    resamples_used: int = 0


# --- permutation matrices ---------------------------------------------------


def build_P(sys: IndexSystem, i: int, r: int = 1, field: PrimeField | int = 2) -> Matrix:
    """P_i**r: row m is e(digit_shift(m, i, r))."""
    if not 0 <= r < sys.base:
        raise ValueError(f"power {r} outside 0..{sys.base - 1}")
    shift = sys.shift_table(i, r)
    return linalg.permutation_matrix((shift + 1).tolist(), field)


# --- builders ---------------------------------------------------------------


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & (2**64 - 1))


def _draw_lambdas(rng: np.random.Generator, s: int, k: int, q: int) -> tuple[tuple[int, ...], ...]:
    table = rng.integers(1, q, size=(s, k))
    return tuple(tuple(int(v) for v in row) for row in table)


def _sample_until_mds(make, n, k, q, seed) -> CodeSpec:
    rng = _rng(seed)
    for attempt in range(1, MDS_RESAMPLE_LIMIT + 1):
        code = make(_draw_lambdas(rng, n - k, k, q), attempt)
        if verify_mds(code).verified:
            return code
    raise ResampleLimitExceededError(
        f"no MDS draw for ({n}, {k}) over F_{q} in {MDS_RESAMPLE_LIMIT} attempts; use a larger field"
    )


def build_random_code(n: int, k: int, q: int, seed: int = 0) -> CodeSpec:
    make_field(q)
    return _sample_until_mds(
        lambda lams, draws: CodeSpec(n, k, q, Construction.RANDOM, lams, seed, draws=draws),
        n, k, q, seed,
    )


def _explicit_lambdas(k: int, q: int, parities: int):
    lam = list(range(1, k + 1))
    return tuple(tuple(pow(v, r, q) for v in lam) for r in range(parities))


def build_explicit_2parity(k: int, q: int) -> CodeSpec:
    """(k+2, k) code with C[k+1, i] = I and C[k+2, i] = i * P_i."""
    make_field(q)
    if q < 2 * k + 1:
        raise FieldTooSmallError(f"explicit 2-parity code with k={k} needs q >= {2 * k + 1}, got {q}")
    return CodeSpec(k + 2, k, q, Construction.EXPLICIT2, _explicit_lambdas(k, q, 2))


def build_explicit_3parity(k: int, q: int) -> CodeSpec:
    """(k+3, k) code with C[k+1+r, i] = (i * P_i)**r."""
    make_field(q)
    if q < 2 * k + 1:
        raise FieldTooSmallError(f"explicit 3-parity code with k={k} needs q >= {2 * k + 1}, got {q}")
    if q % 3 == 1:
        raise BadFieldForCubeRootsError(f"F_{q} has nontrivial cube roots of unity (q = 1 mod 3)")
    return CodeSpec(k + 3, k, q, Construction.EXPLICIT3, _explicit_lambdas(k, q, 3))


def check_framework(U0: Matrix, U1: Matrix, G_list: Sequence[Matrix], s: int) -> None:
    """Raise FrameworkConditionViolatedError naming the first failing condition."""
    if len(G_list) != s:
        raise FrameworkConditionViolatedError("G_count", f"need {s} G matrices, got {len(G_list)}")
    for m, G in enumerate(G_list):
        if G.shape != (s, s) or rank(G) != s:
            raise FrameworkConditionViolatedError(f"G{m}_full_rank", f"G{m} must be a full-rank {s}x{s} matrix")
    if U0.shape != (1, s) or rank(U0) != 1:
        raise FrameworkConditionViolatedError("U0_shape", f"U0 must be a nonzero 1x{s} row")
    if U1.shape != (s, s) or rank(U1) != s:
        raise FrameworkConditionViolatedError("U1_full_rank", f"U1 must be a full-rank {s}x{s} matrix")
    if not rowspan_equal(U0 @ G_list[0], U0):
        raise FrameworkConditionViolatedError("alignment", "U0 G0 must span the same row space as U0")
    stacked = vstack([U0] + [U0 @ G for G in G_list[1:]])
    if rank(stacked) != s:
        raise FrameworkConditionViolatedError(
            "reconstruction", f"rank of [U0; U0 G1; ...] is {rank(stacked)}, need {s}"
        )


def build_tensor_code(
    n: int,
    k: int,
    q: int,
    U0: Matrix,
    U1: Matrix,
    G_list: Sequence[Matrix],
    seed: int = 0,
    preset: str | None = None,
) -> CodeSpec:
    f = make_field(q)
    for M in (U0, U1, *G_list):
        if M.field != f:
            raise FrameworkConditionViolatedError("field", f"framework matrices must live in F_{q}")
    check_framework(U0, U1, G_list, n - k)
    fw = TensorFramework(U0, U1, tuple(G_list), preset)
    return _sample_until_mds(
        lambda lams, draws: CodeSpec(n, k, q, Construction.TENSOR, lams, seed, fw, draws),
        n, k, q, seed,
    )


def build_code(construction, n: int, k: int, q: int, seed: int = 0) -> CodeSpec:
    """Build any construction from the fields carried in a chunk header."""
    c = Construction.parse(construction)
    if c == Construction.RANDOM:
        return build_random_code(n, k, q, seed)
    if c == Construction.EXPLICIT2:
        if n - k != 2:
            raise ConstructionError("explicit2 needs n - k == 2")
        return build_explicit_2parity(k, q)
    if c == Construction.EXPLICIT3:
        if n - k != 3:
            raise ConstructionError("explicit3 needs n - k == 3")
        return build_explicit_3parity(k, q)
    from .alignment import default_framework

    fw = default_framework(n - k, q)
    return build_tensor_code(n, k, q, fw.U0, fw.U1, fw.G, seed, preset=fw.preset)


# --- repair matrices and verification --------------------------------------


def repair_matrix(code: CodeSpec, l: int) -> Matrix:
    """V_l: what every survivor sends when systematic node l fails.

    Permutation family: rows e(m) for phi_l(m) == 0, ascending m.
    Tensor family: U1 x .. x U0 x .. x U1 with U0 in slot l.
    """
    if not 1 <= l <= code.k:
        raise NotSystematicError(f"node {l} is not systematic (k={code.k})")
    f = code.field
    if code.permutation_family:
        rows = np.asarray(code.index.positions_with_digit(l, 0)) - 1
        v = np.zeros((len(rows), code.L), dtype=np.int64)
        v[np.arange(len(rows)), rows] = 1
        return Matrix._raw(v, f)
    fw = code.framework
    return kron_all([fw.U1] * (l - 1) + [fw.U0] + [fw.U1] * (code.k - l))


def _parity_minor(code: CodeSpec, parity_nodes, missing) -> np.ndarray:
    return np.block([[code.block_array(j, i) for i in missing] for j in parity_nodes])


def verify_mds(code: CodeSpec) -> MdsReport:
    """Check every k-subset of nodes recovers the sources.

    With the systematic nodes of a subset known, the rest reduces to the
    square minor of parity blocks over (chosen parity rows) x (missing sources).
    """
    checked = 0
    for subset in combinations(range(1, code.n + 1), code.k):
        checked += 1
        parity = [j for j in subset if j > code.k]
        if not parity:
            continue
        missing = [i for i in range(1, code.k + 1) if i not in subset]
        minor = _parity_minor(code, parity, missing)
        if linalg.rank_array(minor, code.q) != len(parity) * code.L:
            return MdsReport(False, checked, subset, code.draws - 1)
    return MdsReport(True, checked, None, code.draws - 1)


def verify_repair_conditions(code: CodeSpec, repair_matrices: Mapping[int, Matrix] | None = None) -> bool:
    """Interference alignment and reconstruction for every systematic node."""
    for l in range(1, code.k + 1):
        V = repair_matrices[l] if repair_matrices and l in repair_matrices else repair_matrix(code, l)
        desired = []
        for j in range(code.k + 1, code.n + 1):
            for i in range(1, code.k + 1):
                VC = V @ code.submatrix(j, i)
                if i == l:
                    desired.append(VC)
                elif not rowspan_equal(VC, V):
                    return False
        if rank(vstack(desired)) != code.L:
            return False
    return True


def with_lambdas(code: CodeSpec, lambdas) -> CodeSpec:
    """Same structure, different scalars (no MDS re-check)."""
    return replace(code, lambdas=tuple(tuple(int(v) % code.q for v in row) for row in lambdas))


# --- canonical bytes --------------------------------------------------------

_CODE_HEAD = struct.Struct("<BBBIQ")


def serialize(code: CodeSpec) -> bytes:
    """construction id, n, k, q (u32), seed (u64), then lambdas row-major as u16, all little-endian."""
    if code.construction == Construction.TENSOR:
        from .alignment import default_framework

        fw = default_framework(code.parities, code.q)
        cur = code.framework
        if (cur.U0, cur.U1, cur.G) != (fw.U0, fw.U1, fw.G):
            raise SerializationError("only tensor codes on the default framework have a canonical byte form")
    head = _CODE_HEAD.pack(int(code.construction), code.n, code.k, code.q, code.seed & (2**64 - 1))
    body = struct.pack(f"<{code.parities * code.k}H", *(v for row in code.lambdas for v in row))
    return head + body


def deserialize(data: bytes) -> CodeSpec:
    if len(data) < _CODE_HEAD.size:
        raise SerializationError("truncated code header")
    cid, n, k, q, seed = _CODE_HEAD.unpack_from(data)
    count = (n - k) * k
    if len(data) != _CODE_HEAD.size + 2 * count:
        raise SerializationError(f"expected {count} lambdas")
    flat = struct.unpack_from(f"<{count}H", data, _CODE_HEAD.size)
    lambdas = tuple(tuple(flat[r * k : (r + 1) * k]) for r in range(n - k))
    construction = Construction(cid)
    fw = None
    if construction == Construction.TENSOR:
        from .alignment import default_framework

        fw = default_framework(n - k, q)
    return CodeSpec(n, k, q, construction, lambdas, seed, fw)
