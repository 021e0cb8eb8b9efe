"""Encode, decode and single-node repair with bandwidth / disk-access metering.

Symbols are residues held in ``int64`` numpy arrays. A stripe is k source
vectors of length L; encoding produces n node vectors. Repair of systematic
node l downloads V_l d_j from every survivor j. For the permutation codes V_l
is a set of unit rows, so survivors send raw symbols and the failed vector is
peeled off digit by digit; tensor codes go through span cancellation and one
linear solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg
from .codes import CodeSpec, repair_matrix
from .errors import (
    BadNodeError,
    DimensionMismatchError,
    PlanMismatchError,
    WrongShareCountError,
)
from .gf import inv_mod
from .linalg import Matrix, mat_mod


@dataclass(frozen=True)
class Stripe:
    sources: np.ndarray  # (k, L)
    q: int

    def __post_init__(self):
        a = np.asarray(self.sources, dtype=np.int64)
        if a.ndim != 2:
            raise DimensionMismatchError("stripe sources must be a k x L array")
        a = a % self.q
        a.setflags(write=False)
        object.__setattr__(self, "sources", a)

    @property
    def k(self) -> int:
        return self.sources.shape[0]

    @property
    def L(self) -> int:
        return self.sources.shape[1]

    @classmethod
    def random(cls, code: CodeSpec, rng: np.random.Generator) -> Stripe:
        return cls(rng.integers(0, code.q, size=(code.k, code.L)), code.q)

    @classmethod
    def zeros(cls, code: CodeSpec) -> Stripe:
        return cls(np.zeros((code.k, code.L), dtype=np.int64), code.q)

    def __eq__(self, other):
        if not isinstance(other, Stripe):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.sources, other.sources)


@dataclass(frozen=True)
class NodeVector:
    node: int
    data: np.ndarray  # (L,)

    def __eq__(self, other):
        if not isinstance(other, NodeVector):
            return NotImplemented
        return self.node == other.node and np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class RepairPlan:
    failed: int
    fetch: dict[int, tuple[int, ...]]  # survivor -> 1-based positions to read
    combine: Matrix | None  # helper-side combination of the read symbols; None = send as read
    expected_bandwidth_symbols: int
    expected_disk_access_symbols: int
    optimal: bool


@dataclass
class RepairMetrics:
    n: int
    k: int
    L: int
    downloaded: dict[int, int] = field(default_factory=dict)
    accessed: dict[int, int] = field(default_factory=dict)
    optimal: bool = True
    stripes: int = 1

    @property
    def total_downloaded(self) -> int:
        return sum(self.downloaded.values())

    @property
    def total_accessed(self) -> int:
        return sum(self.accessed.values())

    @property
    def optimum_symbols(self) -> int:
        """Cut-set bound (n-1) L / (n-k), over all stripes."""
        return self.stripes * (self.n - 1) * self.L // (self.n - self.k)

    @property
    def trivial_symbols(self) -> int:
        return self.stripes * self.k * self.L

    @property
    def downloaded_units(self) -> float:
        """Per-stripe download in units of one node (L symbols)."""
        return self.total_downloaded / (self.L * self.stripes)

    def __add__(self, other: RepairMetrics) -> RepairMetrics:
        keys = self.downloaded.keys() | other.downloaded.keys()
        return RepairMetrics(
            self.n,
            self.k,
            self.L,
            {s: self.downloaded.get(s, 0) + other.downloaded.get(s, 0) for s in sorted(keys)},
            {s: self.accessed.get(s, 0) + other.accessed.get(s, 0) for s in sorted(keys)},
            self.optimal and other.optimal,
            self.stripes + other.stripes,
        )

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "L": self.L,
            "stripes": self.stripes,
            "downloaded_symbols": {str(s): v for s, v in self.downloaded.items()},
            "accessed_symbols": {str(s): v for s, v in self.accessed.items()},
            "total_downloaded": self.total_downloaded,
            "total_accessed": self.total_accessed,
            "downloaded_units_per_stripe": self.downloaded_units,
            "optimum_symbols": self.optimum_symbols,
            "trivial_symbols": self.trivial_symbols,
            "optimal": self.optimal,
        }


# --- encode / decode --------------------------------------------------------


def _parity_generator(code: CodeSpec) -> np.ndarray:
    # (n-k)L x kL block matrix of coding blocks, cached on the code object
    cache = code.__dict__.get("_parity_gen")
    if cache is None:
        b = code._blocks
        cache = np.block([[b[r, i] for i in range(code.k)] for r in range(code.parities)])
        cache.setflags(write=False)
        code.__dict__["_parity_gen"] = cache
    return cache


def encode_array(code: CodeSpec, sources: np.ndarray) -> np.ndarray:
    """Encode ``sources`` of shape (k, L) or (k, L, S); returns (n, L[, S])."""
    a = np.asarray(sources, dtype=np.int64) % code.q
    if a.shape[:2] != (code.k, code.L):
        raise DimensionMismatchError(f"sources shape {a.shape} does not match (k, L) = ({code.k}, {code.L})")
    flat = a.reshape(code.k * code.L, -1)
    parity = mat_mod(_parity_generator(code), flat, code.q).reshape((code.parities, code.L) + a.shape[2:])
    return np.concatenate([a, parity], axis=0)


def encode(code: CodeSpec, stripe: Stripe) -> list[NodeVector]:
    if stripe.q != code.q:
        raise DimensionMismatchError(f"stripe over F_{stripe.q}, code over F_{code.q}")
    nodes = encode_array(code, stripe.sources)
    return [NodeVector(j + 1, nodes[j]) for j in range(code.n)]


def decode_array(code: CodeSpec, shares: Mapping[int, np.ndarray]) -> np.ndarray:
    """Recover sources (k, L[, S]) from exactly k node arrays (L[, S])."""
    nodes = sorted(shares)
    if len(nodes) != code.k:
        raise WrongShareCountError(f"need {code.k} distinct shares, got {len(nodes)}")
    for j in nodes:
        if not 1 <= j <= code.n:
            raise BadNodeError(f"node {j} outside 1..{code.n}")
    q, L = code.q, code.L
    first = np.asarray(shares[nodes[0]])
    tail = first.shape[1:]
    out = np.zeros((code.k, L) + tail, dtype=np.int64)
    known = [j for j in nodes if j <= code.k]
    for i in known:
        out[i - 1] = np.asarray(shares[i]) % q
    parity = [j for j in nodes if j > code.k]
    if not parity:
        return out
    missing = [i for i in range(1, code.k + 1) if i not in known]
    rhs = []
    for j in parity:
        y = np.asarray(shares[j], dtype=np.int64).reshape(L, -1) % q
        for i in known:
            y = (y - mat_mod(code.block_array(j, i), out[i - 1].reshape(L, -1), q)) % q
        rhs.append(y)
    minor = np.block([[code.block_array(j, i) for i in missing] for j in parity])
    x = linalg.solve_array(minor, np.vstack(rhs), q)
    for t, i in enumerate(missing):
        out[i - 1] = x[t * L : (t + 1) * L].reshape((L,) + tail)
    return out


def decode(code: CodeSpec, shares: Sequence[NodeVector]) -> Stripe:
    by_node = {}
    for s in shares:
        if s.node in by_node:
            raise WrongShareCountError(f"duplicate share for node {s.node}")
        by_node[s.node] = s.data
    return Stripe(decode_array(code, by_node), code.q)


# --- repair -----------------------------------------------------------------


def plan_repair(code: CodeSpec, l: int, available: Sequence[int] | None = None) -> RepairPlan:
    """Plan the repair of node l.

    Parity nodes fall back to reading k whole survivors, the first k of
    ``available`` (default: every other node).
    """
    n, k, L = code.n, code.k, code.L
    if not 1 <= l <= n:
        raise BadNodeError(f"node {l} outside 1..{n}")
    if l > k:
        # no bandwidth-optimal parity repair is known: read k whole nodes
        every = tuple(range(1, L + 1))
        pool = sorted(set(available) - {l}) if available is not None else [j for j in range(1, n + 1) if j != l]
        if len(pool) < k:
            raise WrongShareCountError(f"parity repair needs {k} survivors, {len(pool)} available")
        fetch = {j: every for j in pool[:k]}
        return RepairPlan(l, fetch, None, k * L, k * L, False)
    V = repair_matrix(code, l)
    cols = linalg.nonzero_columns(V)
    positions = tuple(c + 1 for c in cols)
    combine = None
    if not code.permutation_family:
        combine = Matrix._raw(np.ascontiguousarray(V.array[:, cols]), code.field)
    fetch = {j: positions for j in range(1, n + 1) if j != l}
    bandwidth = (n - 1) * V.rows
    optimal = bandwidth * code.parities == (n - 1) * L
    return RepairPlan(l, fetch, combine, bandwidth, (n - 1) * len(positions), optimal)


def helper_response(plan: RepairPlan, values: np.ndarray, q: int) -> np.ndarray:
    """What a survivor sends after reading its planned symbols."""
    values = np.asarray(values, dtype=np.int64)
    if plan.combine is None:
        return values
    return mat_mod(plan.combine.array, values.reshape(values.shape[0], -1), q).reshape(
        (plan.combine.rows,) + values.shape[1:]
    )


def read_plan(plan: RepairPlan, nodes: Mapping[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Pick the planned symbols out of in-memory node vectors."""
    return {j: np.asarray(nodes[j])[np.asarray(pos) - 1] for j, pos in plan.fetch.items()}


def _check_fetched(plan: RepairPlan, fetched: Mapping[int, np.ndarray]):
    if set(fetched) != set(plan.fetch):
        raise PlanMismatchError(f"fetched nodes {sorted(fetched)} differ from plan {sorted(plan.fetch)}")
    for j, pos in plan.fetch.items():
        if np.asarray(fetched[j]).shape[0] != len(pos):
            raise PlanMismatchError(f"node {j}: got {np.asarray(fetched[j]).shape[0]} symbols, plan reads {len(pos)}")


def execute_repair(
    code: CodeSpec,
    plan: RepairPlan,
    fetched: Mapping[int, np.ndarray],
    method: str | None = None,
) -> tuple[NodeVector, RepairMetrics]:
    """Rebuild the failed node from the symbols read per ``plan``.

    Fetched arrays may carry a trailing stripe axis, (|positions|, S), to
    repair S stripes in one call.

    ``method`` is "closed" (digit peeling, permutation codes only) or
    "generic" (span cancellation + solve); default picks closed when possible.
    """
    _check_fetched(plan, fetched)
    l, q = plan.failed, code.q
    first = np.asarray(fetched[next(iter(plan.fetch))])
    stripes = first.shape[1] if first.ndim > 1 else 1
    accessed = {j: len(pos) * stripes for j, pos in plan.fetch.items()}
    sent = {j: helper_response(plan, fetched[j], q) for j in plan.fetch}
    downloaded = {j: int(v.shape[0]) * stripes for j, v in sent.items()}
    metrics = RepairMetrics(code.n, code.k, code.L, downloaded, accessed, plan.optimal, stripes)

    if l > code.k:
        sources = decode_array(code, sent)
        return NodeVector(l, encode_array(code, sources)[l - 1]), metrics

    if method is None:
        method = "closed" if code.permutation_family else "generic"
    if method == "closed":
        if not code.permutation_family:
            raise ValueError("closed-form repair needs a permutation-family code")
        data = _repair_closed(code, plan, sent)
    elif method == "generic":
        data = _repair_generic(code, l, sent)
    else:
        raise ValueError(f"unknown repair method {method!r}")
    return NodeVector(l, data), metrics


def _repair_closed(code: CodeSpec, plan: RepairPlan, sent: Mapping[int, np.ndarray]) -> np.ndarray:
    l, k, q, L = plan.failed, code.k, code.q, code.L
    idx = code.index
    xs = np.asarray(plan.fetch[next(iter(plan.fetch))]) - 1  # positions with digit l == 0
    # systematic survivors: a_i known on every position whose l-th digit is 0
    known = {}
    for i in range(1, k + 1):
        if i != l:
            a = np.zeros((L,) + np.shape(sent[i])[1:], dtype=np.int64)
            a[xs] = sent[i]
            known[i] = a
    out = np.zeros((L,) + np.shape(next(iter(sent.values())))[1:], dtype=np.int64)
    for r in range(code.parities):
        j = k + 1 + r
        residue = np.asarray(sent[j], dtype=np.int64).copy()
        for i, a in known.items():
            # shifting digit i keeps digit l at 0, so every term was fetched
            residue -= code.lam(j, i) * a[idx.shift_table(i, r)[xs]]
        residue %= q
        out[idx.shift_table(l, r)[xs]] = (residue * inv_mod(code.lam(j, l), q)) % q
    return out


def _right_inverse(V: np.ndarray, q: int) -> np.ndarray:
    """R with V R = I for a full-row-rank V."""
    _, piv = linalg.row_reduce(V, q, full=False)
    if len(piv) != V.shape[0]:
        raise linalg.SingularError("repair matrix is rank deficient")
    sub = V[:, piv]
    inv = linalg.solve_array(sub, np.eye(V.shape[0], dtype=np.int64), q)
    R = np.zeros((V.shape[1], V.shape[0]), dtype=np.int64)
    R[piv] = inv
    return R


def _repair_generic(code: CodeSpec, l: int, sent: Mapping[int, np.ndarray]) -> np.ndarray:
    q, k = code.q, code.k
    V = repair_matrix(code, l).array
    R = _right_inverse(V, q)
    desired, residues = [], []
    for j in range(k + 1, code.n + 1):
        y = np.asarray(sent[j], dtype=np.int64) % q
        for i in range(1, k + 1):
            if i == l:
                continue
            # V C[j,i] = T V by alignment, so V C[j,i] a_i = T (V a_i)
            T = mat_mod(mat_mod(V, code.block_array(j, i), q), R, q)
            y = (y - mat_mod(T, np.asarray(sent[i], dtype=np.int64), q)) % q
        residues.append(y)
        desired.append(mat_mod(V, code.block_array(j, l), q))
    return linalg.solve_array(np.vstack(desired), np.concatenate(residues), q)


def recoverable_dimension(
    code: CodeSpec, plan: RepairPlan, omit: Iterable[tuple[int, int]] = ()
) -> int:
    """How many dimensions of the failed node the plan's downloads pin down.

    Builds the map from all sources to the downloaded values and returns
    rank(D) - rank(D without the failed source's columns). Equal to L exactly
    when the failed vector is uniquely determined. ``omit`` lists
    (survivor, t) pairs whose t-th sent symbol (0-based) is dropped.
    """
    l, L, k, q = plan.failed, code.L, code.k, code.q
    dropped: dict[int, set[int]] = {}
    for j, t in omit:
        dropped.setdefault(j, set()).add(t)
    rows = []
    for j, pos in plan.fetch.items():
        gen = np.hstack([code.submatrix(j, i).array for i in range(1, k + 1)])
        picked = gen[np.asarray(pos, dtype=np.int64) - 1]
        if plan.combine is not None:
            picked = mat_mod(plan.combine.array, picked, q)
        keep = [t for t in range(picked.shape[0]) if t not in dropped.get(j, ())]
        rows.append(picked[keep])
    D = np.vstack(rows)
    if l > k:
        target = np.hstack([code.submatrix(l, i).array for i in range(1, k + 1)])
        return L - (linalg.rank_array(np.vstack([D, target]), q) - linalg.rank_array(D, q))
    others = np.delete(D, np.s_[(l - 1) * L : l * L], axis=1)
    return linalg.rank_array(D, q) - linalg.rank_array(others, q)
