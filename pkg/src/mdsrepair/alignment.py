"""Subspace interference alignment problems, independent of storage.

An alignment instance is a list of full-rank L x L matrices H_i and
half-rank L/2 x L matrices V_i such that each V_i is an invariant row space
of every H_j (j != i) and is disjoint from V_i H_i. Small instances come from
eigenvectors; large ones are stitched together from 2 x 2 factors with
Kronecker products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codes import TensorFramework
from .errors import BadFieldError, NoSolutionFoundError
from .gf import make_field
from .linalg import (
    Matrix,
    eigen_scan,
    kron_all,
    rank,
    rowspan_equal,
    rowspan_independent,
)

RETRY_LIMIT = 64
PRESETS = ("permutation", "ergodic", "search")


@dataclass(frozen=True)
class AlignmentInstance:
    N: int
    L: int
    q: int
    H: tuple[Matrix, ...]
    V: tuple[Matrix, ...]


@dataclass(frozen=True)
class SimpleTriple:
    U0: Matrix
    G0: Matrix
    G1: Matrix


def verify_instance(inst: AlignmentInstance) -> bool:
    L = inst.L
    if L % 2 or len(inst.H) != inst.N or len(inst.V) != inst.N:
        return False
    for i, (H, V) in enumerate(zip(inst.H, inst.V)):
        if H.shape != (L, L) or rank(H) != L:
            return False
        if V.cols != L or rank(V) != L // 2:
            return False
        if not rowspan_independent(V, V @ H):
            return False
        for j, Hj in enumerate(inst.H):
            if j != i and not rowspan_equal(V @ Hj, V):
                return False
    return True


def verify_simple(t: SimpleTriple) -> bool:
    return (
        rank(t.G0) == 2
        and rank(t.G1) == 2
        and rank(t.U0) == 1
        and rowspan_equal(t.U0 @ t.G0, t.U0)
        and rowspan_independent(t.U0 @ t.G1, t.U0)
    )


def _random_full_rank(rng: np.random.Generator, size: int, q: int) -> Matrix:
    while True:
        M = Matrix(rng.integers(0, q, size=(size, size)), q)
        if rank(M) == size:
            return M


def _left_eigenrows(M: Matrix) -> list[Matrix]:
    """Row vectors v (one per eigenspace basis column) with v M parallel to v."""
    return [Matrix(basis.array[:, c], M.field) for _, basis in eigen_scan(M.T) for c in range(basis.cols)]


def solve_problem1(q: int, seed: int = 0) -> AlignmentInstance:
    """N = 2, L = 2 instance by the eigenvector method.

    V_i is a left eigenvector of H_j (j != i), which makes its span invariant
    under H_j; it must not also be a left eigenvector of H_i.
    """
    make_field(q)
    rng = np.random.default_rng(seed)
    for _ in range(RETRY_LIMIT):
        H1 = _random_full_rank(rng, 2, q)
        H2 = _random_full_rank(rng, 2, q)
        for V1 in _left_eigenrows(H2):
            if not rowspan_independent(V1, V1 @ H1):
                continue
            for V2 in _left_eigenrows(H1):
                inst = AlignmentInstance(2, 2, q, (H1, H2), (V1, V2))
                if verify_instance(inst):
                    return inst
    raise NoSolutionFoundError(f"no N = 2 instance over F_{q} after {RETRY_LIMIT} draws")


def _root_of_unity(s: int, q: int) -> int:
    """Smallest element of exact multiplicative order s in F_q."""
    if (q - 1) % s:
        raise BadFieldError(f"F_{q} has no primitive {s}-th root of unity")
    for w in range(2, q):
        if pow(w, s, q) == 1 and all(pow(w, s // p, q) != 1 for p in _prime_factors(s)):
            return w
    raise BadFieldError(f"F_{q} has no primitive {s}-th root of unity")


def _prime_factors(s: int) -> list[int]:
    out, p = [], 2
    while p * p <= s:
        if s % p == 0:
            out.append(p)
            while s % p == 0:
                s //= p
        p += 1
    if s > 1:
        out.append(s)
    return out


def framework_preset(s: int, q: int, preset: str, seed: int = 0) -> TensorFramework:
    """Kronecker factors of width s = n - k.

    permutation: U0 = e_1, G0 = I, G_m = (cyclic shift)**m. Reproduces the
        permutation codes exactly.
    ergodic: U0 = (1, -1, 1, ...), G0 = I, G_m = diag(w**(c m)) with w a
        primitive s-th root of unity; for s = 2 this is G1 = diag(1, -1).
    search: random G's, U0 a left eigenvector of G0 (s = 2 only).
    """
    f = make_field(q)
    eye = Matrix.identity(s, f)
    if preset == "permutation":
        shift = Matrix(np.roll(np.eye(s, dtype=np.int64), 1, axis=1), f)
        G = tuple(shift**m for m in range(s))
        U0 = Matrix(np.eye(s, dtype=np.int64)[0], f)
        return TensorFramework(U0, eye, G, preset)
    if preset == "ergodic":
        if q == 2:
            raise BadFieldError("ergodic preset degenerates over F_2 (-1 == 1)")
        w = _root_of_unity(s, q)
        G = tuple(Matrix(np.diag([pow(w, c * m, q) for c in range(s)]), f) for m in range(s))
        U0 = Matrix([(-1) ** c for c in range(s)], f)
        return TensorFramework(U0, eye, G, preset)
    if preset == "search":
        if s != 2:
            raise ValueError("search preset is only defined for width 2")
        t = solve_simple(q, "search", seed)
        return TensorFramework(t.U0, eye, (t.G0, t.G1), preset)
    raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")


def default_framework(s: int, q: int) -> TensorFramework:
    """Framework used when a tensor code is rebuilt from its header alone."""
    if q > 2 and (q - 1) % s == 0:
        return framework_preset(s, q, "ergodic")
    return framework_preset(s, q, "permutation")


def solve_simple(q: int, preset: str = "permutation", seed: int = 0) -> SimpleTriple:
    """Find U0 (1x2), G0, G1 (2x2) with U0 G0 ~ U0 and U0 G1 independent of U0."""
    f = make_field(q)
    if preset in ("permutation", "ergodic"):
        fw = framework_preset(2, q, preset)
        return SimpleTriple(fw.U0, fw.G[0], fw.G[1])
    if preset != "search":
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    rng = np.random.default_rng(seed)
    for _ in range(RETRY_LIMIT):
        G0 = _random_full_rank(rng, 2, q)
        G1 = _random_full_rank(rng, 2, q)
        for U0 in _left_eigenrows(G0):
            t = SimpleTriple(U0, G0, G1)
            if verify_simple(t):
                return t
    raise NoSolutionFoundError(f"no simple triple over F_{f.q} after {RETRY_LIMIT} draws")


def stitch(N: int, t: SimpleTriple, U1: Matrix | None = None, lambdas: Sequence[int] | None = None) -> AlignmentInstance:
    """H_i = lam_i (G0 x .. x G1 x .. x G0), V_i = U1 x .. x U0 x .. x U1, factor i in slot i."""
    f = t.U0.field
    U1 = U1 if U1 is not None else Matrix.identity(2, f)
    lambdas = lambdas if lambdas is not None else [1] * N
    H, V = [], []
    for i in range(N):
        H.append(kron_all([t.G0] * i + [t.G1] + [t.G0] * (N - 1 - i)).scale(lambdas[i]))
        V.append(kron_all([U1] * i + [t.U0] + [U1] * (N - 1 - i)))
    return AlignmentInstance(N, 2**N, f.q, tuple(H), tuple(V))


def solve_problem2(N: int, q: int, preset: str = "permutation", seed: int = 0) -> AlignmentInstance:
    if N < 2:
        raise ValueError("stitched instances need N >= 2")
    t = solve_simple(q, preset, seed)
    rng = np.random.default_rng(seed)
    lambdas = [int(v) for v in rng.integers(1, q, size=N)]
    inst = stitch(N, t, lambdas=lambdas)
    if not verify_instance(inst):
        raise NoSolutionFoundError(f"stitched instance failed verification (N={N}, q={q}, preset={preset})")
    return inst
