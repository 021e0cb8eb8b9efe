"""Base-(n-k) index arithmetic for vectors of length L = (n-k)**k.

Positions m run 1..L. ``phi(m)`` gives the k digits of m-1 in base n-k with
the first digit most significant, so for (n, k) = (5, 3) position 5 is
(1, 0, 0). ``digit_shift`` adds r (mod n-k) to one digit; with r = 1 it is
the map that defines the permutation matrices of the codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import BadDigitError, BadPositionError, IndexOutOfRangeError


@dataclass(frozen=True)
class IndexSystem:
    k: int
    base: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.base < 2:
            raise ValueError(f"base n-k must be >= 2, got {self.base}")

    @classmethod
    def for_code(cls, n: int, k: int) -> IndexSystem:
        return cls(k, n - k)

    @property
    def L(self) -> int:
        return self.base**self.k

    def _check_m(self, m: int):
        if not 1 <= m <= self.L:
            raise IndexOutOfRangeError(f"index {m} outside 1..{self.L}")

    def _check_i(self, i: int):
        if not 1 <= i <= self.k:
            raise BadPositionError(f"digit position {i} outside 1..{self.k}")

    def phi(self, m: int) -> tuple[int, ...]:
        self._check_m(m)
        v = m - 1
        digits = []
        for _ in range(self.k):
            v, d = divmod(v, self.base)
            digits.append(d)
        return tuple(reversed(digits))

    def phi_inv(self, digits: Sequence[int]) -> int:
        if len(digits) != self.k:
            raise BadDigitError(f"expected {self.k} digits, got {len(digits)}")
        v = 0
        for d in digits:
            if not 0 <= d < self.base:
                raise BadDigitError(f"digit {d} outside 0..{self.base - 1}")
            v = v * self.base + d
        return v + 1

    def digit(self, m: int, i: int) -> int:
        """The i-th digit of phi(m)."""
        self._check_i(i)
        return self.phi(m)[i - 1]

    def digit_shift(self, m: int, i: int, r: int) -> int:
        self._check_m(m)
        self._check_i(i)
        if not 0 <= r < self.base:
            raise BadDigitError(f"shift {r} outside 0..{self.base - 1}")
        d = list(self.phi(m))
        d[i - 1] = (d[i - 1] + r) % self.base
        return self.phi_inv(d)

    def positions_with_digit(self, i: int, value: int = 0) -> list[int]:
        """Sorted positions m with phi_i(m) == value."""
        self._check_i(i)
        return [m + 1 for m in np.flatnonzero(self.digit_table[:, i - 1] == value).tolist()]

    # vectorised tables (0-based) used by the encode/repair fast paths

    @cached_property
    def digit_table(self) -> np.ndarray:
        """Row m-1 holds phi(m)."""
        idx = np.arange(self.L)
        weights = self.base ** np.arange(self.k - 1, -1, -1)
        return (idx[:, None] // weights[None, :]) % self.base

    def shift_table(self, i: int, r: int) -> np.ndarray:
        """0-based array s with s[m-1] = digit_shift(m, i, r) - 1."""
        self._check_i(i)
        r %= self.base
        weight = self.base ** (self.k - i)
        d = self.digit_table[:, i - 1]
        return np.arange(self.L) + (((d + r) % self.base) - d) * weight
