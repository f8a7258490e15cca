"""Addresses, hierarchical distance and ball/annulus counts on the group of order N.

A point is a finite digit sequence ``(x_1, x_2, ...)`` with ``x_i`` in
``{0, ..., N-1}``. Inside a k-ball containing the origin, a point is encoded by
the integer ``sum_i x_i * N**(i-1)`` over its first k digits, so the m-ball of a
point is ``index // N**m`` and points of one m-ball are contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hierperc.errors import ExactRangeError, InvalidInputError

#: Largest count returned by the exact counting functions (``k * log2(N) <= 62``).
MAX_EXACT = 2**62


def _check_base(N: int) -> None:
    if int(N) != N or N < 2:
        raise InvalidInputError(f"N must be an integer >= 2, got {N!r}")


def _exact(value: int, what: str) -> int:
    if value > MAX_EXACT:
        raise ExactRangeError(f"{what} = {value} exceeds the exact range 2**62")
    return value


@dataclass(frozen=True)
class Address:
    """A point of the hierarchical group.

    ``digits[i-1]`` holds ``x_i``. Trailing zeros are dropped, so equal points
    compare equal regardless of how they were built.
    """

    digits: tuple[int, ...]
    N: int

    def __init__(self, digits: Sequence[int], N: int):
        _check_base(N)
        digits = tuple(int(d) for d in digits)
        for d in digits:
            if not 0 <= d < N:
                raise InvalidInputError(f"digit {d} outside 0..{N - 1}")
        while digits and digits[-1] == 0:
            digits = digits[:-1]
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "N", int(N))

    @classmethod
    def zero(cls, N: int) -> "Address":
        return cls((), N)

    @property
    def height(self) -> int:
        """Largest index with a nonzero digit (0 for the origin)."""
        return len(self.digits)

    def digit(self, i: int) -> int:
        if i < 1:
            raise InvalidInputError("digit indices start at 1")
        return self.digits[i - 1] if i <= len(self.digits) else 0

    def __add__(self, other: "Address") -> "Address":
        if self.N != other.N:
            raise InvalidInputError(f"cannot add addresses of order {self.N} and {other.N}")
        n = max(self.height, other.height)
        return Address(
            [(self.digit(i) + other.digit(i)) % self.N for i in range(1, n + 1)], self.N
        )

    def __neg__(self) -> "Address":
        return Address([(-d) % self.N for d in self.digits], self.N)


def distance(x: Address, y: Address) -> int:
    """Hierarchical distance: 0 if ``x == y``, else the largest index where digits differ."""
    if x.N != y.N:
        raise InvalidInputError(f"addresses have different orders N={x.N} and N={y.N}")
    for i in range(max(x.height, y.height), 0, -1):
        if x.digit(i) != y.digit(i):
            return i
    return 0


def ball_point_count(N: int, k: int) -> int:
    """Number of points in a k-ball, ``N**k``."""
    _check_base(N)
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return _exact(N**k, f"{N}**{k}")


def boundary_point_count(N: int, k: int) -> int:
    """Number of points on the boundary of a k-ball, ``N**(k-1) * (N-1)``."""
    _check_base(N)
    if k < 1:
        raise InvalidInputError("boundary is defined for k >= 1")
    return _exact(N ** (k - 1) * (N - 1), "boundary count")


def annulus_point_count(N: int, j: int, l: int) -> int:
    """Number of points of the (j, l]-annulus, ``N**l - N**j``."""
    _check_base(N)
    if not 0 <= j < l:
        raise InvalidInputError(f"need 0 <= j < l, got j={j}, l={l}")
    return _exact(N**l - N**j, "annulus count")


def pair_count_at_distance(N: int, k: int, m: int) -> int:
    """Unordered pairs inside a k-ball at distance exactly m."""
    _check_base(N)
    if not 1 <= m <= k:
        raise InvalidInputError(f"need 1 <= m <= k, got m={m}, k={k}")
    return _exact(N**k * N ** (m - 1) * (N - 1) // 2, "pair count")


def _check_index(i: int, N: int, k: int) -> None:
    if not 0 <= i < N**k:
        raise InvalidInputError(f"index {i} outside the {k}-ball of order {N}")


def index_to_address(i: int, N: int, k: int) -> Address:
    _check_base(N)
    _check_index(i, N, k)
    digits = []
    for _ in range(k):
        i, d = divmod(i, N)
        digits.append(d)
    return Address(digits, N)


def address_to_index(x: Address, k: int) -> int:
    if x.height > k:
        raise InvalidInputError(f"address of height {x.height} is not in the {k}-ball")
    return sum(d * x.N**i for i, d in enumerate(x.digits))


def subball_index(i: int, N: int, k: int, m: int) -> int:
    """Which m-ball of the k-ball contains point ``i``."""
    _check_base(N)
    _check_index(i, N, k)
    if not 1 <= m <= k:
        raise InvalidInputError(f"need 1 <= m <= k, got m={m}, k={k}")
    return i // N**m


def index_distance(i, j, N: int):
    """Hierarchical distance between ball indices; works elementwise on arrays."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    d = np.zeros(np.broadcast(i, j).shape, dtype=np.int64)
    a, b = i.copy(), j.copy()
    while True:
        differ = a != b
        if not differ.any():
            break
        d += differ
        a //= N
        b //= N
    return d if d.ndim else int(d)
