"""Connection-probability families ``p_(k) = min(c_k / N**(k(1+delta)), 1)``.

Three families of rates ``c_k`` are supported, plus a finite lookup table:

* :class:`Constant` -- ``c_k = c``;
* :class:`LogPoly` -- ``c_k = C0 + C1 log k + C2 k**alpha``;
* :class:`ScaledLog` -- ``c`` pinned at the scale points ``k_n = floor(K n log n)``
  to ``C + a log n * N**(b log n)`` and interpolated in between.

Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

from hierperc.errors import InvalidInputError, RegimeError


class Interpolation(str, Enum):
    LOWER = "lower"
    UPPER = "upper"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class Constant:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidInputError(f"Constant rate needs c > 0, got {self.c}")


@dataclass(frozen=True)
class LogPoly:
    C0: float = 0.0
    C1: float = 0.0
    C2: float = 0.0
    alpha: float = 1.0

    def __post_init__(self):
        if min(self.C0, self.C1, self.C2) < 0:
            raise InvalidInputError("LogPoly needs C0, C1, C2 >= 0")
        if not self.alpha > 0:
            raise InvalidInputError("LogPoly needs alpha > 0")


@dataclass(frozen=True)
class ScaledLog:
    """Rates on the logarithmic scale ``k_n(K)``.

    ``head`` optionally fixes ``c_j`` for ``1 <= j < k_2``; without it those
    distances are undefined and raise.
    """

    K: float
    C: float = 0.0
    a: float = 1.0
    b: float = 0.0
    interpolation: Interpolation = Interpolation.LOWER
    head: float | None = None

    def __post_init__(self):
        if not self.K > 0:
            raise InvalidInputError("ScaledLog needs K > 0")
        if self.C < 0 or self.b < 0:
            raise InvalidInputError("ScaledLog needs C >= 0 and b >= 0")
        if not self.a > 0:
            raise InvalidInputError("ScaledLog needs a > 0")
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))
        if self.head is not None and not self.head > 0:
            raise InvalidInputError("head rate must be > 0")


@dataclass(frozen=True)
class Table:
    """Explicit ``c_1, ..., c_L``; distances beyond L are undefined."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values or min(self.values) < 0:
            raise InvalidInputError("Table needs at least one nonnegative rate")


RateSpec = Union[Constant, LogPoly, ScaledLog, Table]


@dataclass(frozen=True)
class ConnectionProfile:
    N: int
    delta: float
    rates: RateSpec

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidInputError(f"N must be an integer >= 2, got {self.N!r}")
        if not self.delta > -1:
            raise InvalidInputError(f"delta must exceed -1, got {self.delta}")

    def c(self, k: int) -> float:
        """The rate ``c_k`` at distance k."""
        if k < 1:
            raise InvalidInputError("distances start at 1")
        r = self.rates
        if isinstance(r, Constant):
            return float(r.c)
        if isinstance(r, LogPoly):
            return r.C0 + r.C1 * math.log(k) + r.C2 * k**r.alpha
        if isinstance(r, ScaledLog):
            return c_scaled(r, self.N, k)
        if isinstance(r, Table):
            if k > len(r.values):
                raise InvalidInputError(f"rate table has no entry for k={k}")
            return r.values[k - 1]
        raise TypeError(f"unknown rate spec {r!r}")

    def p(self, k: int) -> float:
        return connection_probability(self, k)

    def log_p(self, k: int) -> float:
        """``log p_(k)``; ``-inf`` when the rate is zero."""
        ck = self.c(k)
        if ck <= 0:
            return -math.inf
        return min(0.0, math.log(ck) - k * (1 + self.delta) * math.log(self.N))


def connection_probability(profile: ConnectionProfile, k: int) -> float:
    ck = profile.c(k)
    if ck <= 0:
        return 0.0
    try:
        return min(ck / float(profile.N) ** (k * (1 + profile.delta)), 1.0)
    except OverflowError:
        return math.exp(profile.log_p(k))


def scale_index(K: float, n: int) -> int:
    """``k_n(K) = floor(K n log n)``."""
    if n < 1:
        raise InvalidInputError("scale index needs n >= 1")
    return math.floor(K * n * math.log(n))


def block_index(K: float, j: int) -> int:
    """Largest ``n >= 2`` with ``k_n(K) <= j``.

    Raises when ``j`` lies below the first scale point ``k_2``.
    """
    if j < scale_index(K, 2):
        raise InvalidInputError(f"distance {j} is below the first scale point k_2={scale_index(K, 2)}")
    hi = 4
    while scale_index(K, hi) <= j:
        hi *= 2
    lo = 2
    # invariant: k_lo <= j < k_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if scale_index(K, mid) <= j:
            lo = mid
        else:
            hi = mid
    return lo


def scale_point_rate(C: float, a: float, b: float, N: int, n: int) -> float:
    """``C + a log n * N**(b log n)``, the rate pinned at ``k_n``."""
    ln = math.log(n)
    return C + a * ln * math.exp(b * ln * math.log(N))


def c_scaled(spec: ScaledLog, N: int, j: int) -> float:
    """Rate at distance j for a :class:`ScaledLog` spec."""
    if j < scale_index(spec.K, 2) and spec.head is not None:
        return spec.head
    n = block_index(spec.K, j)
    lower = scale_point_rate(spec.C, spec.a, spec.b, N, n)
    k_lo = scale_index(spec.K, n)
    if j == k_lo or spec.interpolation is Interpolation.LOWER:
        return lower
    upper = scale_point_rate(spec.C, spec.a, spec.b, N, n + 1)
    if spec.interpolation is Interpolation.UPPER:
        return upper
    t = (j - k_lo) / (scale_index(spec.K, n + 1) - k_lo)
    return lower ** (1 - t) * upper**t


def a_star(K: float, b: float, N: int) -> float:
    """Threshold on ``a`` above which the cascade certificate applies.

    Requires ``2/log N < K < b < 2K - 1/log N``.
    """
    lnN = math.log(N)
    if not 2 / lnN < K:
        raise RegimeError(f"need 2/log N < K, got 2/log N = {2 / lnN:.6g}, K = {K}")
    if not K < b:
        raise RegimeError(f"need K < b, got K = {K}, b = {b}")
    if not b < 2 * K - 1 / lnN:
        raise RegimeError(f"need b < 2K - 1/log N = {2 * K - 1 / lnN:.6g}, got b = {b}")
    return 25 * (K * lnN + K / (2 * K - b))
