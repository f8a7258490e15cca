"""Mean-field (N -> infinity) percolation.

At level k two giant components of relative size ``beta_{k-1}`` merge through
a Poisson branching mechanism with parameter ``c_k beta_{k-1}^2``, giving

    beta_k = 1 - exp(-c_k beta_{k-1}^2 beta_k),    beta_0 = 1,

and the percolation probability is the infinite product of the ``beta_k``.
Asymptotic percolation holds exactly when ``sum exp(-c_k)`` converges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import bisect

Rates = Union[float, Sequence[float], np.ndarray, Callable[[np.ndarray], np.ndarray]]

BISECTION_TOL = 1e-12


def survival_beta(lam: float) -> float:
    """Survival probability of a Poisson(λ) branching process.

    The positive root of ``beta = 1 - exp(-λ beta)`` for λ > 1, else 0.
    """
    if lam <= 1.0:
        return 0.0
    if math.exp(-lam) == 0.0:
        return 1.0 - math.exp(-lam)

    def g(b):
        return -math.expm1(-lam * b) - b

    # g > 0 at (λ-1)/λ² since 1 - e^{-y} >= y - y²/2
    lo = (lam - 1.0) / (lam * lam)
    return bisect(g, lo, 1.0, xtol=BISECTION_TOL)


def rate_array(c: Rates, kmax: int) -> np.ndarray:
    """``c_1 .. c_kmax`` from a constant, a table, or a vectorized function of k."""
    ks = np.arange(1, kmax + 1, dtype=np.float64)
    if callable(c):
        out = np.asarray(c(ks), dtype=np.float64)
        return np.broadcast_to(out, ks.shape).copy()
    if np.ndim(c) == 0:
        return np.full(kmax, float(c))
    arr = np.asarray(c, dtype=np.float64)
    if arr.shape[0] < kmax:
        raise ValueError(f"rate table has {arr.shape[0]} entries, need {kmax}")
    return arr[:kmax].copy()


def log_rates(a: float, shift: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """``c_k = a log(k + shift)``."""

    def c(ks):
        return a * np.log(ks + shift)

    return c


@dataclass
class MeanFieldSequence:
    c: np.ndarray
    """``c[k-1] = c_k``."""
    beta: np.ndarray
    """``beta[k] = beta_k``, with ``beta[0] = 1``."""
    products: np.ndarray
    """``products[k-1]`` is the partial product up to k."""
    exp_sums: np.ndarray
    """``exp_sums[k-1]`` is the partial sum of ``exp(-c_j)`` up to k."""
    extinct_at: int | None
    """First k with ``c_k beta_{k-1}^2 <= 1``, if any."""

    @property
    def kmax(self) -> int:
        return self.c.shape[0]


def _check_standing(c: np.ndarray) -> None:
    if c.shape[0] >= 1 and not c[0] > 2 * math.log(2):
        warnings.warn(f"c_1 = {c[0]:.6g} does not exceed 2 log 2", stacklevel=3)
    if c.shape[0] >= 2 and not c[1] > 8 * math.log(2):
        warnings.warn(f"c_2 = {c[1]:.6g} does not exceed 8 log 2", stacklevel=3)


def beta_sequence(c: Rates, kmax: int) -> MeanFieldSequence:
    """Iterate the fixed-point recursion up to ``kmax``.

    Once ``λ_k <= 1`` the cascade is extinct: every later ``beta`` is 0.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    rates = rate_array(c, kmax)
    _check_standing(rates)
    beta = np.zeros(kmax + 1)
    beta[0] = 1.0
    extinct = None
    for k in range(1, kmax + 1):
        lam = rates[k - 1] * beta[k - 1] ** 2
        if lam <= 1.0:
            extinct = k
            break
        beta[k] = survival_beta(lam)
    # partial products in log space so long horizons do not lose digits
    with np.errstate(divide="ignore"):
        logs = np.log(beta[1:])
    products = np.exp(np.cumsum(logs))
    exp_sums = np.cumsum(np.exp(-rates))
    return MeanFieldSequence(rates, beta, products, exp_sums, extinct)


@dataclass(frozen=True)
class PercolationEstimate:
    product: float
    converged: bool
    tail_deficit: float
    """``sum (1 - beta_k)`` over the last 10% of the horizon."""
    extinct_at: int | None


def percolation_probability(c: Rates, kmax: int, tol: float = 1e-8) -> PercolationEstimate:
    """Truncated product of the ``beta_k`` with a convergence flag.

    The flag is set when successive partial products differ by less than
    ``tol`` over the last 10% of the horizon.
    """
    return percolation_from_sequence(beta_sequence(c, kmax), tol)


def percolation_from_sequence(seq: MeanFieldSequence, tol: float = 1e-8) -> PercolationEstimate:
    kmax = seq.kmax
    start = max(1, kmax - kmax // 10) - 1
    window = seq.products[start:]
    prev = seq.products[start - 1] if start > 0 else 1.0
    steps = np.abs(np.diff(np.concatenate([[prev], window])))
    deficit = float(np.sum(1.0 - seq.beta[start + 1 :]))
    return PercolationEstimate(
        product=float(seq.products[-1]),
        converged=bool(np.all(steps < tol)),
        tail_deficit=deficit,
        extinct_at=seq.extinct_at,
    )


@dataclass(frozen=True)
class SummabilityReport:
    """Heuristic verdict on ``sum exp(-c_k)`` at a finite horizon.

    ``ratio`` is the last decade's increment divided by the previous decade's.
    Terms of a convergent series shrink, so a ratio clearly below 1 marks the
    series "summable-at-horizon"; ``tail_estimate`` extrapolates the remainder
    geometrically. ``cauchy`` reports the stricter check that the increment
    over the last decade is below ``tol``.
    """

    partial_sums: np.ndarray
    total: float
    ratio: float
    summable: bool
    cauchy: bool
    tail_estimate: float

    @property
    def verdict(self) -> str:
        return "summable-at-horizon" if self.summable else "not summable at horizon"


def exp_summability(c: Rates, kmax: int, tol: float = 1e-9, ratio_limit: float = 0.99) -> SummabilityReport:
    """Partial sums of ``exp(-c_k)`` and a labelled heuristic convergence verdict."""
    if kmax < 100:
        raise ValueError("need kmax >= 100 to compare two decades")
    sums = np.cumsum(np.exp(-rate_array(c, kmax)))
    total = float(sums[-1])
    k1 = kmax // 10
    k0 = k1 // 10
    last = total - sums[k1 - 1]
    prev = sums[k1 - 1] - sums[k0 - 1]
    if last == 0.0:
        ratio = 0.0
    elif prev == 0.0:
        ratio = math.inf
    else:
        ratio = last / prev
    summable = ratio < ratio_limit
    tail = last * ratio / (1 - ratio) if summable else math.inf
    return SummabilityReport(sums, total, ratio, summable, bool(last < tol), tail)
