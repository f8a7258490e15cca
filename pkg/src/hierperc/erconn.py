"""Erdős–Rényi connectivity and binomial large-deviation bounds.

Exact connectivity of G(n, p) uses the classical recursion on the component
of vertex 1; Monte Carlo estimates use union-find over Bernoulli edges. The
bounds implemented here are the connectivity lower bound obtained from
Durrett's epidemic argument, the non-connectivity upper bound derived from it,
and the binomial tail bound ``P(Y >= x) <= exp(-h(c) x)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp

from hierperc import _unionfind as uf
from hierperc._mc import Estimate, map_replicates, stream, wilson
from hierperc.errors import InvalidInputError, RegimeError
from hierperc.sampler import log_no_edge

#: Beyond this many vertices the recursion loses precision in double arithmetic.
MAX_EXACT_VERTICES = 400

_MC_BLOCK = 4096


def er_probability(n: int, a: float) -> float:
    """Edge probability ``a log n / n`` of the ``(n, a)`` parametrization, clamped to 1."""
    p = a * math.log(n) / n
    if p > 1:
        warnings.warn(f"a log n / n = {p:.4g} exceeds 1; clamped", stacklevel=2)
        return 1.0
    return p


def exact_connectivity(n: int, p: float) -> float:
    """P(G(n, p) is connected).

    Uses ``P(m) = 1 - sum_{k<m} C(m-1, k-1) P(k) (1-p)^{k(m-k)}``, the sum
    running over the size k of the component holding a fixed vertex.
    """
    if not 1 <= n <= MAX_EXACT_VERTICES:
        raise InvalidInputError(f"exact connectivity supports 1 <= n <= {MAX_EXACT_VERTICES}, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    if p == 1.0:
        return 1.0
    log_q = math.log1p(-p)
    logP = np.full(n + 1, -np.inf)
    logP[1] = 0.0
    for m in range(2, n + 1):
        k = np.arange(1, m, dtype=np.float64)
        log_binom = gammaln(m) - gammaln(k) - gammaln(m - k + 1)
        terms = np.exp(log_binom + logP[1:m] + k * (m - k) * log_q)
        P_m = min(1.0, max(0.0, 1.0 - math.fsum(terms)))
        logP[m] = math.log(P_m) if P_m > 0 else -np.inf
    return float(np.exp(logP[n]))


def _pairs(n: int):
    i, j = np.triu_indices(n, 1)
    return i.astype(np.int64), j.astype(np.int64)


def _connected_block(args) -> int:
    n, p, seed, block, reps = args
    pi, pj = _pairs(n)
    rng = stream(seed, block)
    present = rng.random((reps, pi.shape[0])) < p
    return int(uf.count_connected(n, pi, pj, present).sum())


def mc_connectivity(n: int, p: float, replicates: int, seed: int, workers: int = 1) -> Estimate:
    """Monte Carlo estimate of P(G(n, p) is connected) with a Wilson interval.

    Replicates are drawn in fixed blocks of 4096, block b using the stream
    ``(seed, b)``; the estimate does not depend on ``workers``.
    """
    if n < 1 or replicates < 1:
        raise InvalidInputError("need n >= 1 and replicates >= 1")
    tasks = []
    for block, start in enumerate(range(0, replicates, _MC_BLOCK)):
        tasks.append((n, p, seed, block, min(_MC_BLOCK, replicates - start)))
    hits = sum(map_replicates(_connected_block, tasks, workers))
    return wilson(hits, replicates)


@dataclass(frozen=True)
class DurrettBound:
    value: float
    """The bound clamped to [0, 1]."""
    log_abs_raw: float
    raw_sign: int
    clamped: bool

    @property
    def raw(self) -> float:
        if self.log_abs_raw > 709:
            return self.raw_sign * math.inf
        return self.raw_sign * math.exp(self.log_abs_raw)


def durrett_lower_bound(n: int, a: float) -> DurrettBound:
    """Lower bound on P(G(n, a log n / n) is connected), valid for a > 1.

    The raw value is ``base**n * (1 - exp(-(log n)^3/100))**(n(n-1))`` where
    ``base`` is the bracketed product. A negative ``base`` makes the bound
    vacuous; its power is then reported with a negative sign whatever the
    parity of n, and the clamped value is 0.
    """
    if not a > 1:
        raise RegimeError(f"need a > 1, got a = {a}")
    if n < 2:
        raise InvalidInputError("need n >= 2")
    ln = math.log(n)
    log_x1 = math.log(14) + 13 * math.log(a * ln) + 13 * a * ln / n - a * ln
    x1 = math.exp(log_x1) if log_x1 < 709 else math.inf
    rest = math.log1p(-math.exp(-2.1 * ln)) + math.log1p(-math.exp(-2.0 * ln))
    tail_log = log_no_edge(ln + math.log(n - 1), -(ln**3) / 100)
    if x1 == 1.0:
        return DurrettBound(0.0, -math.inf, 0, False)
    if x1 > 1.0:
        # base = (1 - x1)(...) < 0
        log_base = log_x1 + math.log(-math.expm1(-log_x1)) if x1 < math.inf else log_x1
        return DurrettBound(0.0, n * (log_base + rest) + tail_log, -1, True)
    log_abs = n * (math.log1p(-x1) + rest) + tail_log
    raw = math.exp(log_abs) if log_abs < 709 else math.inf
    return DurrettBound(min(raw, 1.0), log_abs, 1, raw > 1.0)


def nonconnectivity_upper_bound(n: int, a: float, M: float = 1.0, L: float = 1.0, exponent13: bool = True) -> float:
    """``M [(log n)^13 n^(1-a) + 1/n + exp(-L (log n)^e n^2)]`` with e = 13 or 3."""
    if not a > 1:
        raise RegimeError(f"need a > 1, got a = {a}")
    ln = math.log(n)
    e = 13 if exponent13 else 3
    return M * (ln**13 * n ** (1 - a) + 1 / n + math.exp(-L * ln**e * n**2))


def fit_nonconnectivity_constant(a: float, ns, L: float = 1.0, exponent13: bool = True) -> float:
    """Smallest M making the upper bound dominate ``1 - durrett_lower_bound`` on ``ns``."""
    need = 0.0
    for n in ns:
        gap = 1.0 - durrett_lower_bound(n, a).value
        need = max(need, gap / nonconnectivity_upper_bound(n, a, 1.0, L, exponent13))
    return need


def h(c: float) -> float:
    """``log c - 1 + 1/c``; positive for c > 1."""
    return math.log(c) - 1 + 1 / c


def _h_ratio(u: float) -> float:
    # h(1+u)/u^2 without cancelling log(1+u) against u/(1+u)
    return (math.log1p(u) - u / (1 + u)) / (u * u)


def binomial_tail_bound(n: int, q: float, x: float, c: float) -> float:
    """Large-deviation bound ``exp(-h(c) x)`` on ``P(Bin(n, q) >= x)``, for ``x >= c n q``."""
    if not c > 1:
        raise InvalidInputError(f"need c > 1, got c = {c}")
    if x < c * n * q:
        raise InvalidInputError(f"bound needs x >= c n q = {c * n * q:.6g}, got x = {x}")
    return math.exp(-h(c) * x)


def exact_binomial_tail(n: int, q: float, x: float) -> float:
    """``P(Bin(n, q) >= x)`` by summing the pmf in log space."""
    if n < 0 or not 0 <= q <= 1:
        raise InvalidInputError("need n >= 0 and q in [0, 1]")
    lo = max(0, math.ceil(x))
    if lo > n:
        return 0.0
    if lo == 0:
        return 1.0
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    ks = np.arange(lo, n + 1, dtype=np.float64)
    logpmf = gammaln(n + 1) - gammaln(ks + 1) - gammaln(n - ks + 1) + ks * math.log(q) + (n - ks) * math.log1p(-q)
    return float(min(1.0, math.exp(logsumexp(logpmf))))


def chernoff_kappa(eps_max: float = 1.0) -> tuple[float, float]:
    """Largest κ (to 1e-6) with ``h(1+u) >= κ u^2`` on ``(0, eps_max]``.

    Returns ``(κ, eps_max)``.
    """
    if not 0 < eps_max <= 1:
        raise InvalidInputError("eps_max must lie in (0, 1]")
    res = minimize_scalar(_h_ratio, bounds=(1e-9, eps_max), method="bounded", options={"xatol": 1e-12})
    low = min(res.fun, _h_ratio(eps_max), 0.5)
    # round down so the inequality holds with slack
    return math.floor(low * 1e6) / 1e6, eps_max


@dataclass(frozen=True)
class BinomialDeficit:
    bound: float
    exact: float


def binomial_deficit_bound(n: int, p: float, sigma: float, kappa: float, eps: float) -> BinomialDeficit:
    """``P(1 - Y/n <= p - σ(1-p)) <= exp(-κ σ² (1-p) n)`` for ``Y ~ Bin(n, 1-p)``.

    Requires ``0 < σ < min(p/(1-p), eps)`` where ``(κ, eps)`` come from
    :func:`chernoff_kappa`.
    """
    if not 0 < p < 1:
        raise InvalidInputError("need 0 < p < 1")
    if not 0 < sigma < min(p / (1 - p), eps):
        raise InvalidInputError(f"need 0 < sigma < min(p/(1-p), eps) = {min(p / (1 - p), eps):.6g}")
    bound = math.exp(-kappa * sigma**2 * (1 - p) * n)
    # 1 - Y/n <= p - σ(1-p)  <=>  Y >= n (1-p)(1+σ)
    exact = exact_binomial_tail(n, 1 - p, n * (1 - p) * (1 + sigma))
    return BinomialDeficit(bound, exact)
