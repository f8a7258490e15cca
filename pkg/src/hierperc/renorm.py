"""Renormalization of balls into vertices, the good-ball cascade, and its closed forms.

The renormalization map contracts every ``k_n``-ball of a ``k_{n+1}``-ball to
one vertex and joins two vertices when some edge links the largest clusters of
the two balls. Iterating this over the scale ``k_n`` gives the cascade

    beta_{n+1} = (1 - eps_n) pG_n beta_n,    eps_n = n^-(1+theta),

where ``pG_n`` is the probability that a ``k_n``-ball is ``beta_n``-good.

Besides the Monte Carlo pieces, this module evaluates in closed form the
annulus-connection probabilities used in the proofs, the cluster-connection
rates ``r_n`` and ``r~_n``, and a certificate checker that bounds the three
infinite products driving the cascade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, gammaln

from hierperc import _unionfind as uf
from hierperc._mc import Estimate, map_replicates, stream, wilson
from hierperc.erconn import chernoff_kappa, exact_binomial_tail
from hierperc.errors import InfeasibleScaleError, InvalidInputError, RegimeError
from hierperc.hierarchy import ball_point_count
from hierperc.profiles import ConnectionProfile, Interpolation, ScaledLog, a_star, scale_index
from hierperc.sampler import GraphRealization, realize_ball

#: Largest ball simulated by the cascade routines.
MAX_CASCADE_POINTS = 2**24

#: ``(4/5)**(1/3)``, the floor each of the three cascade products must clear.
PRODUCT_FLOOR = (4 / 5) ** (1 / 3)


class GoodMode(str, Enum):
    GAMMA = "gamma"
    BETA = "beta"


@dataclass(frozen=True)
class GoodBallConfig:
    """A k-ball is good when its largest cluster reaches ``threshold(N, k)``.

    ``gamma`` mode: ``N**(gamma k)``; ``beta`` mode: ``beta N**k``.
    """

    mode: GoodMode
    value: float

    def __post_init__(self):
        object.__setattr__(self, "mode", GoodMode(self.mode))
        if not 0 < self.value <= 1:
            raise InvalidInputError(f"{self.mode.value} must lie in (0, 1], got {self.value}")

    @classmethod
    def gamma(cls, g: float) -> "GoodBallConfig":
        return cls(GoodMode.GAMMA, g)

    @classmethod
    def beta(cls, b: float) -> "GoodBallConfig":
        return cls(GoodMode.BETA, b)

    def threshold(self, N: int, k: int) -> float:
        if self.mode is GoodMode.GAMMA:
            return float(N) ** (self.value * k)
        return self.value * float(N) ** k


# ---------------------------------------------------------------------------
# renormalized graph


@dataclass
class RenormalizedGraph:
    """Vertices are the good ``m``-balls of a realization, in ball order."""

    level: int
    balls: np.ndarray
    """Indices of the good m-balls."""
    cluster_roots: np.ndarray
    cluster_sizes: np.ndarray
    edges: np.ndarray
    """Shape ``(E, 2)``, positions into ``balls``, each pair once with ``i < j``."""
    connected: bool
    threshold: float
    merged_size: int
    """Size of the realization's cluster holding every chosen cluster, 0 if not connected."""

    @property
    def n_vertices(self) -> int:
        return self.balls.shape[0]


def _level_forest(realization: GraphRealization, m: int) -> np.ndarray:
    forest = uf.UnionFind(realization.n_points)
    xs, ys = realization.edge_arrays(1, m)
    forest.union(xs, ys)
    return forest


def renormalized_graph(realization: GraphRealization, m: int, config: GoodBallConfig) -> RenormalizedGraph:
    """Contract the m-balls of ``realization`` and keep the good ones.

    Each m-ball's cluster is its largest component built from edges of
    classes ``<= m``, ties broken uniformly. Two good balls are adjacent when
    an edge of class ``> m`` joins their clusters. A single good ball counts
    as connected; no good ball does not.
    """
    if realization.edges is None:
        raise InvalidInputError("renormalization needs a realization with retained edges")
    N, k = realization.N, realization.k
    if not 1 <= m < k:
        raise InvalidInputError(f"need 1 <= m < k, got m={m}, k={k}")
    forest = _level_forest(realization, m)
    roots = forest.roots()
    root_ids = np.flatnonzero(roots == np.arange(realization.n_points))
    sizes = forest.size[root_ids]
    ball_of = root_ids // N**m
    rng = stream(realization.seed, realization.replicate, k + m)
    noise = rng.random(root_ids.shape[0])
    order = np.lexsort((noise, -sizes, ball_of))
    first = np.ones(order.shape[0], dtype=bool)
    first[1:] = ball_of[order][1:] != ball_of[order][:-1]
    chosen = order[first]
    threshold = config.threshold(N, m)
    good = chosen[sizes[chosen] >= threshold]
    balls, c_roots, c_sizes = ball_of[good], root_ids[good], sizes[good]

    vertex_of_root = np.full(realization.n_points, -1, dtype=np.int64)
    vertex_of_root[c_roots] = np.arange(c_roots.shape[0])
    xs, ys = realization.edge_arrays(m + 1, k)
    vx, vy = vertex_of_root[roots[xs]], vertex_of_root[roots[ys]]
    keep = (vx >= 0) & (vy >= 0)
    pairs = np.stack([np.minimum(vx[keep], vy[keep]), np.maximum(vx[keep], vy[keep])], axis=1)
    pairs = np.unique(pairs, axis=0) if pairs.shape[0] else pairs.reshape(0, 2)

    nv = c_roots.shape[0]
    if nv == 0:
        connected = False
    elif nv == 1:
        connected = True
    else:
        g = uf.UnionFind(nv)
        g.union(pairs[:, 0], pairs[:, 1])
        connected = g.component_sizes().shape[0] == 1

    merged = 0
    if connected:
        full = realization.roots()
        owner = np.unique(full[c_roots])
        # every chosen cluster sits in one cluster of the whole ball
        assert owner.shape[0] == 1, "renormalized connectivity without a merged cluster"
        merged = int(realization.size[owner[0]])
        assert merged >= nv * threshold, "merged cluster below the sum of member thresholds"
    return RenormalizedGraph(m, balls, c_roots, c_sizes, pairs, connected, threshold, merged)


# ---------------------------------------------------------------------------
# good-ball Monte Carlo and the cascade


def _check_cascade_size(N: int, k: int) -> None:
    n = ball_point_count(N, k)
    if n > MAX_CASCADE_POINTS:
        raise InfeasibleScaleError(f"a {k}-ball of order {N} has {n} points; cascade limit is {MAX_CASCADE_POINTS}")


def _good_count(task) -> int:
    profile, config, k, seed, start, stop = task
    threshold = config.threshold(profile.N, k)
    hits = 0
    for r in range(start, stop):
        real = realize_ball(profile, k, seed, r)
        hits += int(real.nested_sizes[-1] >= threshold)
    return hits


def good_ball_probability(
    profile: ConnectionProfile,
    config: GoodBallConfig,
    k: int,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> Estimate:
    """Monte Carlo estimate of P(the k-ball's largest cluster reaches the threshold)."""
    if replicates < 1:
        raise InvalidInputError("need at least one replicate")
    _check_cascade_size(profile.N, k)
    step = max(1, math.ceil(replicates / (4 * max(1, workers))))
    tasks = [(profile, config, k, seed, s, min(s + step, replicates)) for s in range(0, replicates, step)]
    return wilson(sum(map_replicates(_good_count, tasks, workers)), replicates)


@dataclass(frozen=True)
class CascadeState:
    n: int
    K: float
    beta: float
    theta: float
    pG: float | None = None
    pA: float | None = None
    beta_ok: bool = True
    """Whether ``beta >= 1/5``."""
    pG_ok: bool | None = None
    """Whether the ``pG`` used to reach this state was ``>= 1/2``."""

    def __post_init__(self):
        if self.n < 2:
            raise InvalidInputError("cascade indices start at n = 2")
        if not 0 < self.beta < 1:
            raise InvalidInputError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def k(self) -> int:
        return scale_index(self.K, self.n)

    @property
    def eps(self) -> float:
        return self.n ** -(1 + self.theta)


def cascade_advance(state: CascadeState, pG: float, pA: float | None = None, eps: float | None = None) -> CascadeState:
    """Apply ``beta_{n+1} = (1 - eps_n) pG beta_n``.

    ``eps`` defaults to ``n^-(1+theta)``; passing it lets callers switch the
    shrinkage off.
    """
    if not 0 < pG <= 1:
        raise InvalidInputError(f"pG must lie in (0, 1], got {pG}")
    e = state.eps if eps is None else eps
    beta = (1 - e) * pG * state.beta
    return CascadeState(
        n=state.n + 1,
        K=state.K,
        beta=beta,
        theta=state.theta,
        pG=pG,
        pA=pA,
        beta_ok=beta >= 0.2,
        pG_ok=pG >= 0.5,
    )


def run_cascade(
    profile: ConnectionProfile,
    K: float,
    theta: float,
    beta0: float,
    n_start: int,
    n_stop: int,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> list[CascadeState]:
    """Simulate the cascade from ``n_start`` while ``k_n`` stays simulable.

    ``pG`` at step n is estimated on a fresh ``k_n``-ball with its own stream
    ``(seed, n)``. Stops early if ``beta`` collapses to 0.
    """
    states = [CascadeState(n_start, K, beta0, theta)]
    for n in range(n_start, n_stop):
        st = states[-1]
        seed_n = int(np.random.SeedSequence(int(seed), spawn_key=(n,)).generate_state(1)[0])
        est = good_ball_probability(profile, GoodBallConfig.beta(st.beta), max(1, st.k), replicates, seed_n, workers)
        if est.successes == 0:
            states.append(replace(st, n=n + 1, pG=0.0, pG_ok=False, beta_ok=False))
            break
        states.append(cascade_advance(st, est.value))
    return states


# ---------------------------------------------------------------------------
# closed-form rates


def r_n(beta: float, a: float, K: float, b: float, N: int, n: int) -> float:
    """``beta^2 a log n / N^((2K-b) log n)``, the cluster-connection rate."""
    if not 0 < b < 2 * K:
        raise RegimeError(f"need 0 < b < 2K, got b = {b}, K = {K}")
    if not 0 <= beta < 1:
        raise InvalidInputError("beta must lie in [0, 1)")
    ln = math.log(n)
    return beta**2 * a * ln * math.exp(-(2 * K - b) * ln * math.log(N))


def rtilde_n(a: float, K: float, N: int, n: int) -> float:
    """``a log n / N^((K - 2/log N) log n) / N^(K log n)``."""
    lnN, ln = math.log(N), math.log(n)
    return a * ln * math.exp(-(K - 2 / lnN) * ln * lnN - K * ln * lnN)


def alpha_lambda(lam: float) -> float:
    """``lambda - 1 - log lambda``."""
    if not lam > 0:
        raise InvalidInputError("lambda must be positive")
    return lam - 1 - math.log(lam)


def largest_component_tail_bound(n_vertices: float, lam: float, eps: float) -> tuple[float, float]:
    """Subcritical E-R tail: ``P(|C| >= (1+eps) log n / alpha) <= n^-(1+eps) / lambda``.

    Returns ``(size threshold, bound)``.
    """
    if not 0 < lam < 1:
        raise RegimeError(f"need 0 < lambda < 1, got {lam}")
    if not eps > 0 or n_vertices < 2:
        raise InvalidInputError("need eps > 0 and at least two vertices")
    size = (1 + eps) * math.log(n_vertices) / alpha_lambda(lam)
    return size, n_vertices ** -(1 + eps) / lam


# ---------------------------------------------------------------------------
# shell sums on the logarithmic scale


class _ScaleGrid:
    """``k_n`` for ``n = 0..n_max`` plus vectorized rate lookups."""

    def __init__(self, K: float, n_max: int):
        self.K = K
        self.kn = np.array([0, 0] + [scale_index(K, n) for n in range(2, n_max + 1)], dtype=np.int64)

    def k(self, n):
        return self.kn[n]

    def block(self, ells: np.ndarray) -> np.ndarray:
        b = np.searchsorted(self.kn[2:], ells, side="right") + 1
        if np.any(b < 2):
            raise InvalidInputError("distance below the first scale point")
        if np.any(b >= self.kn.shape[0] - 1):
            raise InvalidInputError("scale grid too short")
        return b

    def rates(self, ells, C, a, b, N, interp=Interpolation.LOWER) -> np.ndarray:
        ells = np.asarray(ells, dtype=np.int64)
        nb = self.block(ells)

        def pinned(n):
            ln = np.log(n)
            return C + a * ln * np.exp(b * ln * math.log(N))

        lower = pinned(nb.astype(np.float64))
        if interp is Interpolation.LOWER:
            return lower
        upper = pinned(nb + 1.0)
        at_point = ells == self.kn[nb]
        if interp is Interpolation.UPPER:
            return np.where(at_point, lower, upper)
        t = (ells - self.kn[nb]) / (self.kn[nb + 1] - self.kn[nb])
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.where(lower > 0, lower ** (1 - t) * upper**t, 0.0)
        return np.where(at_point, lower, geo)


def _log_no_edge(log_pairs, log_p) -> np.ndarray:
    """Vectorized ``pairs * log(1 - p)`` from logs; ``-inf`` when p = 1."""
    log_pairs = np.asarray(log_pairs, dtype=np.float64)
    log_p = np.asarray(log_p, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        small = log_p < -30.0
        p = np.exp(np.minimum(log_p, 0.0))
        mid = np.log(-np.log1p(-np.where(small | (p >= 1), 0.5, p)))
        x = log_pairs + np.where(small, log_p, mid)
        out = -np.exp(x)
    out = np.where(log_p == -np.inf, 0.0, out)
    return np.where(log_p >= 0.0, -np.inf, out)


def _shell_terms(N, delta, log_src, ells, rates) -> np.ndarray:
    """``log P(no edge)`` between a set of ``exp(log_src)`` points and each shell ``ell``."""
    lnN = math.log(N)
    ells = np.asarray(ells, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_p = np.minimum(np.log(rates) - (1 + delta) * ells * lnN, 0.0)
    log_pairs = log_src + ells * lnN + math.log1p(-1 / N)
    return _log_no_edge(log_pairs, log_p)


def _check_annulus_regime(N: int, K: float) -> None:
    if N >= 3:
        if K != 1:
            raise RegimeError(f"for N >= 3 the annulus estimates use K = 1, got K = {K}")
    elif not K > 1 / math.log(2):
        raise RegimeError(f"for N = 2 need K > 1/log 2 = {1 / math.log(2):.6g}, got K = {K}")


@dataclass(frozen=True)
class ExactVsAsymptotic:
    exact: float
    asymptotic: float


def annulus_connection(
    case: str,
    N: int,
    n: int,
    K: float = 1.0,
    C: float = 0.0,
    a: float = 1.0,
    j: int = 1,
    l: int = 1,
    interpolation: Interpolation = Interpolation.LOWER,
) -> ExactVsAsymptotic:
    """Exact finite-n annulus-connection probabilities next to their asymptotic forms.

    The rates are ``C + aN log n`` at the scale points (no growth term,
    ``delta = 1``). Cases:

    * ``a``: the ``k_n``-ball reaches shell ``k_{n+1}+j``;
    * ``b``: the ``k_{n+1}``-ball misses shell ``k_{n+1}+j``;
    * ``c``: the ``k_{n+1}``-ball misses the whole ``(k_{n+1}, k_{n+2}]`` annulus;
    * ``d``: the ``k_n``-ball reaches shell ``k_{n+l}+j``;
    * ``e``: the ``k_n``-ball reaches anything outside the ``k_{n+1}``-ball;
    * ``f``: partial sums over ``2..n`` of case ``e`` (exact and asymptotic).
    """
    _check_annulus_regime(N, K)
    if a < 0 or C < 0:
        raise InvalidInputError("need a >= 0 and C >= 0")
    if n < 2:
        raise InvalidInputError("need n >= 2")
    interpolation = Interpolation(interpolation)
    case = case.lower()
    lnN = math.log(N)
    aN = a * N
    grid = _ScaleGrid(K, n + l + 3 + (0 if case != "e" and case != "f" else 64))

    def rates(ells):
        return grid.rates(ells, C, aN, 0.0, N, interpolation)

    def width(m):
        return int(grid.k(m + 1) - grid.k(m))

    if case in ("a", "b"):
        if not 1 <= j <= width(n + 1):
            raise InvalidInputError(f"j must lie in 1..{width(n + 1)}")
        ell = np.array([grid.k(n + 1) + j])
        src = grid.k(n) if case == "a" else grid.k(n + 1)
        t = float(_shell_terms(N, 1.0, src * lnN, ell, rates(ell))[0])
        coef = aN * (1 - 1 / N)
        if case == "a":
            return ExactVsAsymptotic(max(0.0, -math.expm1(t)), coef * math.log(n) / (N**j * math.exp(math.log(n) * lnN)))
        return ExactVsAsymptotic(math.exp(t), n ** (-coef / N**j))
    if case == "c":
        return ExactVsAsymptotic(math.exp(_case_c_log(grid, N, C, aN, n, interpolation)), n**-a)
    if case == "d":
        if l < 1 or not 1 <= j <= width(n + l):
            raise InvalidInputError(f"need l >= 1 and j in 1..{width(n + l)}")
        ell = np.array([grid.k(n + l) + j])
        t = float(_shell_terms(N, 1.0, grid.k(n) * lnN, ell, rates(ell))[0])
        m = n + l
        asym = aN * (1 - 1 / N) * math.log(m) / (N**j * math.exp(l * lnN * math.log(m)))
        return ExactVsAsymptotic(max(0.0, -math.expm1(t)), asym)
    if case == "e":
        return ExactVsAsymptotic(_case_e_exact(N, K, C, aN, n, interpolation), _case_e_asym(N, a, n))
    if case == "f":
        ex = math.fsum(_case_e_exact(N, K, C, aN, m, interpolation) for m in range(2, n + 1))
        asym = math.fsum(_case_e_asym(N, a, m) for m in range(2, n + 1))
        return ExactVsAsymptotic(ex, asym)
    raise InvalidInputError(f"unknown case {case!r}")


def _case_c_log(grid, N, C, aN, n, interp) -> float:
    lnN = math.log(N)
    lo, hi = int(grid.k(n + 1)), int(grid.k(n + 2))
    ells = np.arange(lo + 1, hi + 1)
    return float(np.sum(_shell_terms(N, 1.0, lo * lnN, ells, grid.rates(ells, C, aN, 0.0, N, interp))))


def _case_e_exact(N, K, C, aN, n, interp) -> float:
    lnN = math.log(N)
    # shells decay like N^-ell; 200/log10(N) extra shells put the rest below 1e-200
    span = math.ceil(200 / math.log10(N))
    grid = _ScaleGrid(K, n + 8)
    while grid.k(grid.kn.shape[0] - 2) < grid.k(n + 1) + span:
        grid = _ScaleGrid(K, 2 * grid.kn.shape[0])
    ells = np.arange(grid.k(n + 1) + 1, grid.k(n + 1) + span + 1)
    t = np.sum(_shell_terms(N, 1.0, grid.k(n) * lnN, ells, grid.rates(ells, C, aN, 0.0, N, interp)))
    return max(0.0, float(-np.expm1(t)))


def _case_e_asym(N, a, n) -> float:
    lnN = math.log(N)
    total, l = 0.0, 1
    while True:
        m = n + l
        term = math.log(m) * math.exp(-l * lnN * math.log(m))
        total += term
        if term < 1e-18 * total:
            break
        l += 1
    return a * total


@dataclass(frozen=True)
class AnnulusSweep:
    n: np.ndarray
    exact: np.ndarray
    asymptotic: np.ndarray
    ratio: np.ndarray
    n_star: int | None
    """Smallest n after which ``|ratio - 1| < tol`` holds through the sweep's end."""


def _first_stable(ns: np.ndarray, good: np.ndarray) -> int | None:
    if not good[-1]:
        return None
    bad = np.flatnonzero(~good)
    return int(ns[0] if bad.shape[0] == 0 else ns[bad[-1] + 1])


def annulus_gap_sweep(N: int, a: float, n_max: int, C: float = 0.0, K: float = 1.0, tol: float = 0.1) -> AnnulusSweep:
    """Case ``c`` for every ``2 <= n <= n_max`` and the point where ``P(A_n) n^a`` settles."""
    _check_annulus_regime(N, K)
    lnN = math.log(N)
    grid = _ScaleGrid(K, n_max + 4)
    ns = np.arange(2, n_max + 1)
    lo, hi = grid.kn[ns + 1], grid.kn[ns + 2]
    counts = hi - lo
    ells = np.repeat(hi - counts, counts) + _ramp(counts) + 1
    src = np.repeat(lo, counts) * lnN
    terms = _shell_terms(N, 1.0, src, ells, grid.rates(ells, C, a * N, 0.0, N))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    logs = np.add.reduceat(terms, starts)
    exact = np.exp(logs)
    asym = np.exp(-a * np.log(ns))
    ratio = np.exp(logs + a * np.log(ns))
    return AnnulusSweep(ns, exact, asym, ratio, _first_stable(ns, np.abs(ratio - 1) < tol))


def _ramp(counts: np.ndarray) -> np.ndarray:
    """``[0..c0-1, 0..c1-1, ...]``."""
    total = int(counts.sum())
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total) - starts


@dataclass(frozen=True)
class SkipAnnulus:
    exact: float
    """P(some edge from the cluster to the annulus)."""
    shell_sum: float
    """Sum over shells of the per-shell connection probabilities (a union bound on ``exact``)."""
    bound: float


def _check_skip_regime(N: int, K: float, b: float, j: int) -> None:
    if j < 2:
        raise RegimeError(f"need j >= 2, got j = {j}")
    lim = 2 * K - 1 / math.log(N)
    if not 0 < b < lim:
        raise RegimeError(f"need 0 < b < 2K - 1/log N = {lim:.6g}, got b = {b}")


def skip_annulus_bound(
    N: int,
    K: float,
    b: float,
    a: float,
    C: float,
    n: int,
    j: int,
    cluster_size: float | None = None,
    M: float = 1.0,
    interpolation: Interpolation = Interpolation.LOWER,
) -> SkipAnnulus:
    """A cluster of the ``k_n``-ball reaching the ``(k_{n+j}, k_{n+j+1}]`` annulus.

    ``cluster_size`` defaults to the whole ball, ``N**k_n``. The bound is
    ``M log n / n^((Kj - b) log N)``.
    """
    _check_skip_regime(N, K, b, j)
    lnN = math.log(N)
    grid = _ScaleGrid(K, n + j + 3)
    bound = M * math.log(n) * math.exp(-(K * j - b) * lnN * math.log(n))
    if cluster_size is not None and cluster_size <= 0:
        return SkipAnnulus(0.0, 0.0, bound)
    log_size = grid.k(n) * lnN if cluster_size is None else math.log(cluster_size)
    ells = np.arange(grid.k(n + j) + 1, grid.k(n + j + 1) + 1)
    terms = _shell_terms(N, 1.0, log_size, ells, grid.rates(ells, C, a, b, N, Interpolation(interpolation)))
    return SkipAnnulus(max(0.0, float(-np.expm1(terms.sum()))), float(np.sum(-np.expm1(terms))), bound)


@dataclass(frozen=True)
class SkipSweep:
    n: np.ndarray
    j: np.ndarray
    exact: np.ndarray
    """``exact[i, t]`` for ``n[i]`` and ``j[t]``."""
    unit_bound: np.ndarray
    """The bound with ``M = 1``."""
    n_star: int | None
    smallest_M: float
    """Smallest M for which the bound dominates over the whole grid."""


def skip_annulus_sweep(N, K, b, a, C, ns, js, M: float = 1.0) -> SkipSweep:
    """Exact-vs-bound grid; ``n_star`` is where ``exact <= M * unit_bound`` starts holding for good."""
    ns = np.asarray(list(ns))
    js = np.asarray(list(js))
    ex = np.zeros((ns.shape[0], js.shape[0]))
    ub = np.zeros_like(ex)
    for i, n in enumerate(ns):
        for t, j in enumerate(js):
            r = skip_annulus_bound(N, K, b, a, C, int(n), int(j), M=1.0)
            ex[i, t], ub[i, t] = r.exact, r.bound
    ok = np.all(ex <= M * ub, axis=1)
    return SkipSweep(ns, js, ex, ub, _first_stable(ns, ok), float(np.max(ex / ub)))


def skip_bound_double_sum(N: int, K: float, b: float, n_max: int) -> np.ndarray:
    """Partial sums over ``n <= n_max`` of ``sum_{j>=2} log n / n^((Kj-b) log N)``.

    The j-sum is geometric and taken in closed form.
    """
    if not 0 < b < 2 * K - 1 / math.log(N):
        raise RegimeError(f"need 0 < b < 2K - 1/log N, got b = {b}")
    lnN = math.log(N)
    ns = np.arange(2, n_max + 1, dtype=np.float64)
    ln = np.log(ns)
    inner = np.exp(-(2 * K - b) * lnN * ln) / -np.expm1(-K * lnN * ln)
    return np.cumsum(ln * inner)


# ---------------------------------------------------------------------------
# pre-percolation


@dataclass(frozen=True)
class PrePercolationScan:
    n: np.ndarray
    prob_no_connection: np.ndarray
    """``P(A_n)``: no edge from the ``k_{n+1}``-ball to the next annulus."""
    power: np.ndarray
    """``n^-a`` with the annulus exponent ``a`` (the profile's ``a`` divided by N)."""
    partial_sums: np.ndarray
    power_partial_sums: np.ndarray
    cauchy: bool
    """Whether every increment over the last 10% of the range is below ``tol``."""
    indicators: np.ndarray | None
    """Sampled mode only: whether the successive annuli were joined."""
    a: float


def pre_percolation_scan(
    profile: ConnectionProfile,
    n_lo: int,
    n_hi: int,
    seed: int | None = None,
    mode: str = "exact",
    tol: float = 1e-6,
) -> PrePercolationScan:
    """Probabilities that successive ``(k_n, k_{n+1}]`` annuli are not joined.

    In ``sampled`` mode each event is also drawn as a Bernoulli indicator from
    the stream ``(seed, n)``; the event is a union over independent pairs, so
    its probability is exact and no lattice needs to be built.
    """
    r = profile.rates
    if not isinstance(r, ScaledLog) or r.b != 0:
        raise InvalidInputError("pre-percolation scan needs a ScaledLog profile with b = 0")
    if mode not in ("exact", "sampled"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    if mode == "sampled" and seed is None:
        raise InvalidInputError("sampled mode needs a seed")
    if not 2 <= n_lo <= n_hi:
        raise InvalidInputError("need 2 <= n_lo <= n_hi")
    N, lnN = profile.N, math.log(profile.N)
    grid = _ScaleGrid(r.K, n_hi + 4)
    ns = np.arange(n_lo, n_hi + 1)
    lo, hi = grid.kn[ns + 1], grid.kn[ns + 2]
    counts = hi - lo
    ells = np.repeat(lo, counts) + _ramp(counts) + 1
    terms = _shell_terms(N, profile.delta, np.repeat(lo, counts) * lnN, ells, grid.rates(ells, r.C, r.a, 0.0, N, r.interpolation))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    probs = np.where(counts > 0, np.exp(np.add.reduceat(terms, starts)), 1.0)
    a = r.a / N
    power = np.exp(-a * np.log(ns))
    tail = probs[ns >= n_hi - (n_hi - n_lo + 1) // 10]
    ind = None
    if mode == "sampled":
        ind = np.array([stream(seed, int(n)).random() >= p for n, p in zip(ns, probs)], dtype=bool)
    return PrePercolationScan(ns, probs, power, np.cumsum(probs), np.cumsum(power), bool(np.all(tail < tol)), ind, a)


# ---------------------------------------------------------------------------
# gamma-good recursion


@dataclass(frozen=True)
class GammaRecursion:
    n: np.ndarray
    p: np.ndarray
    """``p[i]`` lower-bounds P(the ``k_{n[i]}``-ball is gamma-good)."""
    eps: np.ndarray
    """``eps[i]``: the failure budget of the cluster-joining factor at step ``n[i]``."""


def gamma_good_recursion(
    N: int, delta: float, c: float, gamma: float, p_start: float, n_start: int, steps: int, K: float = 1.0
) -> GammaRecursion:
    """Iterate the lower bound on the gamma-good probability along ``k_n``.

    ``p_{n+1} = P(Bin(N^D, p_n) >= N^(gamma D)) * [1 - (1 - c/N^(k_{n+1}(1+delta)))^(N^(2 gamma k_n))]^(N^(gamma D))``
    with ``D = k_{n+1} - k_n``.
    """
    if not (1 + delta) / 2 < gamma < 1:
        raise RegimeError(f"need (1+delta)/2 < gamma < 1, got gamma = {gamma}, delta = {delta}")
    if not 0 <= p_start <= 1:
        raise InvalidInputError("p_start must lie in [0, 1]")
    lnN = math.log(N)
    ns, ps, es = [n_start], [p_start], []
    p = p_start
    for n in range(n_start, n_start + steps):
        k0, k1 = scale_index(K, n), scale_index(K, n + 1)
        D = k1 - k0
        balls = N**D
        need = float(N) ** (gamma * D)
        # log of one join failing, over N^{2 gamma k_n} candidate pairs
        log_p = math.log(c) - k1 * (1 + delta) * lnN
        miss = float(_log_no_edge(2 * gamma * k0 * lnN, min(log_p, 0.0)))
        join = -math.expm1(miss)
        log_factor = need * math.log(join) if join > 0 else -math.inf
        eps = -math.expm1(need * math.log1p(-math.exp(-c * math.exp((2 * gamma * k0 - (1 + delta) * k1) * lnN))))
        p = exact_binomial_tail(balls, p, need) * math.exp(log_factor)
        ns.append(n + 1)
        ps.append(p)
        es.append(eps)
    es.append(float("nan"))
    return GammaRecursion(np.array(ns), np.array(ps), np.array(es))


# ---------------------------------------------------------------------------
# cascade certificate


def stretched_exp_tail(A: float, s: float, T: float) -> float:
    """``int_T^inf exp(-A x^s) dx``, an upper bound for the sum over integers ``n > T``."""
    if not (A > 0 and s > 0):
        raise InvalidInputError("need A > 0 and s > 0")
    log_x = math.log(A) + s * math.log(T)
    if log_x > 700:
        return 0.0
    q = gammaincc(1 / s, math.exp(log_x))
    if q == 0.0:
        return 0.0
    return math.exp(-math.log(A) / s - math.log(s) + gammaln(1 / s) + math.log(q))


def stretched_exp_sum(A: float, s: float, n0: int, horizon: int = 10_000) -> float:
    """Upper bound on ``sum_{n >= n0} exp(-A n^s)``: explicit to ``n0 + horizon``, integral beyond."""
    ns = np.arange(n0, n0 + horizon + 1, dtype=np.float64)
    return float(np.sum(np.exp(-A * ns**s))) + stretched_exp_tail(A, s, float(n0 + horizon))


def smallest_n_for_tail(A: float, s: float, target: float, horizon: int = 10_000, cap: int = 2**1000) -> int:
    """Smallest ``n0`` (via bisection on the bound) with ``stretched_exp_sum(n0) < target``."""
    return _search_n0(lambda n0: stretched_exp_sum(A, s, n0, horizon) < target, 2, cap)


def _search_n0(ok, start: int, cap: int) -> int:
    hi = start
    while not ok(hi):
        if hi >= cap:
            raise InvalidInputError(f"no n0 below {cap}")
        hi = min(cap, hi * 2)
    if hi == start:
        return start
    # ok(hi // 2) failed or hi // 2 < start
    lo = max(start, hi // 2) if hi // 2 >= start and not ok(max(start, hi // 2)) else start - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ConstantChecks:
    first_step: float
    """``(4/5)^(1/3) * 2/3 * 1/2``, must exceed 1/5."""
    pG_chain: float
    """``(4/5)^(2/3)``, must be at least 1/2."""
    beta_chain: float
    """``1/2 * (4/5)^(1/3) * 2/3 * (4/5)^(2/3)``, must exceed 1/5."""

    @property
    def holds(self) -> bool:
        return self.first_step > 0.2 and self.pG_chain >= 0.5 and self.beta_chain > 0.2


def constant_checks() -> ConstantChecks:
    f = PRODUCT_FLOOR
    return ConstantChecks(f * (2 / 3) * 0.5, f * f, 0.5 * f * (2 / 3) * f * f)


@dataclass(frozen=True)
class CertificateReport:
    n0: int
    log_deficits: dict[str, float]
    """Upper bounds on ``-log`` of each product, keys ``eps``, ``B``, ``A``."""
    floors_met: bool
    beta_min: float
    pG_min: float
    induction_ok: bool
    constants: ConstantChecks
    a_star: float
    kappa: float
    exponent_B: float
    """``K log N - 2(1+theta)``."""
    exponent_A: float
    """Power of n in the leading non-connectivity term."""
    horizon: int
    notes: list[str] = field(default_factory=list)

    @property
    def products(self) -> dict[str, float]:
        return {k: math.exp(-v) for k, v in self.log_deficits.items()}


class _CertificateTerms:
    """Per-n upper bounds on the three failure probabilities and their tails."""

    def __init__(self, K, b, N, a, theta, kappa, M, L):
        self.lnN = math.log(N)
        self.K, self.theta, self.M, self.L = K, theta, M, L
        self.K1 = 2 * K - b
        self.A = kappa / 2
        self.s = K * self.lnN - 2 * (1 + theta)
        self.e1 = self.K1 * self.lnN * (1 - a / (25 * K * self.lnN))
        self.q = self.K1 * self.lnN

    def terms(self, ns: np.ndarray):
        ln = np.log(ns)
        eps = np.exp(-(1 + self.theta) * ln)
        qB = np.exp(-self.A * np.exp(self.s * ln))
        enough = (self.K - self.K1) * ln * self.lnN > np.log(2 / (1 - eps))
        qN = np.where(enough, qB, 1.0)
        t1 = np.exp(13 * np.log(ln) + self.e1 * ln)
        t2 = np.exp(-self.q * ln)
        with np.errstate(over="ignore"):
            t3 = np.exp(-self.L * ln**3 * np.exp(2 * self.q * ln))
        qA = np.minimum(1.0, self.M * (t1 + t2 + t3) + qN)
        return eps, qB, qA

    def t1(self, x: float) -> float:
        ln = math.log(x)
        return math.exp(13 * math.log(ln) + self.e1 * ln)

    def tails(self, T: float):
        """Bounds on ``sum_{n > T} -log(1 - q_n)`` for each of the three products."""
        lnT = math.log(T)
        eps_T = math.exp(-(1 + self.theta) * lnT)
        eps_tail = math.exp(-self.theta * lnT) / self.theta
        qB_T = math.exp(-self.A * math.exp(self.s * lnT))
        qB_tail = stretched_exp_tail(self.A, self.s, T)
        r = -self.e1 - 1
        peak = max(T, math.exp(13 / -self.e1))
        t1_sup = self.t1(peak)
        t1_tail = gamma_fn(14) * gammaincc(14, r * lnT) / r**14 + t1_sup
        t2_tail = math.exp((1 - self.q) * lnT) / (self.q - 1)
        t3_tail = stretched_exp_tail(self.L * lnT**3, 2 * self.q, T)
        t3_T = math.exp(-self.L * lnT**3 * math.exp(min(700.0, 2 * self.q * lnT)))
        enough = (self.K - self.K1) * lnT * self.lnN > math.log(2 / (1 - eps_T))
        qA_sup = self.M * (t1_sup + math.exp(-self.q * lnT) + t3_T) + (qB_T if enough else 1.0)
        qA_tail = self.M * (t1_tail + t2_tail + t3_tail) + (qB_tail if enough else math.inf)
        out = []
        for tail, sup in ((eps_tail, eps_T), (qB_tail, qB_T), (qA_tail, qA_sup)):
            out.append(tail / (1 - sup) if sup < 1 else math.inf)
        return out


def _check_certificate_regime(K, b, N, a, theta) -> float:
    star = a_star(K, b, N)
    if not a > star:
        raise RegimeError(f"need a > a_* = {star:.6g}, got a = {a}")
    lnN = math.log(N)
    if not theta > 0:
        raise RegimeError(f"need theta > 0, got {theta}")
    if not K * lnN > 2 * (1 + theta):
        raise RegimeError(
            f"need K log N > 2(1+theta), i.e. theta < K log N/2 - 1 = {K * lnN / 2 - 1:.6g}; got theta = {theta}"
        )
    return star


def cascade_certificate(
    K: float,
    b: float,
    N: int,
    a: float,
    theta: float,
    n0: int | None = None,
    horizon: int = 10_000,
    kappa: float | None = None,
    M: float = 1.0,
    L: float = 1.0,
    beta0: float = 0.5,
    pG0: float = 2 / 3,
    cap: int = 2**1000,
) -> CertificateReport:
    """Certify the three cascade products and the induction they feed.

    Failure probabilities are bounded per n by ``exp(-(kappa/2) n^(K log N - 2(1+theta)))``
    (cluster count too small) and by the E-R non-connectivity bound plus the
    count failure (clusters not joined). Each ``-log`` product is bounded by
    the explicit sum over ``n0..n0+horizon`` plus an integral tail. With
    ``n0=None`` the smallest certifiable ``n0 >= 3`` is searched for.
    Then the recursion is iterated from ``(beta0, pG0)`` over the horizon.

    The rate offset C does not enter these bounds.
    """
    star = _check_certificate_regime(K, b, N, a, theta)
    kappa = chernoff_kappa(1.0)[0] if kappa is None else kappa
    terms = _CertificateTerms(K, b, N, a, theta, kappa, M, L)
    target = -math.log(PRODUCT_FLOOR)

    def deficits(start: int):
        ns = np.arange(horizon + 1, dtype=np.float64) + float(start)
        parts = terms.terms(ns)
        with np.errstate(divide="ignore"):
            explicit = [float(np.sum(-np.log1p(-q))) for q in parts]
        tails = terms.tails(float(start) + horizon)
        return dict(zip(("eps", "B", "A"), (e + t for e, t in zip(explicit, tails))))

    def ok(start: int) -> bool:
        return all(v <= target for v in deficits(start).values())

    notes = []
    if n0 is None:
        try:
            n0 = _search_n0(ok, 3, cap)
        except InvalidInputError:
            notes.append(f"no certifiable n0 below {cap}")
            n0 = cap
    d = deficits(n0)
    ns = np.arange(horizon + 1, dtype=np.float64) + float(n0)
    eps, qB, qA = terms.terms(ns)
    pG = np.concatenate([[pG0], ((1 - qB) * (1 - qA))[:-1]])
    beta = beta0 * np.concatenate([[1.0], np.cumprod((1 - eps) * pG)[:-1]])
    beta_min, pG_min = float(beta.min()), float(pG.min())
    floors = all(v <= target for v in d.values())
    return CertificateReport(
        n0=int(n0),
        log_deficits=d,
        floors_met=floors,
        beta_min=beta_min,
        pG_min=pG_min,
        induction_ok=floors and beta_min >= 0.2 and pG_min >= 0.5,
        constants=constant_checks(),
        a_star=star,
        kappa=kappa,
        exponent_B=terms.s,
        exponent_A=terms.e1,
        horizon=horizon,
        notes=notes,
    )
