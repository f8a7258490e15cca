"""Sampling the random graph inside a k-ball and extracting its clusters.

Edges are drawn one distance class at a time. For class m the ball holds
``P_m`` unordered pairs at distance m, each present independently with
probability ``p_(m)``, so the edge count is ``Binomial(P_m, p_(m))`` and, given
the count, the edge set is a uniform subset of the class. Drawing the count and
then a uniform subset costs O(edges) instead of O(pairs).

Each class has its own random stream. The count is obtained by inverting the
binomial CDF at one uniform, and the subset is the prefix of a uniformly random
ordering of the class. Two profiles run with the same seed therefore produce
nested edge sets whenever one has the larger probabilities at every distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import binom

from hierperc import _unionfind as uf
from hierperc._mc import stream
from hierperc.errors import InfeasibleScaleError, InvalidInputError
from hierperc.hierarchy import ball_point_count, pair_count_at_distance
from hierperc.profiles import ConnectionProfile

#: Largest ball that :func:`realize_ball` will allocate.
MAX_SIMULATED_POINTS = 2**26

# classes up to this many pairs are ordered by a full permutation;
# larger ones by sequential draws with duplicates discarded
_PERMUTATION_LIMIT = 2**20

_TIE_KEY = 0


@dataclass
class GraphRealization:
    """One sampled graph on the k-ball containing the origin.

    ``edges[m-1]`` holds the ``(x, y)`` index arrays of class m when edges are
    retained, otherwise ``edges`` is ``None``. ``nested_sizes[m-1]`` is the
    size of the largest cluster of the m-ball containing the origin, using
    only edges inside that m-ball.
    """

    N: int
    k: int
    parent: np.ndarray
    size: np.ndarray
    edge_counts: np.ndarray
    nested_sizes: np.ndarray
    seed: int
    replicate: int
    edges: list[tuple[np.ndarray, np.ndarray]] | None = None

    @property
    def n_points(self) -> int:
        return self.parent.shape[0]

    def roots(self) -> np.ndarray:
        return uf.all_roots(self.parent)

    def edge_arrays(self, lo: int = 1, hi: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated edges of classes ``lo..hi``."""
        if self.edges is None:
            raise InvalidInputError("realization was built without retained edges")
        hi = self.k if hi is None else hi
        parts = self.edges[lo - 1 : hi]
        if not parts:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


@dataclass(frozen=True)
class ClusterSummary:
    size: int
    density: float
    cluster_id: int
    histogram: dict[int, int] = field(repr=False)


def _check_feasible(N: int, k: int) -> int:
    n = ball_point_count(N, k)
    if n > MAX_SIMULATED_POINTS:
        raise InfeasibleScaleError(f"a {k}-ball of order {N} has {n} points; limit is {MAX_SIMULATED_POINTS}")
    return n


def decode_pairs(t: np.ndarray, N: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map pair ids in ``[0, P_m)`` to the endpoints of distance-m pairs.

    A pair is identified by its m-ball, the unordered pair of digits at
    position m, and the lower m-1 digits of each endpoint.
    """
    t = np.asarray(t, dtype=np.int64)
    R = N ** (m - 1)
    digit_pairs = np.array(list(combinations(range(N), 2)), dtype=np.int64)
    U = digit_pairs.shape[0]
    ry = t % R
    t = t // R
    rx = t % R
    t = t // R
    u = t % U
    ball = t // U
    base = ball * N**m
    x = base + digit_pairs[u, 0] * R + rx
    y = base + digit_pairs[u, 1] * R + ry
    return x, y


def _ordered_distinct(rng: np.random.Generator, P: int, count: int) -> np.ndarray:
    """First ``count`` distinct values of an i.i.d. uniform stream on ``[0, P)``."""
    draws = np.empty(0, dtype=np.int64)
    while True:
        need = count + count // 8 + 16
        draws = np.concatenate([draws, rng.integers(0, P, size=need, dtype=np.int64)])
        uniq, first = np.unique(draws, return_index=True)
        if uniq.shape[0] >= count:
            order = np.sort(first)[:count]
            return draws[order]


def class_pair_ids(rng: np.random.Generator, P: int, count: int) -> np.ndarray:
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if count == P:
        return np.arange(P, dtype=np.int64)
    if P <= _PERMUTATION_LIMIT:
        return rng.permutation(P)[:count].astype(np.int64)
    return _ordered_distinct(rng, P, count)


def class_edge_count(rng: np.random.Generator, P: int, p: float) -> int:
    u = rng.random()
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return P
    return max(0, int(binom.ppf(u, P, p)))


def sample_class(profile: ConnectionProfile, k: int, m: int, seed: int, replicate: int):
    """Edges of distance class m inside the k-ball, as index arrays."""
    N = profile.N
    P = pair_count_at_distance(N, k, m)
    rng = stream(seed, replicate, m)
    count = class_edge_count(rng, P, profile.p(m))
    return decode_pairs(class_pair_ids(rng, P, count), N, m)


def realize_ball(
    profile: ConnectionProfile,
    k: int,
    seed: int,
    replicate: int = 0,
    retain_edges: bool = False,
) -> GraphRealization:
    """Sample the graph on the k-ball containing the origin and merge its clusters."""
    if k < 1:
        raise InvalidInputError("ball level must be >= 1")
    N = profile.N
    n = _check_feasible(N, k)
    forest = uf.UnionFind(n)
    counts = np.zeros(k, dtype=np.int64)
    nested = np.zeros(k, dtype=np.int64)
    kept = [] if retain_edges else None
    for m in range(1, k + 1):
        xs, ys = sample_class(profile, k, m, seed, replicate)
        counts[m - 1] = xs.shape[0]
        forest.union(xs, ys)
        nested[m - 1] = uf.max_component_below(forest.parent, forest.size, N**m)
        if kept is not None:
            kept.append((xs, ys))
    return GraphRealization(
        N=N,
        k=k,
        parent=forest.parent,
        size=forest.size,
        edge_counts=counts,
        nested_sizes=nested,
        seed=seed,
        replicate=replicate,
        edges=kept,
    )


def largest_cluster(realization: GraphRealization) -> ClusterSummary:
    """Largest cluster of the ball; equal-size candidates are chosen uniformly."""
    roots = realization.roots()
    is_root = roots == np.arange(realization.n_points)
    root_ids = np.flatnonzero(is_root)
    sizes = realization.size[root_ids]
    best = int(sizes.max())
    tied = root_ids[sizes == best]
    if tied.shape[0] > 1:
        rng = stream(realization.seed, realization.replicate, _TIE_KEY)
        chosen = int(tied[rng.integers(tied.shape[0])])
    else:
        chosen = int(tied[0])
    values, freq = np.unique(sizes, return_counts=True)
    return ClusterSummary(
        size=best,
        density=best / realization.n_points,
        cluster_id=chosen,
        histogram={int(v): int(c) for v, c in zip(values, freq)},
    )


def cluster_members(realization: GraphRealization, cluster_id: int) -> np.ndarray:
    return np.flatnonzero(realization.roots() == cluster_id)


def clusters_connected(realization: GraphRealization, a, b) -> bool:
    """Whether some sampled edge joins point set ``a`` to point set ``b``."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if np.intersect1d(a, b).size:
        raise InvalidInputError("clusters overlap")
    xs, ys = realization.edge_arrays()
    in_a_x, in_b_y = np.isin(xs, a), np.isin(ys, b)
    in_b_x, in_a_y = np.isin(xs, b), np.isin(ys, a)
    return bool(np.any((in_a_x & in_b_y) | (in_b_x & in_a_y)))


def _annulus_pairs_log(N: int, k: int, j: int) -> float:
    return (k + j) * math.log(N) + math.log(N - 1)


def exact_boundary_connection_prob(profile: ConnectionProfile, k: int, j: int) -> float:
    """P(the k-ball has an edge to its (j, j+1]-annulus), for ``j >= k``.

    Every such pair is at distance j+1 and there are ``N**k * N**j * (N-1)`` of them.
    """
    if j < k:
        raise InvalidInputError("need j >= k")
    return -math.expm1(log_no_edge(_annulus_pairs_log(profile.N, k, j), profile.log_p(j + 1)))


def boundary_connection_bound(profile: ConnectionProfile, k: int, j: int) -> float:
    """Union bound ``c_{j+1} N^k N^j (N-1) / N^((j+1)(1+delta))`` on the same event."""
    N = profile.N
    ck = profile.c(j + 1)
    if ck <= 0:
        return 0.0
    return math.exp(math.log(ck) + _annulus_pairs_log(N, k, j) - (j + 1) * (1 + profile.delta) * math.log(N))


def boundary_connection_indicator(profile: ConnectionProfile, k: int, j: int, seed: int, replicate: int = 0) -> bool:
    """Sample the event of :func:`exact_boundary_connection_prob`."""
    rng = stream(seed, replicate, j + 1)
    return bool(rng.random() < exact_boundary_connection_prob(profile, k, j))


def log_no_edge(log_pairs: float, log_p: float) -> float:
    """``pairs * log(1 - p)`` given ``log(pairs)`` and ``log(p)``; stays finite for huge counts."""
    if log_p == -math.inf:
        return 0.0
    if log_p >= 0.0:
        return -math.inf
    if log_p < -30.0:
        # -log1p(-p) = p (1 + p/2 + ...), p below 1e-13
        x = log_pairs + log_p
    else:
        x = log_pairs + math.log(-math.log1p(-math.exp(log_p)))
    return -math.exp(x) if x < 709.0 else -math.inf
