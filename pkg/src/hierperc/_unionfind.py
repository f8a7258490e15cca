"""Array-backed union-find (union by size, path halving) compiled with numba."""

import numpy as np
from numba import njit


@njit(cache=True)
def find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def union_edges(parent, size, xs, ys):
    for t in range(xs.shape[0]):
        a = find(parent, xs[t])
        b = find(parent, ys[t])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]


@njit(cache=True)
def all_roots(parent):
    out = np.empty(parent.shape[0], dtype=np.int64)
    for i in range(parent.shape[0]):
        out[i] = find(parent, i)
    return out


@njit(cache=True)
def max_component_below(parent, size, limit):
    """Largest component among points ``0 .. limit-1``."""
    best = 0
    for i in range(limit):
        if parent[i] == i and size[i] > best:
            best = size[i]
    return best


@njit(cache=True)
def count_connected(n, pair_i, pair_j, present):
    """For each row of ``present`` (one Bernoulli edge mask per replicate),
    whether the graph on n vertices is connected."""
    reps = present.shape[0]
    out = np.zeros(reps, dtype=np.bool_)
    parent = np.empty(n, dtype=np.int64)
    size = np.empty(n, dtype=np.int64)
    for r in range(reps):
        for v in range(n):
            parent[v] = v
            size[v] = 1
        comps = n
        for t in range(pair_i.shape[0]):
            if not present[r, t]:
                continue
            a = find(parent, pair_i[t])
            b = find(parent, pair_j[t])
            if a == b:
                continue
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            comps -= 1
        out[r] = comps == 1
    return out


class UnionFind:
    """Thin stateful wrapper over the compiled kernels."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def __len__(self):
        return self.parent.shape[0]

    def union(self, xs, ys):
        union_edges(self.parent, self.size, np.ascontiguousarray(xs, dtype=np.int64),
                    np.ascontiguousarray(ys, dtype=np.int64))

    def roots(self):
        return all_roots(self.parent)

    def component_sizes(self):
        """Sizes of all components (one entry per root)."""
        r = self.roots()
        return self.size[r == np.arange(len(self))]
