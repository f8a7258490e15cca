from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hierperc.errors import ExactRangeError, InvalidInputError
from hierperc.hierarchy import (
    Address,
    address_to_index,
    annulus_point_count,
    ball_point_count,
    boundary_point_count,
    distance,
    index_distance,
    index_to_address,
    pair_count_at_distance,
    subball_index,
)
from tests.oracles import hier_distance


def addresses(N):
    return st.lists(st.integers(0, N - 1), max_size=8).map(lambda d: Address(d, N))


@pytest.mark.parametrize("N", [2, 3, 5])
@given(data=st.data())
def test_ultrametric(N, data):
    x, y, z = (data.draw(addresses(N)) for _ in range(3))
    assert distance(x, y) == distance(y, x)
    assert (distance(x, y) == 0) == (x == y)
    assert distance(x, y) <= max(distance(x, z), distance(z, y))


@given(data=st.data())
def test_translation_invariant(data):
    x, y, z = (data.draw(addresses(4)) for _ in range(3))
    assert distance(x + z, y + z) == distance(x, y)
    assert x + (-x) == Address.zero(4)


def test_trailing_zeros_ignored():
    assert Address([1, 0, 0], 3) == Address([1], 3)
    assert Address([0, 2], 3).height == 2


def test_mismatched_orders_rejected():
    with pytest.raises(InvalidInputError):
        distance(Address([1], 2), Address([1], 3))
    with pytest.raises(InvalidInputError):
        Address([3], 3)


@pytest.mark.parametrize("N,k", [(2, 1), (2, 4), (3, 3), (4, 2)])
def test_counts_match_enumeration(N, k):
    pts = [index_to_address(i, N, k) for i in range(N**k)]
    origin = Address.zero(N)
    assert ball_point_count(N, k) == len(pts)
    boundary = sum(distance(p, origin) == k for p in pts)
    assert boundary_point_count(N, k) == boundary
    for j in range(k):
        ann = sum(j < distance(p, origin) <= k for p in pts)
        assert annulus_point_count(N, j, k) == ann
    for m in range(1, k + 1):
        brute = sum(distance(a, b) == m for a, b in combinations(pts, 2))
        assert pair_count_at_distance(N, k, m) == brute


def test_exact_range_guard():
    assert ball_point_count(2, 62) == 2**62
    with pytest.raises(ExactRangeError):
        ball_point_count(2, 63)
    with pytest.raises(ExactRangeError):
        pair_count_at_distance(2, 62, 62)


def test_count_argument_checks():
    with pytest.raises(InvalidInputError):
        ball_point_count(1, 3)
    with pytest.raises(InvalidInputError):
        annulus_point_count(2, 3, 3)
    with pytest.raises(InvalidInputError):
        pair_count_at_distance(2, 3, 4)


@given(st.integers(0, 3**5 - 1))
def test_index_round_trip(i):
    x = index_to_address(i, 3, 5)
    assert address_to_index(x, 5) == i
    assert subball_index(i, 3, 5, 2) == i // 9


def test_index_distance_matches_addresses():
    N, k = 3, 4
    i, j = np.meshgrid(np.arange(N**k), np.arange(N**k))
    d = index_distance(i.ravel(), j.ravel(), N)
    ref = [hier_distance(a, b, N) for a, b in zip(i.ravel(), j.ravel())]
    assert d.tolist() == ref
    assert index_distance(5, 5, N) == 0
    assert distance(index_to_address(1, N, k), index_to_address(28, N, k)) == index_distance(1, 28, N)
