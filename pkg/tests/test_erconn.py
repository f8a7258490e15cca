import math

import numpy as np
import pytest
from scipy.stats import binom

from hierperc.erconn import (
    MAX_EXACT_VERTICES,
    binomial_deficit_bound,
    binomial_tail_bound,
    chernoff_kappa,
    durrett_lower_bound,
    er_probability,
    exact_binomial_tail,
    exact_connectivity,
    fit_nonconnectivity_constant,
    h,
    mc_connectivity,
    nonconnectivity_upper_bound,
)
from hierperc.errors import InvalidInputError, RegimeError
from tests.oracles import brute_connectivity


def test_small_cases():
    assert exact_connectivity(1, 0.3) == 1.0
    assert exact_connectivity(2, 0.3) == pytest.approx(0.3, abs=1e-15)
    assert exact_connectivity(3, 0.5) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_matches_enumeration(n, p):
    assert abs(exact_connectivity(n, p) - brute_connectivity(n, p)) < 1e-12


def test_exact_range_errors():
    with pytest.raises(InvalidInputError):
        exact_connectivity(MAX_EXACT_VERTICES + 1, 0.5)
    with pytest.raises(InvalidInputError):
        exact_connectivity(0, 0.5)
    with pytest.raises(InvalidInputError):
        exact_connectivity(5, 1.5)


def test_monotone_in_p():
    ps = np.linspace(0, 1, 41)
    for n in (6, 30, 120):
        vals = [exact_connectivity(n, p) for p in ps]
        assert np.all(np.diff(vals) >= -1e-13)


def test_er_probability_clamps():
    assert er_probability(100, 2) == pytest.approx(2 * math.log(100) / 100)
    with pytest.warns(UserWarning):
        assert er_probability(3, 5) == 1.0


def test_mc_trivial_and_deterministic():
    assert mc_connectivity(8, 1.0, 500, 1).value == 1.0
    assert mc_connectivity(8, 0.0, 500, 1).value == 0.0
    assert mc_connectivity(1, 0.0, 10, 1).value == 1.0
    a = mc_connectivity(12, 0.3, 5000, 4)
    assert a == mc_connectivity(12, 0.3, 5000, 4)
    assert a == mc_connectivity(12, 0.3, 5000, 4, workers=2)


def test_mc_against_exact():
    exact = exact_connectivity(10, 0.3)
    est = mc_connectivity(10, 0.3, 20000, 3)
    assert abs(est.value - exact) <= 3 * math.sqrt(exact * (1 - exact) / 20000)
    assert est.low <= est.value <= est.high


def test_interval_shrinks_like_root_n():
    small = mc_connectivity(10, 0.3, 4000, 5)
    big = mc_connectivity(10, 0.3, 64000, 5)
    ratio = (small.high - small.low) / (big.high - big.low)
    assert 3.5 < ratio < 4.5


def test_durrett_regime_and_clamp():
    with pytest.raises(RegimeError):
        durrett_lower_bound(100, 1.0)
    b = durrett_lower_bound(10, 1.5)
    assert b.clamped and b.raw_sign == -1 and b.value == 0.0 and b.raw < 0


@pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
def test_durrett_tends_to_one(a):
    xs = np.arange(10, 600)
    bounds = [durrett_lower_bound(math.exp(x), a) for x in xs]
    logs = np.array([b.log_abs_raw if b.raw_sign == 1 else -np.inf for b in bounds])
    first = int(np.argmax(np.isfinite(logs) & (logs > -700)))
    assert first > 0
    assert np.all(np.diff(logs[first:]) >= 0)
    assert bounds[-1].raw == 1.0 and bounds[-1].value == 1.0


def test_durrett_below_exact_where_positive():
    # the raw bound is negative on the whole small-n range, so every
    # comparison is vacuous; still check the clamped value is a lower bound
    for a in (1.5, 2.0, 3.0):
        for n in range(10, 401, 13):
            b = durrett_lower_bound(n, a)
            exact = exact_connectivity(n, min(1.0, a * math.log(n) / n))
            assert b.value <= exact


def test_nonconnectivity_bound_shape():
    assert nonconnectivity_upper_bound(1000, 2.0) > nonconnectivity_upper_bound(1000, 3.0)
    assert nonconnectivity_upper_bound(1000, 2.0, exponent13=False) >= nonconnectivity_upper_bound(1000, 2.0)
    with pytest.raises(RegimeError):
        nonconnectivity_upper_bound(1000, 0.5)
    # with M = L = 1 the bound drops below 1 for good at some finite n
    xs = np.linspace(1.5, 300, 2000)
    vals = np.array([nonconnectivity_upper_bound(math.exp(x), 2.0) for x in xs])
    above = np.flatnonzero(vals >= 1)
    x_star = xs[above[-1] + 1]
    assert 40 < x_star < 60
    assert np.all(np.diff(vals[above[-1] + 1 :]) <= 0)


def test_fitted_constant():
    ns = range(50, 401)
    M = fit_nonconnectivity_constant(2.0, ns)
    assert np.isfinite(M) and M > 0
    for n in ns:
        assert 1 - durrett_lower_bound(n, 2.0).value <= nonconnectivity_upper_bound(n, 2.0, M) * (1 + 1e-12)


def test_h_values():
    assert h(1.0) == 0.0
    assert h(math.e) == pytest.approx(1 / math.e, abs=1e-15)
    assert h(2.0) == pytest.approx(0.1931471805599453, abs=1e-15)


def test_binomial_example():
    assert binomial_tail_bound(10, 0.2, 4, 2) == pytest.approx(math.exp(-4 * h(2)), rel=1e-14)
    assert binomial_tail_bound(10, 0.2, 4, 2) == pytest.approx(0.4618, abs=1e-4)
    assert exact_binomial_tail(10, 0.2, 4) == pytest.approx(0.1208738, abs=1e-7)
    with pytest.raises(InvalidInputError):
        binomial_tail_bound(10, 0.2, 3, 2)
    with pytest.raises(InvalidInputError):
        binomial_tail_bound(10, 0.2, 3, 1)


@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("q", [0.1, 0.3])
@pytest.mark.parametrize("c", [1.2, 2.0, 3.0])
def test_tail_bound_grid(n, q, c):
    x = c * n * q
    exact = exact_binomial_tail(n, q, x)
    assert exact == pytest.approx(binom.sf(math.ceil(x) - 1, n, q), rel=1e-9, abs=1e-300)
    assert exact <= binomial_tail_bound(n, q, x, c)


def test_kappa():
    k, eps = chernoff_kappa(0.5)
    assert eps == 0.5
    assert abs(k - h(1.5) / 0.25) < 2e-6
    assert abs(k - 0.2885) < 1e-4
    u = 1e-3
    assert abs(h(1 + u) / u**2 - 0.5) < 1e-3
    for em in (0.1, 0.5, 1.0):
        k, _ = chernoff_kappa(em)
        assert k <= 0.5
        us = np.linspace(1e-6, em, 20001)
        lhs = np.log1p(us) - us / (1 + us)
        assert np.all(lhs - k * us**2 >= -1e-12)
    with pytest.raises(InvalidInputError):
        chernoff_kappa(1.5)


@pytest.mark.parametrize("n", [100, 1000])
@pytest.mark.parametrize("p", [0.5, 0.8])
@pytest.mark.parametrize("sigma", [0.05, 0.1])
def test_deficit_grid(n, p, sigma):
    kappa, eps = chernoff_kappa(1.0)
    r = binomial_deficit_bound(n, p, sigma, kappa, eps)
    assert 0 <= r.exact <= r.bound <= 1


def test_deficit_monotone_and_errors():
    kappa, eps = chernoff_kappa(1.0)
    small = binomial_deficit_bound(100, 0.5, 1e-6, kappa, eps)
    assert small.bound > 0.999999
    b = [binomial_deficit_bound(n, 0.5, 0.1, kappa, eps).bound for n in (10, 100, 1000)]
    assert b[0] > b[1] > b[2]
    with pytest.raises(InvalidInputError):
        binomial_deficit_bound(100, 0.2, 0.3, kappa, eps)
    with pytest.raises(InvalidInputError):
        binomial_deficit_bound(100, 1.0, 0.1, kappa, eps)
