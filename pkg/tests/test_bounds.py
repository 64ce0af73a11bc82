import itertools
import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordinal_shapley.bounds import (
    CmcBoundInput,
    TmcBoundInput,
    bennett_h,
    cmc_bound,
    positional_range,
    tmc_bound,
    tmc_bound_raw,
    truncation_bias,
    vector_bound,
)
from ordinal_shapley.exact import partial_ordinal_shapley
from ordinal_shapley.synthetic import TableUtility

mpmath.mp.dps = 50


def mp_h(x):
    x = mpmath.mpf(x)
    return (1 + x) * mpmath.log(1 + x) - x


@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3])
def test_bennett_h_matches_high_precision_reference(x):
    assert bennett_h(x) == pytest.approx(float(mp_h(x)), rel=1e-12, abs=1e-300)


def test_bennett_h_at_one():
    assert abs(bennett_h(1.0) - (2 * math.log(2) - 1)) <= 1e-12
    assert bennett_h(0.0) == 0.0
    with pytest.raises(ValueError):
        bennett_h(-0.1)


def test_cmc_bound_reference_value():
    inp = CmcBoundInput(q=0.8, T=1000, delta=1.0, epsilon=0.1)
    var = mpmath.mpf(2) * mpmath.mpf("0.8") - mpmath.mpf("0.8") ** 2
    ref = mpmath.exp(-var * 1000 * mp_h(mpmath.mpf("0.1") / var))
    assert cmc_bound(inp) == pytest.approx(float(ref), rel=1e-12)
    assert cmc_bound(inp) == pytest.approx(6.497e-3, rel=1e-3)


def test_tmc_bound_reference_value():
    # k=2, r_max=1, eps=0.1, eps_k=0: each term is 2 exp(-2 * 1000 * 0.01 / 4)
    inp = TmcBoundInput([1000, 1000], k=2, r_max=1.0, epsilon=0.1)
    assert tmc_bound_raw(inp) == pytest.approx(4 * math.exp(-5.0), rel=1e-14)


def test_tmc_bound_needs_epsilon_above_bias():
    with pytest.raises(ValueError, match="epsilon > epsilon_k"):
        tmc_bound(TmcBoundInput([100, 100], 2, 1.0, epsilon=0.05, epsilon_k=0.1))


def test_tmc_bound_only_uses_first_k_positions():
    a = TmcBoundInput([10, 20, 0], k=2, r_max=1.0, epsilon=0.5)
    b = TmcBoundInput([10, 20, 999], k=2, r_max=1.0, epsilon=0.5)
    assert tmc_bound_raw(a) == tmc_bound_raw(b)


def test_bounds_clamp_but_raw_does_not():
    inp = TmcBoundInput([1, 1, 1], k=3, r_max=5.0, epsilon=0.01)
    assert tmc_bound_raw(inp) > 1
    assert tmc_bound(inp) == 1.0


def test_input_validation():
    with pytest.raises(ValueError):
        cmc_bound(CmcBoundInput(q=0.0, T=10, delta=1, epsilon=0.1))
    with pytest.raises(ValueError):
        cmc_bound(CmcBoundInput(q=0.5, T=0, delta=1, epsilon=0.1))
    with pytest.raises(ValueError):
        tmc_bound(TmcBoundInput([5], k=2, r_max=1, epsilon=0.1))
    with pytest.raises(ValueError):
        vector_bound(lambda i, e: 0.1, 3, 0.5, 0.1)


def test_positional_range_general_and_nonnegative():
    a, b = [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]
    assert positional_range(a, b, 2) == pytest.approx(5.0)
    assert positional_range(a, b, 2, nonnegative=True) == pytest.approx(3.0)


def test_positional_range_forms_coincide_when_lower_end_is_nonnegative():
    a, b = [0.5, 0.9, 0.95], [1.0, 1.0, 1.0]
    # lower = (a_3 - b_2) * 2 + a_3 = 0.85 >= 0, so flooring changes nothing
    assert positional_range(a, b, 2) == positional_range(a, b, 2, nonnegative=True)


def test_positional_range_covers_observed_marginals():
    U = TableUtility.random(4, seed=12, low=0.0, high=1.0)
    sizes = range(1, 5)
    a = [min(U(s) for s in itertools.permutations(range(4), k)) / k for k in sizes]
    b = [max(U(s) for s in itertools.permutations(range(4), k)) / k for k in sizes]
    for k in range(4):
        margs = [U(s + (p,)) - U(s) for s in itertools.permutations(range(4), k)
                 for p in range(4) if p not in s]
        assert max(margs) - min(margs) <= positional_range(a, b, k) + 1e-12


@settings(max_examples=1000)
@given(st.floats(0.01, 1.0), st.integers(1, 5000), st.floats(0.01, 10.0),
       st.floats(0.001, 5.0), st.floats(0.001, 5.0))
def test_cmc_bound_monotone(q, T, delta, e1, e2):
    lo, hi = sorted((e1, e2))
    b_lo = cmc_bound(CmcBoundInput(q, T, delta, lo))
    b_hi = cmc_bound(CmcBoundInput(q, T, delta, hi))
    assert b_hi <= b_lo + 1e-15
    assert cmc_bound(CmcBoundInput(q, T + 1, delta, lo)) <= b_lo + 1e-15
    assert 0.0 <= b_hi <= 1.0


@settings(max_examples=1000)
@given(st.lists(st.integers(0, 2000), min_size=1, max_size=8), st.floats(0.1, 3.0),
       st.floats(0.0, 0.5), st.floats(0.01, 2.0), st.floats(0.01, 2.0), st.integers(0, 50))
def test_tmc_bound_monotone(m, r_max, eps_k, d1, d2, extra):
    lo, hi = sorted((d1, d2))
    k = len(m)
    b_lo = tmc_bound(TmcBoundInput(m, k, r_max, eps_k + lo, eps_k))
    b_hi = tmc_bound(TmcBoundInput(m, k, r_max, eps_k + hi, eps_k))
    assert b_hi <= b_lo + 1e-15
    more = [x + extra for x in m]
    assert tmc_bound(TmcBoundInput(more, k, r_max, eps_k + lo, eps_k)) <= b_lo + 1e-15
    assert 0.0 <= b_hi <= 1.0


@settings(max_examples=1000)
@given(st.integers(1, 20), st.sampled_from([1.0, 2.0, 3.0, math.inf]), st.floats(0.01, 2.0),
       st.floats(0.01, 2.0))
def test_vector_bound_monotone_and_consistent(n, p, e1, e2):
    lo, hi = sorted((e1, e2))
    per = lambda i, eps: cmc_bound(CmcBoundInput(0.8, 500, 1.0 + i / n, eps))
    assert vector_bound(per, n, p, hi) <= vector_bound(per, n, p, lo) + 1e-15
    eps = lo if math.isinf(p) else lo / n ** (1 / p)
    expected = min(1.0, math.fsum(per(i, eps) for i in range(n)))
    assert vector_bound(per, n, p, lo) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=1000)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=6), st.lists(st.floats(0, 2), min_size=6,
       max_size=6), st.data())
def test_nonnegative_range_is_never_wider(a, widths, data):
    b = [x + w for x, w in zip(a, widths)]
    k = data.draw(st.integers(0, len(a) - 1))
    general = positional_range(a, b, k)
    floored = positional_range(a, b, k, nonnegative=True)
    assert floored <= general + 1e-12
    lower = (a[k] - (b[k - 1] if k else 0.0)) * k + a[k]
    if lower < -1e-9:
        assert floored < general
    elif lower >= 0:
        assert floored == pytest.approx(general)


def test_truncation_bias_vanishes_at_full_depth_and_matches_enumeration():
    U = TableUtility.random(4, seed=21)
    phi = partial_ordinal_shapley(U).values
    for i in range(4):
        assert truncation_bias(U, i, 4) == pytest.approx(0.0, abs=1e-12)
    # slot 1 alone: i first in 1/n of all orderings, marginal U((i,)) - U(())
    expected = abs(U((0,)) / 4 - phi[0])
    assert truncation_bias(U, 0, 1) == pytest.approx(expected, abs=1e-12)
