import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgap.core_math import DomainError
from kgap.gap_process import (
    GapParams,
    RunLengthState,
    asymptotic_deviation,
    direct_product_A1,
    frr_residual,
    g_bounds_check,
    g_no_gap,
    lambda_k,
    p_Ak,
    prefix_no_gap,
    sandwich_bounds,
)


def has_gap(bits, k):
    run = 0
    for b in bits:
        run = 0 if b else run + 1
        if run >= k:
            return True
    return False


def enumerate_no_gap(k, probs):
    """Sum over all outcome strings; probs may be Fractions."""
    total = 0
    for bits in itertools.product((0, 1), repeat=len(probs)):
        if has_gap(bits, k):
            continue
        w = 1
        for b, p in zip(bits, probs):
            w *= p if b else 1 - p
        total += w
    return total


def test_params_validation():
    with pytest.raises(DomainError):
        GapParams(0, 0.5)
    with pytest.raises(DomainError):
        GapParams(2, 1.0)
    with pytest.raises(DomainError):
        GapParams(1.5, 0.5)


def test_g_examples():
    assert g_no_gap(1, 0.3, 5) == pytest.approx(0.3**5, rel=1e-14)
    assert g_no_gap(2, 0.5, 2) == pytest.approx(0.75)
    for k in (1, 2, 3, 5):
        for n in range(k):
            assert g_no_gap(k, 0.2, n) == 1


def no_gap_counts_by_weight(k, n):
    """Number of gap-free outcome strings of length n with j occurrences, j = 0..n."""
    codes = np.arange(2**n, dtype=np.int64)
    run = np.zeros(codes.size, dtype=np.int64)
    bad = np.zeros(codes.size, dtype=bool)
    for i in range(n):
        occ = (codes >> i) & 1
        run = np.where(occ == 1, 0, run + 1)
        bad |= run >= k
    ones = np.zeros(codes.size, dtype=np.int64)
    for i in range(n):
        ones += (codes >> i) & 1
    return np.bincount(ones[~bad], minlength=n + 1)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_g_exact_against_enumeration(k):
    u = Fraction(3, 8)
    for n in (0, 1, 5, 12, 20):
        counts = no_gap_counts_by_weight(k, n)
        exact = sum(int(c) * u**j * (1 - u) ** (n - j) for j, c in enumerate(counts))
        assert g_no_gap(k, u, n) == exact
    # spot check the helper itself against the plain enumeration
    assert g_no_gap(k, u, 9) == enumerate_no_gap(k, [u] * 9)


def test_heterogeneous_dp_against_enumeration():
    s = 0.17
    probs = [1 - (1 - s) ** i for i in range(1, 19)]
    for k in (1, 2, 3, 4):
        st_ = prefix_no_gap(k, probs)
        assert st_.step == 18
        assert st_.total == pytest.approx(enumerate_no_gap(k, probs), abs=1e-12)


def test_run_length_state_invariants():
    st_ = RunLengthState.start(3)
    prev = 1.0
    for i in range(1, 40):
        st_.advance(1 - 0.8**i)
        probs = st_.probabilities
        assert all(0 <= p <= 1 for p in probs)
        assert st_.total <= prev + 1e-15
        assert sum(probs) == pytest.approx(st_.total, rel=1e-12)
        prev = st_.total


def test_g_bounds_examples():
    for u in (0.1, 0.5, 0.9):
        for n in (1, 5, 30):
            assert g_bounds_check(1, u, n)
    assert g_bounds_check(2, 0.3, 10)
    assert g_bounds_check(4, 0.05, 200)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 5), u=st.floats(0.02, 0.98), n=st.integers(0, 150))
def test_g_bounds_property(k, u, n):
    assert g_bounds_check(k, u, n, slack=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_frr_identity(k):
    for x in np.linspace(0.02, 0.98, 25):
        assert abs(frr_residual(k, float(x))) <= 1e-12


def test_p_A1_matches_direct_product():
    for s in (0.5, 0.1, 0.01):
        res = p_Ak(GapParams(1, s))
        assert res.log_value == pytest.approx(direct_product_A1(s), rel=1e-11)


def test_p_Ak_against_truncated_enumeration():
    # s large enough that 18 events carry all but ~1e-13 of the gap risk
    s = 0.85
    probs = [1 - (1 - s) ** i for i in range(1, 19)]
    for k in (1, 2, 3):
        assert p_Ak(GapParams(k, s)).value == pytest.approx(enumerate_no_gap(k, probs), abs=1e-12)


def test_p_Ak_tends_to_one():
    vals = [p_Ak(GapParams(2, s)).value for s in (0.9, 0.99, 0.999)]
    assert vals[-1] > 0.999999
    assert vals == sorted(vals)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_p_Ak_monotone_in_s(k):
    grid = np.linspace(0.05, 0.95, 19)
    logs = [p_Ak(GapParams(k, float(s))).log_value for s in grid]
    assert all(b >= a for a, b in zip(logs, logs[1:]))


def test_p_Ak_decreasing_in_k():
    s = 0.2
    vals = [p_Ak(GapParams(k, s)).log_value for k in (1, 2, 3, 4)]
    assert vals == sorted(vals)


def test_p_Ak_tiny_s_stays_in_log_space():
    res = p_Ak(GapParams(1, 1e-4))
    assert res.value == 0.0
    assert -res.log_value * 1e-4 == pytest.approx(math.pi**2 / 6, rel=1e-3)
    assert res.rel_error <= 1e-12


@pytest.mark.parametrize("k,s", [(2, 0.01), (2, 0.1 / 4), (3, 0.001), (1, 0.05), (4, 0.01)])
def test_sandwich_contains_exact(k, s):
    sw = sandwich_bounds(GapParams(k, s))
    exact = p_Ak(GapParams(k, s))
    assert sw.r == math.floor(s**-0.5)
    assert sw.log_lower <= exact.log_lower
    assert exact.log_value <= sw.log_upper


def test_sandwich_brackets_lambda():
    s = 0.001
    sw = sandwich_bounds(GapParams(3, s))
    assert -s * sw.log_upper <= lambda_k(3) <= -s * sw.log_lower


def test_sandwich_inapplicable():
    with pytest.raises(DomainError):
        sandwich_bounds(GapParams(5, 0.5))


def test_lambda_values():
    assert lambda_k(1) == pytest.approx(math.pi**2 / 6)
    assert lambda_k(2) == pytest.approx(0.5483, abs=1e-4)
    vals = [lambda_k(k) for k in range(1, 30)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(DomainError):
        lambda_k(0)


def test_asymptotic_deviation_shrinks():
    dev = asymptotic_deviation(2, [0.1, 0.01, 0.001])
    assert dev[0] > dev[1] > dev[2] >= 0
    dev1 = asymptotic_deviation(1, [0.01, 0.001])
    assert dev1[1] < dev1[0] < 0.05
