import math
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from dlspectra.asymptotics import (
    constants, decay_base, leading_constant, ratio_table, return_asymptotic, sigma_asymptotic,
    sigma_direct, spectral_return_sum,
)
from dlspectra.walk_engine import WalkParams, exact_return_prob


def test_constants_q2():
    c = constants(1, 2)
    assert c.xi_k == pytest.approx(3.0537590005, abs=1e-9)
    # bounded minimiser of phi as an independent check
    res = minimize_scalar(c.phi, bounds=(0.5, 10), method="bounded", options={"xatol": 1e-12})
    assert c.xi_k == pytest.approx(res.x, abs=1e-6)
    assert c.B_k == pytest.approx(res.fun, abs=1e-12)
    assert c.B_k == pytest.approx(3.17505666196, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("q", [2, 3, 5])
def test_stationary_point(k, q):
    c = constants(k, q)
    h = 1e-4 * c.xi_k
    d1 = (c.phi(c.xi_k + h) - c.phi(c.xi_k - h)) / (2 * h)
    d2 = (c.phi(c.xi_k + h) - 2 * c.phi(c.xi_k) + c.phi(c.xi_k - h)) / h**2
    assert abs(d1) < 1e-6 * c.B_k
    assert d2 == pytest.approx(c.C_k, rel=1e-6)
    assert c.phi(c.xi_k) == pytest.approx(c.B_k, rel=1e-14)
    assert c.phi(c.xi_k + 1e-3) > c.B_k and c.phi(c.xi_k - 1e-3) > c.B_k


def test_b_increasing_in_k():
    for q in (2, 3, 7):
        Bs = [constants(k, q).B_k for k in range(1, 6)]
        assert all(a < b for a, b in zip(Bs, Bs[1:]))


def test_constants_reject_bad_input():
    with pytest.raises(ValueError):
        constants(0, 2)
    with pytest.raises(ValueError):
        constants(1, 1)


def test_sigma_direct_geometric():
    assert sigma_direct(0, 1, 0, 2) == pytest.approx(0.25, rel=1e-25)
    assert sigma_direct(0, 1, 0, 3) == pytest.approx(1 / 18, rel=1e-25)


def test_sigma_direct_decreasing():
    vals = [sigma_direct(N, 1, g, 2) for g in (0, -3) for N in (1, 5, 20, 100, 1000)]
    for a, b in zip(vals[:4], vals[1:5]):
        assert b < a
    for a, b in zip(vals[5:9], vals[6:10]):
        assert b < a


def test_sigma_direct_cap_too_small():
    with pytest.raises(ValueError, match="unreachable"):
        sigma_direct(100, 1, 0, 2, n_cap=20)


@given(st.integers(1, 10**6), st.integers(1, 3), st.sampled_from([-3.0, 0.0, 1.0]), st.sampled_from([2, 3]))
def test_sigma_asymptotic_scaling(N, k, gamma, q):
    val = sigma_asymptotic(N, k, gamma, q)
    assert val > 0
    c = constants(k, q)
    offset = mp.log(val) + c.B_k * mp.cbrt(N) - (1 + 2 * gamma) / 6 * mp.log(N)
    expected = gamma * math.log(c.xi_k) + 0.5 * math.log(2 * math.pi / c.C_k)
    assert float(offset) == pytest.approx(expected, abs=1e-12)


def test_sigma_ratio_tends_to_one():
    ratios = [sigma_direct(N, 1, 0, 2) / sigma_asymptotic(N, 1, 0, 2) for N in (10**3, 10**4, 10**5)]
    assert abs(ratios[1] - 1) < 0.1
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)


def test_decay_base():
    assert decay_base(2, 3) == decay_base(3, 2) == 2


def test_equal_branching_form():
    c = constants(1, 2)
    for N in (10, 1000):
        expected = 2 * math.sqrt(2 * math.pi / c.C_k) * math.exp(-c.B_k * N ** (1 / 3)) * N ** (1 / 6)
        assert float(return_asymptotic(N, 2, 2)) == pytest.approx(expected, rel=1e-12)
    assert leading_constant(3, 3) == pytest.approx(8 * math.sqrt(2 * math.pi / constants(1, 3).C_k))


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3), (3, 5)])
def test_balanced_alpha_is_undrifted(q, r):
    for N in (5, 500):
        assert return_asymptotic(N, q, r, Fraction(q, q + r)) == return_asymptotic(N, q, r)


def test_swapped_branching_symmetric():
    assert return_asymptotic(1000, 3, 2) == return_asymptotic(1000, 2, 3)


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3), (3, 4)])
def test_spectral_sum_matches_exact(q, r):
    P = WalkParams.simple(q, r)
    for N in range(0, 6):
        exact = exact_return_prob(2 * N, P)
        assert spectral_return_sum(N, q, r) == pytest.approx(mp.mpf(exact.numerator) / exact.denominator, rel=1e-25)


def test_drifted_spectral_sum_matches_exact():
    for alpha in (Fraction(1, 3), Fraction(2, 3)):
        P = WalkParams(2, 3, alpha)
        for N in range(0, 5):
            exact = exact_return_prob(2 * N, P)
            val = spectral_return_sum(N, 2, 3, alpha)
            assert val == pytest.approx(mp.mpf(exact.numerator) / exact.denominator, rel=1e-25)


def test_bad_alpha():
    with pytest.raises(ValueError):
        return_asymptotic(10, 2, 3, Fraction(3, 2))


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3)])
def test_return_ratio_improves(q, r):
    rows = ratio_table(q, r, Ns=(10**2, 10**3, 10**4))
    gaps = [abs(float(row[3]) - 1) for row in rows]
    assert gaps[0] > gaps[1] > gaps[2]
