import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dlspectra.dl_graph import ORIGIN, parse_word, walk
from dlspectra.spectral_measures import (
    coprime_pairs, euler_phi, mu_ox_mass, mu_ox_measure, plancherel_mass, plancherel_mass_exact,
    plancherel_measure, plancherel_tail_bound, spectral_moment,
)
from dlspectra.walk_engine import WalkParams, exact_transition_prob


def test_lamplighter_masses():
    assert plancherel_mass_exact(1, 2, 2) == Fraction(1, 3)
    assert plancherel_mass_exact(1, 3, 2) == plancherel_mass_exact(2, 3, 2) == Fraction(1, 7)
    assert plancherel_mass(1, 2, 2, 2) == pytest.approx(1 / 3, rel=1e-15)


def test_unequal_branching_mass_value():
    # direct evaluation of the closed form at q=2, r=3, (m, n) = (1, 2)
    direct = (math.log(8 / 9) - math.log(3 / 4)) / 2 * (2 * 2 * 3 * 5 * 1 * 2 * 1) / (1 + 24)
    assert plancherel_mass(1, 2, 2, 3) == pytest.approx(direct, rel=1e-14)
    assert plancherel_mass(1, 2, 2, 3) == pytest.approx(0.40776, abs=1e-5)


def test_mass_rejects_non_coprime():
    with pytest.raises(ValueError):
        plancherel_mass(2, 4, 2, 2)
    with pytest.raises(ValueError):
        plancherel_mass(0, 3, 2, 2)


def test_coprime_enumeration():
    pairs = list(coprime_pairs(12))
    assert pairs == sorted(pairs, key=lambda p: (p[1], p[0]))
    assert len(pairs) == sum(euler_phi(n) for n in range(2, 13))
    assert all(math.gcd(m, n) == 1 for m, n in pairs)


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3), (3, 4), (3, 2)])
def test_total_mass_and_tail(q, r):
    mu = plancherel_measure(q, r, 30)
    total = mu.total_mass()
    assert total <= 1 <= total + mu.tail_bound
    assert mu.tail_bound < 1e-3


def test_tail_bound_small_at_thirty():
    assert plancherel_tail_bound(2, 2, 30) < 1e-7
    assert plancherel_tail_bound(2, 3, 30) < 1e-7


@given(st.integers(2, 25), st.sampled_from([(2, 2), (2, 3), (3, 5)]))
def test_symmetry_and_positivity(n_max, qr):
    q, r = qr
    mu = plancherel_measure(q, r, n_max)
    by = {(a.m, a.n): a for a in mu.atoms}
    for a in mu.atoms:
        b = by[(a.n - a.m, a.n)]
        assert b.mass == pytest.approx(a.mass, rel=1e-12)
        assert b.lam == pytest.approx(-a.lam, abs=1e-15)
        assert a.mass > 0


def test_monotone_truncation():
    totals = [plancherel_measure(2, 3, n).total_mass() for n in range(2, 20)]
    assert all(a <= b for a, b in zip(totals, totals[1:]))
    assert totals[-1] < 1


def test_low_moments():
    mu = plancherel_measure(2, 2, 30)
    m0, b = spectral_moment(mu, 0)
    assert abs(m0 - 1) < 1e-7
    assert abs(spectral_moment(mu, 1)[0]) < 1e-15
    assert spectral_moment(mu, 2)[0] == pytest.approx(0.25, abs=1e-7)
    with pytest.raises(ValueError):
        spectral_moment(mu, -1)


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3), (3, 4)])
def test_moment_matching(q, r):
    mu = plancherel_measure(q, r, 40)
    P = WalkParams.simple(q, r)
    for N in range(0, 13):
        exact = exact_transition_prob(N, ORIGIN, ORIGIN, P)
        val, bound = spectral_moment(mu, N)
        assert abs(val - float(exact)) <= bound + 1e-15


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3)])
def test_offdiagonal_at_origin_matches_plancherel(q, r):
    for m, n in [(1, 2), (1, 3), (2, 5), (3, 7)]:
        val, tail = mu_ox_mass(ORIGIN, m, n, q, r, 12)
        assert abs(val - plancherel_mass(m, n, q, r)) <= tail + 1e-15


def test_offdiagonal_ell_max_too_small():
    x = walk(parse_word("d1,d1,d0,u1,u1,u0"))
    with pytest.raises(ValueError):
        mu_ox_mass(x, 1, 2, 2, 2, 1)


@pytest.mark.parametrize("q,r", [(2, 2), (2, 3)])
@pytest.mark.parametrize("word", ["d1", "d0,u1", "d1,d0", "d1,u1,u0", "u1,u0,d1"])
def test_offdiagonal_total_mass_and_moments(q, r, word):
    x = walk(parse_word(word))
    mu = mu_ox_measure(x, q, r, 30)
    assert abs(mu.total_mass()) <= mu.tail_bound
    P = WalkParams.simple(q, r)
    for N in range(0, 11):
        exact = exact_transition_prob(N, ORIGIN, x, P)
        val, bound = spectral_moment(mu, N)
        assert abs(val - float(exact)) <= bound + 1e-15


def test_offdiagonal_signed():
    x = walk(parse_word("d1"))
    masses = [a.mass for a in mu_ox_measure(x, 2, 2, 8).atoms]
    assert min(masses) < 0 < max(masses)
