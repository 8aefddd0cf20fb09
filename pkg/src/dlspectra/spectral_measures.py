"""Plancherel measure and off-diagonal spectral measures of the simple random walk on DL(q, r).

Every measure here is a countable sum of point masses at the values
rho * cos(m pi / n).  Truncated versions carry an explicit bound on the
total absolute mass left out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from dlspectra.dl_graph import DLVertex, relative_position
from dlspectra.eigenbasis import spectral_radius


def coprime_pairs(n_max: int, n_min: int = 2) -> Iterator[tuple[int, int]]:
    """Pairs 1 <= m < n <= n_max with gcd 1, n ascending then m ascending."""
    for n in range(max(2, n_min), n_max + 1):
        for m in range(1, n):
            if math.gcd(m, n) == 1:
                yield m, n


def euler_phi(n: int) -> int:
    return sum(1 for m in range(1, n + 1) if math.gcd(m, n) == 1)


def atom_value(m: int, n: int, q: int, r: int) -> float:
    if 2 * m == n:
        return 0.0
    return spectral_radius(q, r) * math.cos(m * math.pi / n)


def _check_pair(m: int, n: int):
    if n < 2 or not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n and n >= 2, got m={m}, n={n}")
    if math.gcd(m, n) != 1:
        raise ValueError(f"m={m} and n={n} are not coprime")


def plancherel_mass(m: int, n: int, q: int, r: int) -> float:
    _check_pair(m, n)
    if q == r:
        return (q - 1) ** 2 / (q**n - 1)
    s2 = math.sin(m * math.pi / n) ** 2
    logs = (math.log1p(-float(r) ** -n) - math.log1p(-float(q) ** -n)) / (n * (r - q))
    return logs * 2 * q * r * (q + r) * (q - 1) * (r - 1) * s2 / ((r - q) ** 2 + 4 * q * r * s2)


def plancherel_mass_exact(m: int, n: int, q: int) -> Fraction:
    """Rational atom mass on the lamplighter graph DL(q, q)."""
    _check_pair(m, n)
    return Fraction((q - 1) ** 2, q**n - 1)


def _sum_n_x_pow_n(N: int, x: float) -> float:
    """sum_{n > N} n x^n for 0 < x < 1."""
    return x ** (N + 1) * ((N + 1) - N * x) / (1 - x) ** 2


def plancherel_tail_bound(q: int, r: int, n_max: int) -> float:
    """Upper bound for the Plancherel mass carried by atoms with n > n_max."""
    c = min(q, r)
    x = 1.0 / c
    if q == r:
        # at most n - 1 atoms of mass (q-1)^2/(q^n - 1) each
        return (q - 1) ** 2 * _sum_n_x_pow_n(n_max, x) / (1 - x ** (n_max + 1))
    # sin^2 / ((r-q)^2 + 4qr sin^2) <= 1/(4qr) and |log ratio| <= c^-n / (1 - c^-n)
    K = (q + r) * (q - 1) * (r - 1) / (2 * abs(r - q))
    return K * x ** (n_max + 1) / ((1 - x) * (1 - x ** (n_max + 1)))


@dataclass(frozen=True)
class SpectralAtom:
    m: int
    n: int
    lam: float
    mass: float
    mass_exact: Fraction | None = None


@dataclass
class DiscreteMeasure:
    atoms: list[SpectralAtom]
    n_max: int
    tail_bound: float
    q: int = 2
    r: int = 2
    meta: dict = field(default_factory=dict)

    def total_mass(self) -> float:
        return math.fsum(a.mass for a in self.atoms)

    def rows(self) -> list[dict]:
        return [
            {"m": a.m, "n": a.n, "lambda": a.lam, "mass": a.mass, "mass_exact": a.mass_exact}
            for a in self.atoms
        ]


def plancherel_measure(q: int, r: int, n_max: int) -> DiscreteMeasure:
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    atoms = []
    for m, n in coprime_pairs(n_max):
        exact = plancherel_mass_exact(m, n, q) if q == r else None
        atoms.append(SpectralAtom(m, n, atom_value(m, n, q, r), plancherel_mass(m, n, q, r), exact))
    return DiscreteMeasure(atoms, n_max, plancherel_tail_bound(q, r, n_max), q, r)


def spectral_moment(measure: DiscreteMeasure, N: int) -> tuple[float, float]:
    """N-th moment of the truncated measure and a bound on the omitted part."""
    if N < 0:
        raise ValueError("moment order must be nonnegative")
    val = math.fsum(a.lam**N * a.mass for a in measure.atoms)
    return val, measure.tail_bound * spectral_radius(measure.q, measure.r) ** N


# --- off-diagonal measures ----------------------------------------------------------

def _c_const(k1: int, k2: int, q: int, r: int) -> int:
    if k1 > 0 and k2 > 0:
        return (q - 1) * (r - 1)
    if k1 == 0 and k2 > 0:
        return -(r - 1)
    if k1 > 0:
        return -(q - 1)
    return 1


def _first_ell(height: int, n: int) -> int:
    return max(1, -(-height // n))


def _ox_term_bound(height: int, d1: int, q: int, r: int) -> float:
    """Bound per unit c^{-l n} on a single l-term of the double sum."""
    ratio = r / q
    cmax = max((q - 1) * (r - 1), q - 1, r - 1, 1)
    return 3.0 * cmax * ratio ** (d1 / 2) * max(1.0, ratio) ** (-height)


def mu_ox_mass(x: DLVertex, m: int, n: int, q: int, r: int, ell_max: int) -> tuple[float, float]:
    """Mass of the measure between the origin and ``x`` at rho*cos(m pi/n).

    Sums tetrahedra of height l*n for l up to ``ell_max``; returns the value
    together with a bound on the omitted terms.
    """
    _check_pair(m, n)
    rp = relative_position(x)
    height, d1 = rp.nn, rp.d1
    l0 = _first_ell(height, n)
    if ell_max < l0:
        raise ValueError(f"ell_max must be at least {l0} for this vertex")
    theta = m * math.pi / n
    ratio = r / q
    total = []
    for ell in range(l0, ell_max + 1):
        L = ell * n
        inner = math.fsum(
            _c_const(k, L - height - k, q, r) * ratio ** (k + d1 / 2)
            * math.sin((k + rp.up1) * theta) * math.sin((k + rp.dn1) * theta)
            for k in range(L - height + 1)
        )
        total.append(2.0 * float(r) ** -L / L * inner)
    c = min(q, r)
    tail = _ox_term_bound(height, d1, q, r) * float(c) ** (-(ell_max + 1) * n) / (1 - float(c) ** -n)
    return math.fsum(total), tail


def mu_ox_measure(x: DLVertex, q: int, r: int, n_max: int, ell_max: int | None = None) -> DiscreteMeasure:
    """Truncated off-diagonal measure: atoms with n <= n_max, heights up to ell_max * n.

    ``ell_max`` defaults to the smallest value that pushes every height past 2 * n_max.
    """
    rp = relative_position(x)
    atoms, tail = [], 0.0
    for m, n in coprime_pairs(n_max):
        ell = ell_max if ell_max is not None else max(_first_ell(rp.nn, n), -(-2 * n_max // n))
        mass, err = mu_ox_mass(x, m, n, q, r, ell)
        atoms.append(SpectralAtom(m, n, atom_value(m, n, q, r), mass))
        tail += err
    # atoms with n > n_max: at most n - 1 of them, each bounded by the full l-series
    c = min(q, r)
    per = _ox_term_bound(rp.nn, rp.d1, q, r)
    tail += per * _sum_n_x_pow_n(n_max, 1.0 / c) / (1 - float(c) ** -(n_max + 1))
    return DiscreteMeasure(atoms, n_max, tail, q, r, {"x": x})
