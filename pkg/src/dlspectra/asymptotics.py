"""Large-N behaviour of return probabilities on DL(q, r).

All step counts follow the bipartite convention: an argument ``N`` means the
2N-step return probability.  Values are mpmath numbers, since factors such as
rho^(2N) leave the double-precision range long before N = 10^5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

DPS = 40


@dataclass(frozen=True)
class AsymptoticConstants:
    k: int
    q_eff: float
    xi_k: float
    B_k: float
    C_k: float

    def phi(self, xi: float) -> float:
        return xi * math.log(self.q_eff) + (self.k * math.pi) ** 2 / xi**2


def constants(k: int, q: float) -> AsymptoticConstants:
    """Minimiser xi_k of phi(xi) = xi log q + (k pi)^2 / xi^2, its value B_k and curvature C_k."""
    if k < 1 or q < 2:
        raise ValueError("need k >= 1 and q >= 2")
    lq = math.log(q)
    xi = (2 * (k * math.pi) ** 2 / lq) ** (1 / 3)
    B = 3 * (k * math.pi * lq / 2) ** (2 / 3)
    C = 6 * (lq**2 / (4 * k * math.pi)) ** (2 / 3)
    return AsymptoticConstants(k, q, xi, B, C)


def decay_base(q: int, r: int) -> int:
    """The base whose negative powers govern the atom masses: min(q, r)."""
    return min(q, r)


def _auto_cap(N: int, k: int, q: float, tol: float) -> int:
    c = constants(k, q)
    return 2 * k + 1 + math.ceil((c.B_k * N ** (1 / 3) + math.log(1 / tol) + 60) / math.log(q))


def sigma_direct(N: int, k: int, gamma: float, q: float, n_cap: int | None = None, tol: float = 1e-25):
    """sum_{n > 2k} n^gamma q^-n cos^(2N)(k pi / n), summed up to n_cap.

    Raises ValueError when the bound on the omitted terms exceeds ``tol`` relative to the sum.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if n_cap is None:
        n_cap = _auto_cap(max(N, 1), k, q, tol)
    with mp.workdps(DPS):
        qq, g = mp.mpf(q), mp.mpf(gamma)
        terms = [mp.power(n, g) * qq ** (-n) * mp.cos(k * mp.pi / n) ** (2 * N) for n in range(2 * k + 1, n_cap + 1)]
        total = mp.fsum(terms)
        # omitted terms are at most n^gamma q^-n, geometric beyond the cap
        first = mp.power(n_cap + 1, g) * qq ** (-(n_cap + 1))
        ratio = mp.power(1 + mp.mpf(1) / (n_cap + 1), g) / qq if gamma > 0 else 1 / qq
        if ratio >= 1 or first / (1 - ratio) > tol * total:
            raise ValueError(f"tolerance {tol} unreachable with n_cap={n_cap}")
        return +total


def sigma_asymptotic(N: int, k: int, gamma: float, q: float):
    """Leading-order value xi^gamma sqrt(2 pi / C) exp(-B N^(1/3)) N^((1 + 2 gamma)/6)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    c = constants(k, q)
    with mp.workdps(DPS):
        N = mp.mpf(N)
        return (mp.mpf(c.xi_k) ** gamma * mp.sqrt(2 * mp.pi / c.C_k)
                * mp.exp(-c.B_k * mp.cbrt(N)) * N ** ((1 + 2 * mp.mpf(gamma)) / 6))


def leading_constant(q: int, r: int) -> float:
    """A_1 for r != q, and the constant of the equal-branching case for r == q."""
    c = constants(1, decay_base(q, r))
    root = math.sqrt(2 * math.pi / c.C_k)
    if q == r:
        return 2 * (q - 1) ** 2 * root
    return 4 * math.pi**2 * c.xi_k**-3 * root * q * r * (q + r) * (q - 1) * (r - 1) / abs(r - q) ** 3


def _per_step_factor(q: int, r: int, alpha):
    """rho^2 for the simple walk, 4 alpha (1 - alpha) for the drifted one (exact when rational)."""
    if alpha is None:
        return Fraction(4 * q * r, (q + r) ** 2)
    a = Fraction(alpha)
    if not 0 < a < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return 4 * a * (1 - a)


def return_asymptotic(N: int, q: int, r: int, alpha=None):
    """Leading-order 2N-step return probability at the origin."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if q < 2 or r < 2:
        raise ValueError("q and r must be at least 2")
    c = constants(1, decay_base(q, r))
    f = _per_step_factor(q, r, alpha)
    with mp.workdps(DPS):
        NN = mp.mpf(N)
        power = NN ** (mp.mpf(1) / 6) if q == r else NN ** (-mp.mpf(5) / 6)
        base = mp.mpf(f.numerator) / f.denominator
        return leading_constant(q, r) * base**N * mp.exp(-c.B_k * mp.cbrt(NN)) * power


def _mp_mass(m: int, n: int, q: int, r: int):
    s2 = mp.sin(m * mp.pi / n) ** 2
    if q == r:
        return mp.mpf((q - 1) ** 2) / (mp.mpf(q) ** n - 1)
    logs = (mp.log1p(-mp.mpf(r) ** -n) - mp.log1p(-mp.mpf(q) ** -n)) / (n * (r - q))
    return logs * 2 * q * r * (q + r) * (q - 1) * (r - 1) * s2 / ((r - q) ** 2 + 4 * q * r * s2)


def spectral_return_sum(N: int, q: int, r: int, alpha=None, rel_tol: float = 1e-30):
    """2N-step return probability summed over the Plancherel atoms in high precision.

    Atoms m and n - m carry the same mass and squared eigenvalue, so only
    m <= n/2 is visited.  The n-loop stops once past the bulk of the sum
    (n > 3.5 N^(1/3) + 60) and the leading atom of a row is below
    ``rel_tol`` times the running total.  Within a row the factor lambda^(2N)
    decreases in m while the mass grows at most like n^2, so a row is cut at
    its first negligible term.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    f = _per_step_factor(q, r, alpha)
    with mp.workdps(DPS):
        rho2 = mp.mpf(4 * q * r) / (q + r) ** 2
        scale = (mp.mpf(f.numerator) / f.denominator) / rho2
        total = mp.mpf(0)
        n = 2
        n_min = 3.5 * N ** (1 / 3) + 60
        while True:
            row = []
            for m in range(1, n // 2 + 1):
                if math.gcd(m, n) != 1:
                    continue
                lam2 = rho2 * mp.cos(m * mp.pi / n) ** 2
                term = _mp_mass(m, n, q, r) * lam2**N * (1 if 2 * m == n else 2)
                row.append(term)
                if total > 0 and term < rel_tol * total:
                    break
            lead = row[0]
            total += mp.fsum(row)
            if n > n_min and lead < rel_tol * total:
                break
            n += 1
        return total * scale**N


def ratio_table(q: int, r: int, Ns=(10**3, 10**4, 10**5), alpha=None) -> list[tuple[int, object, object, object]]:
    """(N, spectral sum, asymptotic, ratio) rows."""
    rows = []
    for N in Ns:
        s = spectral_return_sum(N, q, r, alpha)
        a = return_asymptotic(N, q, r, alpha)
        rows.append((N, s, a, s / a))
    return rows

