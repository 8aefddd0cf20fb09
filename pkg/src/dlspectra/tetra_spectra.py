"""Spectra of the walk on a finite tetrahedron S of height n in DL(q, r).

Two operators are considered.  The renormalised operator is simple random
walk on the induced subgraph: the bottom level (x1 = a1) keeps only its q
down-neighbours and the top level (x2 = a2) only its r up-neighbours.  It is
reversible for the weight 1 inside, q/(q+r) on level 0 and r/(q+r) on level n.
The truncated operator is the plain restriction of P, substochastic on the
two boundary levels.

The closed-form spectrum splits into four families: horizontal functions on
every sub-tetrahedron, the level-constant functions of S itself, and two
kinds of boundary families whose tridiagonal matrices lead to the
transcendental equation cot(N a) = kappa cot(a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from dlspectra.dl_graph import DLVertex, Tetrahedron, dl_neighbors, standard_tetrahedron, tetra_size
from dlspectra.eigenbasis import spectral_radius
from dlspectra.walk_engine import StateBudgetExceeded

RENORMALIZED = "renormalized"
TRUNCATED = "truncated"
MODES = (RENORMALIZED, TRUNCATED)


class RootBracketError(ArithmeticError):
    """A bracketing interval did not contain the expected sign change."""


@dataclass(frozen=True)
class EigenSolution:
    lam: float
    multiplicity: int
    case_tag: str
    n: int
    m: int


def _cos_pi(m: int, n: int) -> float:
    """cos(m pi / n), exactly zero at the midpoint."""
    return 0.0 if 2 * m == n else math.cos(m * math.pi / n)


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


# --- the operator on S -------------------------------------------------------------------

@dataclass(frozen=True)
class TetraOperator:
    S: Tetrahedron
    mode: str = RENORMALIZED

    def __post_init__(self):
        _check_mode(self.mode)
        if self.S.n < 1:
            raise ValueError("tetrahedron height must be at least 1")

    def weight(self, x: DLVertex) -> Fraction:
        k = self.S.level_of(x)
        if k is None:
            raise ValueError("vertex outside the tetrahedron")
        q, r = self.S.q, self.S.r
        if self.mode == TRUNCATED or 0 < k < self.S.n:
            return Fraction(1)
        return Fraction(q, q + r) if k == 0 else Fraction(r, q + r)


def boundary_parts(S: Tetrahedron):
    """(top boundary level n, bottom boundary level 0, interior vertices)."""
    if S.n < 1:
        raise ValueError("tetrahedron height must be at least 1")
    inner = [x for k in range(1, S.n) for x in S.level(k)]
    return S.level(S.n), S.level(0), inner


def boundary_ratio(n: int, q: int, r: int) -> Fraction:
    return Fraction(q**n + r**n, tetra_size(n, q, r))


def boundary_neighbourhood_size(n: int, N: int, q: int, r: int) -> int:
    """Vertices of S_n within distance N/2 of its boundary levels."""
    return sum(q**k * r ** (n - k) for k in range(n + 1) if 2 * min(k, n - k) <= N)


def _index(S: Tetrahedron, max_size: int):
    if len(S) > max_size:
        raise StateBudgetExceeded(f"tetrahedron has {len(S)} vertices, budget is {max_size}")
    verts = S.vertices()
    return verts, {x: c for c, x in enumerate(verts)}


def exact_transition_rows(op: TetraOperator, max_size: int = 5000):
    """Rows of the operator as {column: Fraction}, with the vertex ordering."""
    S = op.S
    q, r = S.q, S.r
    verts, index = _index(S, max_size)
    rows = []
    for x in verts:
        inside = [index[y] for y in dl_neighbors(x, q, r) if y in index]
        w = Fraction(1, q + r) if op.mode == TRUNCATED else Fraction(1, len(inside))
        rows.append({c: w for c in inside})
    return rows, verts


def is_reversible_exact(op: TetraOperator, max_size: int = 5000) -> bool:
    """m(x) p(x, y) == m(y) p(y, x) in rationals for every pair."""
    rows, verts = exact_transition_rows(op, max_size)
    m = [op.weight(x) for x in verts]
    return all(m[a] * p == m[b] * rows[b].get(a, 0) for a, row in enumerate(rows) for b, p in row.items())


def sparse_operator_matrix(op: TetraOperator, max_size: int = 400_000):
    """Symmetric sparse matrix of the operator in the weighted basis, and the vertex order."""
    S = op.S
    q, r = S.q, S.r
    verts, index = _index(S, max_size)
    n = S.n
    sw = {0: math.sqrt(q / (q + r)), n: math.sqrt(r / (q + r))} if op.mode == RENORMALIZED else {}
    level_w = [sw.get(k, 1.0) for k in range(n + 1)]
    lv = np.empty(len(verts), dtype=np.int64)
    base = 0
    for k in range(n + 1):
        size = q**k * r ** (n - k)
        lv[base:base + size] = k
        base += size
    rows, cols, data = [], [], []
    c = 1.0 / (q + r)
    for a, x in enumerate(verts):
        for y in dl_neighbors(x, q, r):
            b = index.get(y)
            if b is not None:
                rows.append(a)
                cols.append(b)
                data.append(c / (level_w[lv[a]] * level_w[lv[b]]))
    A = sp.csr_matrix((data, (rows, cols)), shape=(len(verts), len(verts)))
    return A, verts


def dense_operator_matrix(op: TetraOperator, max_size: int = 5000) -> tuple[np.ndarray, list]:
    """Dense symmetric matrix D^(1/2) P D^(-1/2) (D = weights), and the vertex order."""
    A, verts = sparse_operator_matrix(op, max_size)
    return A.toarray(), verts


def dense_spectrum(n: int, q: int, r: int, mode: str = RENORMALIZED, max_size: int = 5000) -> np.ndarray:
    A, _ = dense_operator_matrix(TetraOperator(standard_tetrahedron(n, q, r), mode), max_size)
    return np.sort(np.linalg.eigvalsh(A))


def trace_moments(n: int, q: int, r: int, N_max: int, mode: str = RENORMALIZED,
                  max_size: int = 400_000) -> list[float]:
    """Moments tr(A^N)/|S| for N = 0..N_max from sparse matrix powers."""
    A, verts = sparse_operator_matrix(TetraOperator(standard_tetrahedron(n, q, r), mode), max_size)
    size = len(verts)
    powers = [sp.identity(size, format="csr")]
    for _ in range(N_max // 2 + 1):
        powers.append((powers[-1] @ A).tocsr())
    out = []
    for N in range(N_max + 1):
        h = N // 2
        # A is symmetric: tr(A^(2h)) = |A^h|_F^2 and tr(A^(2h+1)) = <A^h, A^(h+1)>
        other = powers[h] if N % 2 == 0 else powers[h + 1]
        out.append(float(powers[h].multiply(other).sum()) / size)
    return out


# --- tridiagonal family matrices -------------------------------------------------------------

def family_matrix(kind: str, N: int, q: int, r: int, mode: str = RENORMALIZED) -> np.ndarray:
    """Action of the operator on the level functions of one family; row k holds the
    coefficients of the image of the k-th level function.

    ``kind`` is ``"horizontal"`` (size N-1), ``"constant"`` (size N+1),
    ``"lower"`` or ``"upper"`` (size N).
    """
    _check_mode(mode)
    size = {"horizontal": N - 1, "constant": N + 1, "lower": N, "upper": N}[kind]
    M = np.zeros((size, size))
    for k in range(size - 1):
        M[k, k + 1] = M[k + 1, k] = 1.0
    if mode == RENORMALIZED and size >= 2:
        if kind in ("constant", "lower"):
            M[1, 0] = (q + r) / q
        if kind in ("constant", "upper"):
            M[size - 2, size - 1] = (q + r) / r
    return spectral_radius(q, r) / 2 * M


def _bisect(f, a: float, b: float, tol: float = 1e-14, trace=None) -> float:
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise RootBracketError(f"no sign change on [{a!r}, {b!r}]: f={fa!r}, {fb!r}; trace={trace}")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0 or b - a <= tol:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def _polish(f, df, x: float, a: float, b: float) -> float:
    """One Newton step, kept only if it stays in the bracket and improves |f|."""
    d = df(x)
    if d == 0 or not math.isfinite(d):
        return x
    y = x - f(x) / d
    return y if a < y < b and abs(f(y)) <= abs(f(x)) else x


def trig_roots(N: int, kappa: float) -> list[float]:
    """Roots in (0, pi) of cot(N a) = kappa cot(a), increasing.

    Works with H(a) = cos(N a) sin(a) - kappa cos(a) sin(N a), which alternates
    in sign at the poles j pi / N; the two outer subintervals hold a root only
    when 1 - kappa N > 0.
    """
    if N == 1:
        return [math.pi / 2]

    def H(a):
        return math.cos(N * a) * math.sin(a) - kappa * math.cos(a) * math.sin(N * a)

    def dH(a):
        return (-N * math.sin(N * a) * math.sin(a) + math.cos(N * a) * math.cos(a)
                + kappa * math.sin(a) * math.sin(N * a) - kappa * N * math.cos(a) * math.cos(N * a))

    roots = []
    ends = 1 - kappa * N > 0
    for j in range(N):
        a, b = j * math.pi / N, (j + 1) * math.pi / N
        if j in (0, N - 1) and not ends:
            continue
        lo, hi = a, b
        if j == 0 or j == N - 1:
            # keep the bracket off the zeros of H at 0 and pi
            lo, hi = _outer_bracket(H, a, b, j == 0)
        x = _bisect(H, lo, hi, trace=("trig", N, kappa, j))
        roots.append(_polish(H, dH, x, lo, hi))
    return roots


def _outer_bracket(H, a: float, b: float, left: bool) -> tuple[float, float]:
    # H vanishes at 0 and pi; step towards the endpoint until the sign there shows
    span = b - a
    for e in range(1, 60):
        eps = span * 2.0**-e
        if left:
            lo, hi = eps, b
        else:
            lo, hi = a, math.pi - eps
        if (H(lo) > 0) != (H(hi) > 0):
            return lo, hi
    raise RootBracketError(f"outer bracket failed on [{a!r}, {b!r}]")


def cosh_root(N: int, kappa: float) -> float:
    """The positive root of coth(N a) = kappa coth(a), present when kappa N > 1.

    Solved as 2 N a = log(R(a)) with R(a) - 1 = 2 expm1(2a) / ((1 + kappa) - (1 - kappa) e^{2a}).
    The root approaches the pole of R like e^{-2 N a}, so the search runs over
    the distance d to that pole, where the denominator is (1 - kappa) e^{2a} expm1(2d).
    """
    if not kappa * N > 1:
        raise ValueError("a positive root exists only when kappa * N > 1")
    top = 0.5 * math.log((1 + kappa) / (1 - kappa))

    def G(d):
        a = top - d
        den = (1 - kappa) * math.exp(2 * a) * math.expm1(2 * d)
        return 2 * N * a - math.log1p(2 * math.expm1(2 * a) / den)

    def dG(d):
        e = math.exp(2 * (top - d))
        return -2 * N + (2 * (1 + kappa) * e / ((1 + kappa) * e - (1 - kappa))
                         + 2 * (1 - kappa) * e / ((1 + kappa) - (1 - kappa) * e))

    lo, hi = 1e-300, top * (1 - 1e-12)
    if G(lo) >= 0:
        # the root is closer to the pole than double precision resolves
        return top
    d = _bisect(G, lo, hi, trace=("cosh", N, kappa))
    return top - _polish(G, dG, d, lo, hi)


@dataclass(frozen=True)
class FamilyRoot:
    """One eigenvalue of a boundary family: rho * cos(angle) or +-rho * cosh(angle)."""

    kind: str  # "trig", "cosh", "linear"
    angle: float
    sign: int = 1

    def value(self, rho: float) -> float:
        if self.kind == "trig":
            return 0.0 if self.angle == math.pi / 2 else rho * math.cos(self.angle)
        if self.kind == "cosh":
            return self.sign * rho * math.cosh(self.angle)
        return self.sign * rho


def boundary_family_roots(N: int, near: int, far: int) -> list[FamilyRoot]:
    """Spectrum of the renormalised family matrix whose boundary row carries (near+far)/near.

    With kappa = (far - near)/(far + near), the roots come out in decreasing
    eigenvalue order.  ``near = q, far = r`` gives the lower families,
    ``near = r, far = q`` the upper ones.
    """
    if N < 1:
        raise ValueError("family height must be at least 1")
    kappa = (far - near) / (far + near)
    crit = (far - near) * N - (far + near)  # sign of kappa N - 1, exactly
    inner = trig_roots(N, kappa)
    if crit < 0:
        return [FamilyRoot("trig", a) for a in inner]
    if crit == 0:
        extra_hi, extra_lo = FamilyRoot("linear", 0.0, 1), FamilyRoot("linear", 0.0, -1)
    else:
        a0 = cosh_root(N, kappa)
        extra_hi, extra_lo = FamilyRoot("cosh", a0, 1), FamilyRoot("cosh", a0, -1)
    return [extra_hi] + [FamilyRoot("trig", a) for a in inner] + [extra_lo]


def family_eigenvectors(kind: str, N: int, q: int, r: int) -> list[tuple[float, np.ndarray]]:
    """Closed-form (eigenvalue, left eigenvector) pairs of ``family_matrix(kind, N, q, r)``."""
    rho = spectral_radius(q, r)
    out = []
    if kind == "horizontal":
        k = np.arange(1, N)
        for m in range(1, N):
            out.append((rho * _cos_pi(m, N), np.sin(k * m * math.pi / N)))
        return out
    if kind == "constant":
        k = np.arange(N + 1)
        t = math.sqrt(q / r)
        out.append((1.0, t**k))
        out.append((-1.0, (-t) ** k))
        for m in range(1, N):
            th = m * math.pi / N
            beta = math.atan2((q + r) * math.sin(th), (q - r) * math.cos(th))
            out.append((rho * math.cos(th), np.sin(k * th + beta)))
        return out
    near, far = (q, r) if kind == "lower" else (r, q)
    # positions counted from the end that carries the modified entry
    j = np.arange(N) if kind == "lower" else N - np.arange(1, N + 1)
    for root in boundary_family_roots(N, near, far):
        lam = root.value(rho)
        if root.kind == "trig":
            vec = np.sin((N - j) * root.angle)
        elif root.kind == "cosh":
            vec = np.sinh((N - j) * root.angle) * (1.0 if root.sign > 0 else (-1.0) ** j)
        else:
            vec = (1 - j / N) * (1.0 if root.sign > 0 else (-1.0) ** j)
        out.append((lam, vec))
    return out


# --- assembling the whole spectrum -------------------------------------------------------------

def free_subtetra_count(n: int, N: int, q: int, r: int) -> int:
    """Sub-tetrahedra of height N inside one of height n."""
    return sum(q**a * r ** (n - N - a) for a in range(n - N + 1))


def horizontal_spectrum(n: int, q: int, r: int) -> list[EigenSolution]:
    if n < 2:
        raise ValueError("height must be at least 2")
    rho = spectral_radius(q, r)
    out = []
    for N in range(2, n + 1):
        mult = (q - 1) * (r - 1) * free_subtetra_count(n, N, q, r)
        for m in range(1, N):
            out.append(EigenSolution(rho * _cos_pi(m, N), mult, "horizontal", N, m))
    return out


def constant_case_spectrum(n: int, q: int, r: int, mode: str = RENORMALIZED) -> list[EigenSolution]:
    _check_mode(mode)
    rho = spectral_radius(q, r)
    if mode == TRUNCATED:
        return [EigenSolution(rho * _cos_pi(m, n + 2), 1, "constant", n, m) for m in range(1, n + 2)]
    out = [EigenSolution(1.0, 1, "constant", n, 0)]
    out += [EigenSolution(rho * _cos_pi(m, n), 1, "constant", n, m) for m in range(1, n)]
    out.append(EigenSolution(-1.0, 1, "constant", n, n))
    return out


def _family_spectrum(N: int, near: int, far: int, q: int, r: int, mode: str, tag: str,
                     mult: int, first_m: int) -> list[EigenSolution]:
    rho = spectral_radius(q, r)
    if mode == TRUNCATED:
        vals = [rho * _cos_pi(m, N + 1) for m in range(1, N + 1)]
    else:
        vals = [root.value(rho) for root in boundary_family_roots(N, near, far)]
    return [EigenSolution(v, mult, tag, N, first_m + c) for c, v in enumerate(vals)]


def lower_case_spectrum(N: int, q: int, r: int, mode: str = RENORMALIZED, count: int = 1) -> list[EigenSolution]:
    """One family of height N whose top vertex a1 is shared with S; multiplicity (r-1)*count."""
    _check_mode(mode)
    return _family_spectrum(N, q, r, q, r, mode, "lower", (r - 1) * count, 0)


def upper_case_spectrum(N: int, q: int, r: int, mode: str = RENORMALIZED, count: int = 1) -> list[EigenSolution]:
    """One family of height N whose vertex a2 is shared with S; multiplicity (q-1)*count."""
    _check_mode(mode)
    return _family_spectrum(N, r, q, q, r, mode, "upper", (q - 1) * count, 1)


def full_closed_form_spectrum(n: int, q: int, r: int, mode: str = RENORMALIZED) -> list[EigenSolution]:
    """Every eigenvalue of the operator on a tetrahedron of height n, with multiplicities."""
    _check_mode(mode)
    if n < 2:
        raise ValueError("height must be at least 2")
    out = horizontal_spectrum(n, q, r)
    out += constant_case_spectrum(n, q, r, mode)
    for N in range(1, n + 1):
        out += lower_case_spectrum(N, q, r, mode, r ** (n - N))
        out += upper_case_spectrum(N, q, r, mode, q ** (n - N))
    return out


def total_multiplicity(eigs: list[EigenSolution]) -> int:
    return sum(e.multiplicity for e in eigs)


def expand(eigs: list[EigenSolution]) -> np.ndarray:
    """Sorted eigenvalues, each repeated by its multiplicity."""
    vals = np.array([e.lam for e in eigs])
    mult = np.array([e.multiplicity for e in eigs])
    return np.sort(np.repeat(vals, mult))


def compare_with_dense(eigs: list[EigenSolution], dense: np.ndarray, tol: float = 1e-9) -> tuple[float, bool]:
    """Largest gap between sorted multisets, and whether every closed-form cluster
    has exactly its multiplicity of dense eigenvalues within ``tol``."""
    closed = expand(eigs)
    if len(closed) != len(dense):
        return math.inf, False
    diff = float(np.max(np.abs(closed - dense))) if len(closed) else 0.0
    ok = True
    uniq = []
    for v in closed:
        if uniq and abs(v - uniq[-1][0]) <= tol:
            uniq[-1][1] += 1
        else:
            uniq.append([v, 1])
    for v, c in uniq:
        if int(np.sum(np.abs(dense - v) <= tol)) != c:
            ok = False
    return diff, ok


# --- cumulative measures ------------------------------------------------------------------------

@dataclass
class CumulativeMeasure:
    values: np.ndarray
    weights: np.ndarray
    tail_bound: float = 0.0

    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    def moment(self, N: int) -> float:
        return math.fsum((self.weights * self.values**N).tolist())


def cumulative_measure(n: int, q: int, r: int, mode: str = RENORMALIZED) -> CumulativeMeasure:
    """Normalised eigenvalue counting measure of the operator on S_n."""
    eigs = full_closed_form_spectrum(n, q, r, mode)
    size = tetra_size(n, q, r)
    vals = np.array([e.lam for e in eigs])
    w = np.array([e.multiplicity for e in eigs], dtype=float) / size
    return CumulativeMeasure(vals, w)


def limit_cumulative_measure(q: int, r: int, N_max: int) -> CumulativeMeasure:
    """Weak limit of the renormalised counting measures for r > q, truncated at height N_max.

    Horizontal families of height N carry (q-1)(r-1) r^-N per eigenvalue; lower
    families of height N >= 1 carry (r-q)(r-1) r^(-N-1) per eigenvalue.  The
    height-1 lower family contributes the atom at 0.
    """
    if not r > q:
        raise ValueError("the limit is described here for r > q")
    if N_max < 2:
        raise ValueError("N_max must be at least 2")
    rho = spectral_radius(q, r)
    vals, w = [], []
    for N in range(1, N_max + 1):
        if N >= 2:
            for m in range(1, N):
                vals.append(rho * _cos_pi(m, N))
                w.append((q - 1) * (r - 1) / r**N)
        for root in boundary_family_roots(N, q, r):
            vals.append(root.value(rho))
            w.append((r - q) * (r - 1) / r ** (N + 1))
    # omitted heights: at most ((q-1)(r-1) + (r-q)(r-1)/r) * N r^-N each
    x = 1.0 / r
    c = (q - 1) * (r - 1) + (r - q) * (r - 1) / r
    tail = c * x ** (N_max + 1) * ((N_max + 1) - N_max * x) / (1 - x) ** 2
    return CumulativeMeasure(np.array(vals), np.array(w), tail)


def outer_atom(N: int, q: int, r: int) -> float | None:
    """rho * cosh of the positive root for a lower family of height N, if present."""
    roots = boundary_family_roots(N, q, r)
    if roots[0].kind == "cosh":
        return roots[0].value(spectral_radius(q, r))
    return None


# --- Folner / expanding diagnostics ----------------------------------------------------------

def truncated_m2_gap_exact(n: int, q: int, r: int) -> Fraction:
    """M_2(mu) - M_2 of the truncated counting measure on S_n, in rationals."""
    return Fraction(r ** (n + 1) + q ** (n + 1), (q + r) ** 2 * tetra_size(n, q, r))


def folner_classify(q: int, r: int, n_values=range(1, 11)) -> tuple[str, list[tuple[int, Fraction]]]:
    ratios = [(n, boundary_ratio(n, q, r)) for n in n_values]
    return ("folner" if q == r else "expanding"), ratios
