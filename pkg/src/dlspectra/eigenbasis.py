"""Finitely supported eigenfunctions of the simple random walk operator on DL(q, r).

Every function built here lives on a single tetrahedron and factors over the
two trees.  Exact mode keeps a function as ``sqrt(scale_sq) * values`` with a
rational ``scale_sq`` shared by the whole support and rational ``values``;
the transition operator has rational entries, so it acts exactly on that form.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.sparse as sp

from dlspectra.dl_graph import (
    ORIGIN, DLVertex, Tetrahedron, TreeVertex, ancestor, branch_label, descendants,
    dl_neighbors, sub_tetrahedra,
)


# --- orthonormal contrasts on Z_b --------------------------------------------------

@dataclass(frozen=True)
class PhiVector:
    """Unit vector on Z_b with zero sum: ``values[s] = numerators[s] / sqrt(denom_sq)``."""

    i: int
    b: int
    numerators: tuple[int, ...]
    denom_sq: int

    @property
    def values(self) -> tuple[float, ...]:
        d = math.sqrt(self.denom_sq)
        return tuple(c / d for c in self.numerators)

    def __getitem__(self, s: int) -> float:
        return self.numerators[s] / math.sqrt(self.denom_sq)


def phi(i: int, b: int) -> PhiVector:
    if not 1 <= i <= b - 1:
        raise ValueError(f"phi index must lie in 1..{b - 1}, got {i}")
    nums = [0] * b
    nums[i - 1] = b - i
    for s in range(i, b):
        nums[s] = -1
    return PhiVector(i, b, tuple(nums), (b - i) * (b + 1 - i))


# --- sparse functions -------------------------------------------------------------

class SparseFunction:
    """Finitely supported function on DL; zero entries are never stored.

    With ``scale_sq`` set the function is exact: its value at ``x`` is
    ``sqrt(scale_sq) * values[x]`` with rational ``values``.
    """

    __slots__ = ("values", "scale_sq")

    def __init__(self, values=None, scale_sq: Fraction | None = None):
        self.values = {x: v for x, v in (values or {}).items() if v != 0}
        self.scale_sq = None if scale_sq is None else Fraction(scale_sq)

    @property
    def exact(self) -> bool:
        return self.scale_sq is not None

    @property
    def support(self):
        return self.values.keys()

    def __len__(self):
        return len(self.values)

    def __call__(self, x: DLVertex) -> float:
        v = self.values.get(x, 0)
        return float(v) * math.sqrt(self.scale_sq) if self.exact else float(v)

    def to_float(self) -> "SparseFunction":
        if not self.exact:
            return self
        c = math.sqrt(self.scale_sq)
        return SparseFunction({x: float(v) * c for x, v in self.values.items()})

    def norm_sq(self):
        """Squared l2 norm; a Fraction in exact mode."""
        if self.exact:
            return self.scale_sq * sum(Fraction(v) ** 2 for v in self.values.values())
        return math.fsum(v * v for v in self.values.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def inner(self, other: "SparseFunction") -> float:
        a, b = self.to_float(), other.to_float()
        if len(b) < len(a):
            a, b = b, a
        return math.fsum(v * b.values.get(x, 0.0) for x, v in a.values.items())

    def __add__(self, other: "SparseFunction") -> "SparseFunction":
        out = dict(self.to_float().values)
        for x, v in other.to_float().values.items():
            out[x] = out.get(x, 0.0) + v
        return SparseFunction(out)

    def __mul__(self, c: float) -> "SparseFunction":
        if self.exact and isinstance(c, Rational):
            return SparseFunction({x: v * c for x, v in self.values.items()}, self.scale_sq)
        return SparseFunction({x: v * c for x, v in self.to_float().values.items()})

    __rmul__ = __mul__

    def __sub__(self, other: "SparseFunction") -> "SparseFunction":
        return self + other * -1.0

    def max_abs(self) -> float:
        return max((abs(self(x)) for x in self.values), default=0.0)


def apply_P(f: SparseFunction, q: int, r: int) -> SparseFunction:
    """Apply the simple random walk operator; exact inputs stay exact."""
    out = defaultdict(int)
    w = Fraction(1, q + r) if f.exact else 1.0 / (q + r)
    for x, v in f.values.items():
        c = v * w
        for y in dl_neighbors(x, q, r):
            out[y] += c
    return SparseFunction(out, f.scale_sq)


def horizontal_defect(f: SparseFunction) -> float:
    """Largest absolute horizontal sum; exactly 0 for a horizontal exact function.

    The first sum fixes x1 and runs over the matching horocycle of the second
    tree, the second fixes x2.
    """
    by1, by2 = defaultdict(int), defaultdict(int)
    for x, v in f.values.items():
        by1[x.x1] += v
        by2[x.x2] += v
    worst = max((abs(s) for s in (*by1.values(), *by2.values())), default=0)
    return float(worst) * (math.sqrt(f.scale_sq) if f.exact else 1.0)


def is_horizontal(f: SparseFunction, tol: float = 1e-12) -> bool:
    d = horizontal_defect(f)
    return d == 0 if f.exact else d <= tol


# --- level functions on a tetrahedron --------------------------------------------

def _tree_coeff(x: TreeVertex, a: TreeVertex, depth: int, idx: int, b: int) -> int:
    if idx == 0:
        return 1
    if depth == 0:
        return 0
    return phi(idx, b).numerators[branch_label(x, a)]


def _tree_scale(depth: int, idx: int, b: int) -> Fraction:
    if idx == 0:
        return Fraction(1, b**depth)
    if depth == 0:
        return Fraction(1)
    return Fraction(b, phi(idx, b).denom_sq * b**depth)


def _check_indices(S: Tetrahedron, k: int, i: int, j: int):
    if not 0 <= k <= S.n:
        raise ValueError(f"level {k} outside 0..{S.n}")
    if not 0 <= i <= S.q - 1 or not 0 <= j <= S.r - 1:
        raise ValueError(f"indices (i, j) = ({i}, {j}) out of range for q={S.q}, r={S.r}")


def f_scale_sq(S: Tetrahedron, k: int, i: int, j: int) -> Fraction:
    """Common squared amplitude of a level function; its values are integers times the root."""
    _check_indices(S, k, i, j)
    return _tree_scale(k, i, S.q) * _tree_scale(S.n - k, j, S.r)


def f_value(S: Tetrahedron, k: int, i: int, j: int, x: DLVertex) -> float:
    """Point evaluation of the level-``k`` function with contrast indices (i, j)."""
    _check_indices(S, k, i, j)
    if S.level_of(x) != k:
        return 0.0
    c1 = _tree_coeff(x.x1, S.a1, k, i, S.q)
    c2 = _tree_coeff(x.x2, S.a2, S.n - k, j, S.r)
    return c1 * c2 * math.sqrt(f_scale_sq(S, k, i, j))


def f_function(S: Tetrahedron, k: int, i: int, j: int, exact: bool = False) -> SparseFunction:
    """Product of a contrast below ``a1`` at depth ``k`` and one below ``a2`` at depth ``n-k``.

    Index 0 stands for the normalised constant on that tree level.
    """
    _check_indices(S, k, i, j)
    n = S.n
    if (i and k == 0) or (j and k == n):
        return SparseFunction({}, Fraction(1) if exact else None)
    tops = [(x1, _tree_coeff(x1, S.a1, k, i, S.q)) for x1 in descendants(S.a1, k, S.q)]
    bots = [(x2, _tree_coeff(x2, S.a2, n - k, j, S.r)) for x2 in descendants(S.a2, n - k, S.r)]
    vals = {DLVertex(x1, x2): c1 * c2 for x1, c1 in tops if c1 for x2, c2 in bots if c2}
    f = SparseFunction(vals, f_scale_sq(S, k, i, j))
    return f if exact else f.to_float()


# --- eigenfunctions ---------------------------------------------------------------

def spectral_radius(q: int, r: int) -> float:
    return 2.0 * math.sqrt(q * r) / (q + r)


def eigenvalue(m: int, n: int, q: int, r: int) -> float:
    if n < 2 or not 1 <= m <= n - 1:
        raise ValueError(f"need n >= 2 and 1 <= m <= n-1, got m={m}, n={n}")
    if 2 * m == n:
        return 0.0
    return spectral_radius(q, r) * math.cos(m * math.pi / n)


def psi(m: int, n: int, k: int) -> float:
    return math.sqrt(2.0 / n) * math.sin(k * m * math.pi / n)


@dataclass
class Eigenfunction:
    base: SparseFunction
    S: Tetrahedron
    i: int
    j: int
    m: int
    lam: float

    def __call__(self, x: DLVertex) -> float:
        return self.base(x)


def g_eigenfunction(S: Tetrahedron, m: int, i: int, j: int) -> Eigenfunction:
    n = S.n
    if n < 2 or not 1 <= m <= n - 1:
        raise ValueError(f"need height >= 2 and 1 <= m <= n-1, got m={m}, n={n}")
    if not 1 <= i <= S.q - 1 or not 1 <= j <= S.r - 1:
        raise ValueError(f"indices (i, j) = ({i}, {j}) out of range for q={S.q}, r={S.r}")
    vals = {}
    for k in range(1, n):
        w = psi(m, n, k)
        for x, v in f_function(S, k, i, j).values.items():
            vals[x] = w * v
    return Eigenfunction(SparseFunction(vals), S, i, j, m, eigenvalue(m, n, S.q, S.r))


def g_value(S: Tetrahedron, m: int, i: int, j: int, x: DLVertex) -> float:
    k = S.level_of(x)
    if k is None or not 0 < k < S.n:
        return 0.0
    return psi(m, S.n, k) * f_value(S, k, i, j, x)


def eigen_residual(g: Eigenfunction) -> float:
    """max |Pg - lambda g| over the support of g and its neighbours."""
    Pg = apply_P(g.base, g.S.q, g.S.r)
    keys = Pg.values.keys() | g.base.values.keys()
    return max(abs(Pg(x) - g.lam * g.base(x)) for x in keys)


def basis_for_tetrahedron(S: Tetrahedron) -> list[Eigenfunction]:
    """All eigenfunctions attached to sub-tetrahedra of height >= 2, in a fixed order."""
    if S.n < 2:
        raise ValueError("tetrahedron height must be at least 2")
    out = []
    for T in sub_tetrahedra(S, 2):
        for m in range(1, T.n):
            for i in range(1, S.q):
                for j in range(1, S.r):
                    out.append(g_eigenfunction(T, m, i, j))
    return out


def horizontal_dimension(n: int, k: int, q: int, r: int) -> int:
    return (q**k - 1) * (r ** (n - k) - 1)


def level_member_counts(S: Tetrahedron) -> dict[int, int]:
    """Level functions contributed to each level of ``S`` by all its sub-tetrahedra."""
    counts = {k: 0 for k in range(S.n + 1)}
    per = (S.q - 1) * (S.r - 1)
    for T in sub_tetrahedra(S, 2):
        off = T.a1.hor - S.a1.hor
        for kk in range(1, T.n):
            counts[off + kk] += per
    return counts


def basis_matrix(funcs, vertices) -> sp.csr_matrix:
    """Rows are functions, columns follow ``vertices``."""
    index = {x: c for c, x in enumerate(vertices)}
    rows, cols, data = [], [], []
    for r_, f in enumerate(funcs):
        base = f.base if isinstance(f, Eigenfunction) else f.to_float()
        for x, v in base.values.items():
            rows.append(r_)
            cols.append(index[x])
            data.append(v)
    return sp.csr_matrix((data, (rows, cols)), shape=(len(funcs), len(vertices)))


def gram_defect(funcs, vertices) -> float:
    """max |G - I| for the Gram matrix of ``funcs``."""
    B = basis_matrix(funcs, vertices)
    G = (B @ B.T).toarray()
    return float(np.max(np.abs(G - np.eye(G.shape[0])))) if G.size else 0.0


def level_rank(S: Tetrahedron, basis, k: int) -> int:
    """Rank of the basis restricted to level ``k`` of ``S``."""
    level = S.level(k)
    B = basis_matrix(basis, S.vertices())
    index = {x: c for c, x in enumerate(S.vertices())}
    cols = [index[x] for x in level]
    sub = B[:, cols].toarray()
    sub = sub[np.any(sub != 0, axis=1)]
    return int(np.linalg.matrix_rank(sub)) if sub.size else 0


# --- approximating the point mass at the origin --------------------------------------

def delta_approximation(n: int, q: int, r: int, exact: bool = True) -> SparseFunction:
    """Horizontal product function whose distance to the point mass at the origin is small.

    Each factor is 1 at the origin's tree vertex and spreads mass -1 uniformly
    over the horocycle-0 descendants of a vertex at depth ``n`` that branches off
    the origin's ray one level higher.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    o1, o2 = ORIGIN.x1, ORIGIN.x2
    b1 = TreeVertex.from_dict({-n: 1}, -n)
    f1 = [(o1, Fraction(1))] + [(y, Fraction(-1, q**n)) for y in descendants(b1, n, q)]
    f2 = [(o2, Fraction(1))] + [(y, Fraction(-1, r**n)) for y in descendants(b1, n, r)]
    f = SparseFunction({DLVertex(a, b): u * v for a, u in f1 for b, v in f2}, Fraction(1))
    return f if exact else f.to_float()


def delta_distance_sq(f: SparseFunction):
    diff = dict(f.values)
    diff[ORIGIN] = diff.get(ORIGIN, 0) - (1 if f.exact else 1.0)
    return SparseFunction(diff, f.scale_sq).norm_sq()


def parseval_partial(depth: int, q: int, r: int) -> float:
    """Sum of |g(o)|^2 over eigenfunctions whose tetrahedron holds the origin
    within ``depth`` levels of both of its top vertices."""
    total = 0.0
    for k1 in range(1, depth + 1):
        for k2 in range(1, depth + 1):
            T = Tetrahedron(ancestor(ORIGIN.x1, -k1), ancestor(ORIGIN.x2, -k2), q, r)
            for m in range(1, T.n):
                for i in range(1, q):
                    for j in range(1, r):
                        total += g_value(T, m, i, j, ORIGIN) ** 2
    return total
