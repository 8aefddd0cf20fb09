"""Combinatorial model of the trees T_b, the Diestel-Leader graphs DL(q, r),
their tetrahedra, and the lamplighter encoding of DL(q, q).

A tree vertex is stored in absolute horocyclic coordinates: its horocycle
index ``hor`` and the labels of the edges on its geodesic ray towards the
reference end.  The edge between a vertex at horocycle ``k`` and its
predecessor carries the label stored at position ``k``; zero labels are
never stored, so equality is structural.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Mapping
from dataclasses import dataclass

Labels = tuple[tuple[int, int], ...]


@dataclass(frozen=True, slots=True)
class TreeVertex:
    labels: Labels
    hor: int

    def __post_init__(self):
        prev = None
        for pos, lab in self.labels:
            if lab <= 0 or pos > self.hor or (prev is not None and pos <= prev):
                raise ValueError(f"non-canonical tree vertex {self.labels!r} at hor={self.hor}")
            prev = pos

    @classmethod
    def from_dict(cls, labels: Mapping[int, int], hor: int) -> "TreeVertex":
        return cls(tuple(sorted((p, s) for p, s in labels.items() if s != 0)), hor)

    def label_at(self, pos: int) -> int:
        for p, s in self.labels:
            if p == pos:
                return s
        return 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.labels)

    def key(self) -> tuple:
        return (self.hor, self.labels)


ROOT = TreeVertex((), 0)


def successor(v: TreeVertex, s: int) -> TreeVertex:
    """Child of ``v`` along the edge labelled ``s``."""
    if s == 0:
        return TreeVertex(v.labels, v.hor + 1)
    return TreeVertex(v.labels + ((v.hor + 1, s),), v.hor + 1)


def predecessor(v: TreeVertex) -> TreeVertex:
    labels = v.labels
    if labels and labels[-1][0] == v.hor:
        labels = labels[:-1]
    return TreeVertex(labels, v.hor - 1)


def ancestor(v: TreeVertex, hor: int) -> TreeVertex:
    """The vertex at horocycle ``hor`` on the ray from ``v`` to the end."""
    if hor > v.hor:
        raise ValueError("ancestor must lie on a lower horocycle index")
    return TreeVertex(tuple(e for e in v.labels if e[0] <= hor), hor)


def tree_neighbors(v: TreeVertex, b: int) -> list[TreeVertex]:
    """Predecessor first, then the ``b`` successors in label order."""
    return [predecessor(v)] + [successor(v, s) for s in range(b)]


def is_below(x: TreeVertex, a: TreeVertex) -> bool:
    """True when ``a`` lies on the ray from ``x`` to the end (``a`` ≼ ``x``)."""
    return a.hor <= x.hor and ancestor(x, a.hor) == a


def confluent(v: TreeVertex, z: TreeVertex) -> TreeVertex:
    """Meeting point of the rays from ``v`` and ``z`` towards the end."""
    top = min(v.hor, z.hor)
    dv = {p: s for p, s in v.labels if p <= top}
    dz = {p: s for p, s in z.labels if p <= top}
    diff = [p for p in dv.keys() | dz.keys() if dv.get(p, 0) != dz.get(p, 0)]
    h = min(top, min(diff) - 1) if diff else top
    return ancestor(v, h)


def tree_distance(v: TreeVertex, z: TreeVertex) -> int:
    c = confluent(v, z)
    return (v.hor - c.hor) + (z.hor - c.hor)


def descendants(a: TreeVertex, depth: int, b: int) -> Iterator[TreeVertex]:
    """All vertices ``depth`` levels below ``a``, in lexicographic label order."""
    if depth < 0:
        return
    base = a.hor
    for word in itertools.product(range(b), repeat=depth):
        extra = tuple((base + i + 1, s) for i, s in enumerate(word) if s != 0)
        yield TreeVertex(a.labels + extra, base + depth)


def branch_label(x: TreeVertex, a: TreeVertex) -> int:
    """Label of the first edge below ``a`` on the way down to ``x``."""
    return x.label_at(a.hor + 1)


@dataclass(frozen=True, slots=True)
class DLVertex:
    x1: TreeVertex
    x2: TreeVertex

    def __post_init__(self):
        if self.x1.hor + self.x2.hor != 0:
            raise ValueError("horocycle indices of a DL vertex must sum to zero")

    @property
    def hor(self) -> int:
        return self.x1.hor

    def key(self) -> tuple:
        return (self.x1.key(), self.x2.key())


ORIGIN = DLVertex(ROOT, ROOT)


def down_move(x: DLVertex, s: int) -> DLVertex:
    """x1 to its successor ``s``, x2 to its predecessor."""
    return DLVertex(successor(x.x1, s), predecessor(x.x2))


def up_move(x: DLVertex, t: int) -> DLVertex:
    """x1 to its predecessor, x2 to its successor ``t``."""
    return DLVertex(predecessor(x.x1), successor(x.x2, t))


def dl_neighbors(x: DLVertex, q: int, r: int) -> list[DLVertex]:
    """The ``q`` down-moves followed by the ``r`` up-moves."""
    return [down_move(x, s) for s in range(q)] + [up_move(x, t) for t in range(r)]


def walk(word, start: DLVertex = ORIGIN) -> DLVertex:
    """Follow a word of moves such as ``[("d", 1), ("u", 0)]``."""
    x = start
    for kind, lab in word:
        x = down_move(x, lab) if kind == "d" else up_move(x, lab)
    return x


def parse_word(text: str) -> list[tuple[str, int]]:
    """Parse ``"d1,u0,d0"`` into a move word; the empty string is the origin."""
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if tok[0] not in "du" or not tok[1:].isdigit():
            raise ValueError(f"bad move {tok!r}; expected d<label> or u<label>")
        out.append((tok[0], int(tok[1:])))
    return out


@dataclass(frozen=True, slots=True)
class RelativePosition:
    up1: int
    dn1: int
    up2: int
    dn2: int
    c1: TreeVertex
    c2: TreeVertex

    @property
    def nn(self) -> int:
        return self.up1 + self.up2

    @property
    def d1(self) -> int:
        return self.up1 + self.dn1

    @property
    def d2(self) -> int:
        return self.up2 + self.dn2


def relative_position(x: DLVertex) -> RelativePosition:
    c1 = confluent(x.x1, ROOT)
    c2 = confluent(x.x2, ROOT)
    return RelativePosition(
        up1=-c1.hor, dn1=x.x1.hor - c1.hor,
        up2=-c2.hor, dn2=x.x2.hor - c2.hor,
        c1=c1, c2=c2,
    )


def level_size(n: int, k: int, q: int, r: int) -> int:
    return q**k * r ** (n - k)


def tetra_size(n: int, q: int, r: int) -> int:
    return sum(level_size(n, k, q, r) for k in range(n + 1))


@dataclass(frozen=True, slots=True)
class Tetrahedron:
    """The tetrahedron S(a1, a2) of height ``n`` inside DL(q, r)."""

    a1: TreeVertex
    a2: TreeVertex
    q: int
    r: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("tetrahedron needs -hor(a2) >= hor(a1)")

    @property
    def n(self) -> int:
        return -self.a2.hor - self.a1.hor

    def level(self, k: int) -> list[DLVertex]:
        return tetra_level(self, k)

    def vertices(self) -> list[DLVertex]:
        return [x for k in range(self.n + 1) for x in tetra_level(self, k)]

    def level_of(self, x: DLVertex) -> int | None:
        k = x.x1.hor - self.a1.hor
        if 0 <= k <= self.n and is_below(x.x1, self.a1) and is_below(x.x2, self.a2):
            return k
        return None

    def __contains__(self, x: DLVertex) -> bool:
        return self.level_of(x) is not None

    def __len__(self) -> int:
        return tetra_size(self.n, self.q, self.r)

    def key(self) -> tuple:
        return (self.n, self.a1.key(), self.a2.key())


def standard_tetrahedron(n: int, q: int, r: int) -> Tetrahedron:
    """S_n containing the origin at level n // 2; increasing in n, exhausting DL."""
    k1 = n // 2
    return Tetrahedron(ancestor(ROOT, -k1), ancestor(ROOT, -(n - k1)), q, r)


def tetra_level(S: Tetrahedron, k: int) -> list[DLVertex]:
    if not 0 <= k <= S.n:
        raise ValueError(f"level {k} outside 0..{S.n}")
    tops = list(descendants(S.a1, k, S.q))
    bottoms = list(descendants(S.a2, S.n - k, S.r))
    return [DLVertex(x1, x2) for x1 in tops for x2 in bottoms]


def sub_tetrahedra(S: Tetrahedron, min_height: int = 2) -> Iterator[Tetrahedron]:
    """Every tetrahedron inside ``S`` with height >= ``min_height``.

    Ordered by (height, a1, a2) so enumerations are reproducible.
    """
    found = []
    for kappa in range(S.n - min_height + 1):
        for nu in range(S.n - min_height - kappa + 1):
            for b1 in descendants(S.a1, kappa, S.q):
                for b2 in descendants(S.a2, nu, S.r):
                    found.append(Tetrahedron(b1, b2, S.q, S.r))
    found.sort(key=Tetrahedron.key)
    return iter(found)


def sub_tetrahedra_count_through_level(n: int, k: int, q: int, r: int) -> int:
    """Number of sub-tetrahedra whose interior levels meet level ``k`` of S."""
    return sum(q**a for a in range(k)) * sum(r**b for b in range(n - k))


# --- lamplighter group Z_q wr Z ------------------------------------------------

def _config(eta: Mapping[int, int], q: int) -> dict[int, int]:
    return {p: v % q for p, v in eta.items() if v % q}


def lamplighter_encode(eta: Mapping[int, int], k: int, q: int, r: int | None = None) -> DLVertex:
    """Map the group element (eta, k) of Z_q wr Z to its vertex of DL(q, q).

    Lamps at positions <= k become labels of x1 at the same positions; lamps
    at positions p >= k + 1 become labels of x2 at position 1 - p.
    """
    if r is not None and r != q:
        raise ValueError("the lamplighter identification needs q == r")
    eta = _config(eta, q)
    x1 = TreeVertex.from_dict({p: v for p, v in eta.items() if p <= k}, k)
    x2 = TreeVertex.from_dict({1 - p: v for p, v in eta.items() if p > k}, -k)
    return DLVertex(x1, x2)


def lamplighter_decode(x: DLVertex, q: int, r: int | None = None) -> tuple[dict[int, int], int]:
    if r is not None and r != q:
        raise ValueError("the lamplighter identification needs q == r")
    eta = dict(x.x1.labels)
    eta.update({1 - p: v for p, v in x.x2.labels})
    return eta, x.x1.hor


def lamplighter_multiply(g, h, q: int):
    """Group law (eta, k)(eta', k') = (eta + T_k eta', k + k')."""
    (eta, k), (eta2, k2) = g, h
    out = dict(eta)
    for p, v in eta2.items():
        out[p + k] = out.get(p + k, 0) + v
    return _config(out, q), k + k2


def lamplighter_generators(q: int):
    """The symmetric generating set {(delta_1^l, 1), (delta_0^l, -1)}."""
    return [({1: l} if l else {}, 1) for l in range(q)] + [({0: l} if l else {}, -1) for l in range(q)]


# --- graph distance --------------------------------------------------------------

def graph_distance(x: DLVertex, y: DLVertex, q: int, r: int, max_radius: int) -> int | None:
    """Breadth-first distance in DL(q, r); ``None`` when it exceeds ``max_radius``.

    Searches from both ends, always expanding the smaller frontier.
    """
    if x == y:
        return 0
    seen = [{x: 0}, {y: 0}]
    frontier = [[x], [y]]
    radius = [0, 0]
    while radius[0] + radius[1] < max_radius:
        side = 0 if len(frontier[0]) <= len(frontier[1]) else 1
        other = seen[1 - side]
        nxt = []
        radius[side] += 1
        for v in frontier[side]:
            for w in dl_neighbors(v, q, r):
                if w in seen[side]:
                    continue
                if w in other:
                    return radius[side] + other[w]
                seen[side][w] = radius[side]
                nxt.append(w)
        frontier[side] = nxt
        if not nxt:
            break
    return None
