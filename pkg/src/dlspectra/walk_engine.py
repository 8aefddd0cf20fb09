"""Exact and simulated walks on DL(q, r) for the drifted nearest-neighbour walk.

The walk tosses a coin: with probability ``alpha`` it makes one of the q down
moves uniformly, otherwise one of the r up moves.  The simple random walk is
``alpha = q / (q + r)``.  All exact computations run in rationals.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from dlspectra.dl_graph import (
    ORIGIN, ROOT, DLVertex, TreeVertex, down_move, graph_distance, predecessor, successor,
    tree_distance, up_move,
)


class StateBudgetExceeded(RuntimeError):
    """Raised when an exact computation would need more states than allowed."""


DEFAULT_MAX_STATES = 10_000_000


@dataclass(frozen=True)
class WalkParams:
    q: int
    r: int
    alpha: Fraction

    def __post_init__(self):
        if self.q < 2 or self.r < 2:
            raise ValueError("branching numbers must be at least 2")
        a = Fraction(self.alpha)
        if not 0 < a < 1:
            raise ValueError("alpha must lie strictly between 0 and 1")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def simple(cls, q: int, r: int) -> "WalkParams":
        return cls(q, r, Fraction(q, q + r))


def step_kernel(x: DLVertex, params: WalkParams) -> list[tuple[DLVertex, Fraction]]:
    a, q, r = params.alpha, params.q, params.r
    pd, pu = a / q, (1 - a) / r
    return [(down_move(x, s), pd) for s in range(q)] + [(up_move(x, t), pu) for t in range(r)]


def reversing_measure(x: DLVertex, params: WalkParams) -> Fraction:
    """Weight making the walk reversible: (alpha r / ((1 - alpha) q)) ** hor(x1)."""
    a = params.alpha
    return (a * params.r / ((1 - a) * params.q)) ** x.hor


def _push(dist: dict, params: WalkParams, keep=None) -> dict:
    a, q, r = params.alpha, params.q, params.r
    pd, pu = a / q, (1 - a) / r
    out = defaultdict(Fraction)
    for x, p in dist.items():
        x1, x2 = x.x1, x.x2
        x2m, x1m = predecessor(x2), predecessor(x1)
        wd, wu = p * pd, p * pu
        for s in range(q):
            y = DLVertex(successor(x1, s), x2m)
            if keep is None or keep(y):
                out[y] += wd
        for t in range(r):
            y = DLVertex(x1m, successor(x2, t))
            if keep is None or keep(y):
                out[y] += wu
    return dict(out)


def exact_distribution(N: int, params: WalkParams, start: DLVertex = ORIGIN,
                       target: DLVertex | None = None,
                       max_states: int = DEFAULT_MAX_STATES) -> dict[DLVertex, Fraction]:
    """Law of the walk after ``N`` steps from ``start``.

    With ``target`` given, states that can no longer reach it in the remaining
    steps are dropped; each step moves both tree coordinates by one edge, so
    the larger of the two tree distances is a valid lower bound.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    dist = {start: Fraction(1)}
    for t in range(N):
        left = N - t - 1
        keep = None
        if target is not None:
            t1, t2 = target.x1, target.x2
            keep = lambda y, left=left: max(tree_distance(y.x1, t1), tree_distance(y.x2, t2)) <= left
        dist = _push(dist, params, keep)
        if len(dist) > max_states:
            raise StateBudgetExceeded(
                f"{len(dist)} states after {t + 1} steps exceeds the budget of {max_states}")
    return dist


def exact_transition_prob(N: int, x: DLVertex, y: DLVertex, params: WalkParams,
                          max_states: int = DEFAULT_MAX_STATES) -> Fraction:
    return exact_distribution(N, params, x, y, max_states).get(y, Fraction(0))


def exact_return_prob(N: int, params: WalkParams, max_states: int = DEFAULT_MAX_STATES) -> Fraction:
    if N % 2:
        return Fraction(0)
    return exact_transition_prob(N, ORIGIN, ORIGIN, params, max_states)


def exact_return_prob_split(N: int, params: WalkParams, max_states: int = DEFAULT_MAX_STATES) -> Fraction:
    """Return probability through the midpoint: sum_y p^(h)(o, y)^2 / m(y) with N = 2h."""
    if N % 2:
        return Fraction(0)
    half = exact_distribution(N // 2, params, max_states=max_states)
    return sum((p * p / reversing_measure(y, params) for y, p in half.items()), Fraction(0))


def conjugation_factor_sq(params: WalkParams) -> Fraction:
    """Square of t_alpha = sqrt(4 alpha (1 - alpha)) / rho; rational for rational alpha."""
    a, q, r = params.alpha, params.q, params.r
    return a * (1 - a) * (q + r) ** 2 / (q * r)


def conjugation_factor(params: WalkParams) -> float:
    return math.sqrt(conjugation_factor_sq(params))


def conjugation_check(N: int, params: WalkParams, max_states: int = DEFAULT_MAX_STATES) -> tuple[Fraction, Fraction]:
    """Both sides of p_alpha^(2N)(o,o) = t_alpha^(2N) p^(2N)(o,o)."""
    lhs = exact_return_prob(2 * N, params, max_states)
    srw = exact_return_prob(2 * N, WalkParams.simple(params.q, params.r), max_states)
    return lhs, conjugation_factor_sq(params) ** N * srw


# --- projections ----------------------------------------------------------------------

def project_tree_dist(dist: dict, which: int) -> dict[TreeVertex, Fraction]:
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    out = defaultdict(Fraction)
    for x, p in dist.items():
        out[x.x1 if which == 1 else x.x2] += p
    return dict(out)


def project_z_dist(dist: dict) -> dict[int, Fraction]:
    out = defaultdict(Fraction)
    for x, p in dist.items():
        out[x.hor] += p
    return dict(out)


def tree_step(dist: dict, alpha: Fraction, b: int, toward_successors: Fraction | None = None) -> dict:
    """One step on T_b: total weight ``toward_successors`` split over the b successors,
    the rest to the predecessor.  Defaults to ``alpha``, the first-tree projection;
    the second-tree projection uses ``1 - alpha``."""
    down = Fraction(alpha) if toward_successors is None else Fraction(toward_successors)
    out = defaultdict(Fraction)
    for v, p in dist.items():
        out[predecessor(v)] += p * (1 - down)
        w = p * down / b
        for s in range(b):
            out[successor(v, s)] += w
    return dict(out)


def z_step(dist: dict, alpha: Fraction) -> dict:
    a = Fraction(alpha)
    out = defaultdict(Fraction)
    for k, p in dist.items():
        out[k + 1] += p * a
        out[k - 1] += p * (1 - a)
    return dict(out)


def tree_return_prob(N: int, alpha, q: int) -> Fraction:
    """Return probability of the walk on T_q that steps to each successor w.p. alpha/q."""
    if N % 2:
        return Fraction(0)
    dist = {ROOT: Fraction(1)}
    for t in range(N):
        left = N - t - 1
        dist = {v: p for v, p in tree_step(dist, alpha, q).items() if tree_distance(v, ROOT) <= left}
    return dist.get(ROOT, Fraction(0))


def z_return_prob(N: int, alpha) -> Fraction:
    if N % 2:
        return Fraction(0)
    dist = {0: Fraction(1)}
    for t in range(N):
        left = N - t - 1
        dist = {k: p for k, p in z_step(dist, alpha).items() if abs(k) <= left}
    return dist.get(0, Fraction(0))


def projection_density(lam: float, alpha: float, q: int | None = None) -> float:
    """Spectral density of the projected walk on T_q, or on Z when ``q`` is None."""
    s2 = 4 * alpha * (1 - alpha)
    if lam * lam >= s2:
        return 0.0
    if q is None:
        return 1.0 / (math.pi * math.sqrt(s2 - lam * lam))
    tau2 = s2 * (q + 1) ** 2 / (4 * q)
    return (q + 1) / (2 * math.pi) * math.sqrt(s2 - lam * lam) / (tau2 - lam * lam)


def projection_plancherel_moment(N: int, alpha, q: int | None = None, tol: float = 1e-12) -> float:
    """N-th moment of the projected walk's spectral density by adaptive quadrature.

    Substituting lambda = s sin(theta) with s = sqrt(4 alpha (1 - alpha))
    removes the square-root behaviour at both endpoints.
    """
    if N < 0:
        raise ValueError("moment order must be nonnegative")
    a = float(alpha)
    s = math.sqrt(4 * a * (1 - a))
    if q is None:
        f = lambda th: (s * math.sin(th)) ** N / math.pi
    else:
        tau2 = s * s * (q + 1) ** 2 / (4 * q)
        f = lambda th: ((s * math.sin(th)) ** N * (q + 1) / (2 * math.pi)
                        * (s * math.cos(th)) ** 2 / (tau2 - (s * math.sin(th)) ** 2))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, -math.pi / 2, math.pi / 2, epsabs=tol, epsrel=tol, limit=200)
        except integrate.IntegrationWarning as exc:
            raise ArithmeticError(f"quadrature did not reach tolerance {tol:.3g}: {exc}") from None
    if not err <= max(tol, tol * abs(val)):
        raise ArithmeticError(f"quadrature error estimate {err:.3g} above tolerance {tol:.3g}")
    return val


# --- simulation --------------------------------------------------------------------------

@dataclass
class EscapeStats:
    trials: int
    steps: int
    alpha: float
    metric: str
    mean_rate: float
    normalized_samples: np.ndarray
    mean_rate_hor: float
    mean_rate_tree_bound: float
    mean_rate_bfs: float | None


class _MutableTree:
    __slots__ = ("hor", "labels")

    def __init__(self):
        self.hor = 0
        self.labels = {}

    def down(self, s: int):
        self.hor += 1
        if s:
            self.labels[self.hor] = s

    def up(self):
        self.labels.pop(self.hor, None)
        self.hor -= 1

    def distance_to_root(self) -> int:
        top = min(self.hor, 0)
        low = min((p for p in self.labels if p <= top), default=None)
        c = top if low is None else low - 1
        return self.hor - 2 * c

    def freeze(self) -> TreeVertex:
        return TreeVertex.from_dict(self.labels, self.hor)


def simulate_escape(params: WalkParams, steps: int, trials: int, seed: int,
                    bfs_radius: int = 12) -> EscapeStats:
    """Monte Carlo estimate of d(Z_n, Z_0)/n.

    Graph distance is computed by breadth-first search when ``steps <= bfs_radius``.
    Otherwise the reported metric is the lower bound max(d(x1,o1), d(x2,o2)); the
    horocycle statistic |hor| is reported alongside.  Randomness comes from
    numpy's PCG64 generator seeded with ``seed``.
    """
    if steps < 1 or trials < 1:
        raise ValueError("steps and trials must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    a = float(params.alpha)
    q, r = params.q, params.r
    use_bfs = steps <= bfs_radius
    hor_d, tree_d, bfs_d = [], [], []
    for _ in range(trials):
        coins = rng.random(steps) < a
        down_labels = rng.integers(0, q, steps)
        up_labels = rng.integers(0, r, steps)
        t1, t2 = _MutableTree(), _MutableTree()
        for c, s, t in zip(coins.tolist(), down_labels.tolist(), up_labels.tolist()):
            if c:
                t1.down(s)
                t2.up()
            else:
                t1.up()
                t2.down(t)
        hor_d.append(abs(t1.hor))
        tree_d.append(max(t1.distance_to_root(), t2.distance_to_root()))
        if use_bfs:
            x = DLVertex(t1.freeze(), t2.freeze())
            bfs_d.append(graph_distance(ORIGIN, x, q, r, steps))
    metric = "bfs" if use_bfs else "tree_lower_bound"
    d = np.array(bfs_d if use_bfs else tree_d, dtype=float)
    if abs(a - 0.5) < 1e-15:
        norm = d / math.sqrt(steps)
    else:
        norm = (d - abs(2 * a - 1) * steps) / math.sqrt(4 * a * (1 - a) * steps)
    return EscapeStats(
        trials=trials, steps=steps, alpha=a, metric=metric,
        mean_rate=float(d.mean() / steps), normalized_samples=norm,
        mean_rate_hor=float(np.mean(hor_d) / steps),
        mean_rate_tree_bound=float(np.mean(tree_d) / steps),
        mean_rate_bfs=float(np.mean(bfs_d) / steps) if use_bfs else None,
    )
