"""Command-line interface: ``dlspectra <command> [flags]``.

Every command writes one table as CSV (with ``# key=value`` header lines for
run metadata) or JSON.  Exit codes: 0 ok, 1 usage, 2 consistency failure,
3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import mpmath as mp
import numpy as np

from dlspectra import asymptotics, spectral_measures, tetra_spectra
from dlspectra.dl_graph import parse_word, tetra_size, walk
from dlspectra.walk_engine import (
    DEFAULT_MAX_STATES, StateBudgetExceeded, WalkParams, conjugation_factor_sq, exact_return_prob,
    simulate_escape,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_CONSISTENCY, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ConsistencyError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt_float(x) -> str:
    if isinstance(x, mp.mpf):
        return mp.nstr(x, 17, min_fixed=-5, max_fixed=5)
    return repr(float(x))


def fmt_frac(x: Fraction | None) -> str:
    if x is None:
        return ""
    return f"{x.numerator}/{x.denominator}"


class Table:
    def __init__(self, command: str, columns: list[str], params: dict):
        self.command = command
        self.columns = columns
        self.params = params
        self.rows: list[list] = []
        self.meta: dict = {}

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row width does not match the header")
        self.rows.append([_cell(v) for v in values])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n# command={self.command}\n")
        for k, v in {**self.params, **self.meta}.items():
            buf.write(f"# {k}={_cell(v)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "params": {k: _cell(v) for k, v in self.params.items()},
            "meta": {k: _cell(v) for k, v in self.meta.items()},
            "columns": self.columns,
            "rows": [dict(zip(self.columns, row)) for row in self.rows],
        }
        return json.dumps(doc, indent=2) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return fmt_frac(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating, mp.mpf)):
        return fmt_float(v)
    return str(v)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _rel_diff(a, b) -> float:
    a, b = mp.mpf(a), mp.mpf(b)
    if a == b:
        return 0.0
    return float(abs(a - b) / max(abs(a), abs(b)))


# --- commands -----------------------------------------------------------------------

def cmd_spectrum(a) -> Table:
    t = Table("spectrum", ["m", "n", "lambda"], {"q": a.q, "r": a.r, "n_max": a.n_max})
    pairs = sorted(spectral_measures.coprime_pairs(a.n_max),
                   key=lambda p: (spectral_measures.atom_value(*p, a.q, a.r), p[1]))
    for m, n in pairs:
        t.add(m, n, spectral_measures.atom_value(m, n, a.q, a.r))
    return t


def cmd_plancherel(a) -> Table:
    mu = spectral_measures.plancherel_measure(a.q, a.r, a.n_max)
    t = Table("plancherel", ["m", "n", "lambda", "mass", "mass_exact"], {"q": a.q, "r": a.r, "n_max": a.n_max})
    for atom in mu.atoms:
        t.add(atom.m, atom.n, atom.lam, atom.mass, atom.mass_exact)
    t.meta["total_mass"] = mu.total_mass()
    t.meta["tail_bound"] = mu.tail_bound
    if not mu.total_mass() <= 1 <= mu.total_mass() + mu.tail_bound + 1e-15:
        raise ConsistencyError("total mass is not within the tail bound of 1")
    return t


def cmd_mu_ox(a) -> Table:
    x = walk(parse_word(a.word))
    mu = spectral_measures.mu_ox_measure(x, a.q, a.r, a.n_max)
    t = Table("mu-ox", ["m", "n", "lambda", "mass"], {"q": a.q, "r": a.r, "n_max": a.n_max, "word": a.word})
    for atom in mu.atoms:
        t.add(atom.m, atom.n, atom.lam, atom.mass)
    t.meta["total_mass"] = mu.total_mass()
    t.meta["tail_bound"] = mu.tail_bound
    return t


def cmd_return_prob(a) -> Table:
    params = WalkParams(a.q, a.r, a.alpha) if a.alpha is not None else WalkParams.simple(a.q, a.r)
    methods = ["dp", "spectral", "asymptotic"] if a.method == "all" else [a.method]
    cols = ["N"]
    if "dp" in methods:
        cols += ["dp_exact", "dp"]
    if "spectral" in methods:
        cols += ["spectral"]
    if "asymptotic" in methods:
        cols += ["asymptotic"]
    if a.method == "all":
        cols += ["rel_diff_spectral", "rel_diff_asymptotic"]
    t = Table("return-prob", cols, {"q": a.q, "r": a.r, "alpha": params.alpha, "N": a.N, "method": a.method})
    N = a.N
    row = [N]
    vals = {}
    if "dp" in methods:
        p = exact_return_prob(N, params, max_states=a.max_states)
        vals["dp"] = mp.mpf(p.numerator) / p.denominator
        row += [p, float(p)]
    if "spectral" in methods:
        if N % 2:
            vals["spectral"] = mp.mpf(0)
        else:
            vals["spectral"] = asymptotics.spectral_return_sum(N // 2, a.q, a.r, a.alpha)
        row.append(vals["spectral"])
    if "asymptotic" in methods:
        if N % 2:
            vals["asymptotic"] = mp.mpf(0)
        elif N == 0:
            vals["asymptotic"] = None
        else:
            vals["asymptotic"] = asymptotics.return_asymptotic(N // 2, a.q, a.r, a.alpha)
        row.append(vals["asymptotic"])
    if a.method == "all":
        diff_s = _rel_diff(vals["dp"], vals["spectral"])
        row.append(diff_s)
        row.append(None if vals["asymptotic"] is None else _rel_diff(vals["dp"], vals["asymptotic"]))
        if diff_s > a.tol:
            raise ConsistencyError(f"dp and spectral routes differ by {diff_s:.3e} > {a.tol}")
    if a.alpha is not None:
        t.meta["conjugation_factor_sq"] = conjugation_factor_sq(params)
    t.add(*row)
    return t


def _entry_diffs(eigs, dense):
    """Per closed-form entry, the largest gap to the dense eigenvalues matched by sorting."""
    vals = np.repeat([e.lam for e in eigs], [e.multiplicity for e in eigs])
    owner = np.repeat(np.arange(len(eigs)), [e.multiplicity for e in eigs])
    order = np.argsort(vals, kind="stable")
    gaps = np.abs(vals[order] - dense)
    out = np.zeros(len(eigs))
    np.maximum.at(out, owner[order], gaps)
    return out


def cmd_tetra(a) -> Table:
    eigs = tetra_spectra.full_closed_form_spectrum(a.height, a.q, a.r, a.mode)
    eigs = sorted(eigs, key=lambda e: (-e.lam, e.case_tag, e.n, e.m))
    cols = ["lambda", "multiplicity", "case", "family_height", "m"]
    if a.oracle:
        cols.append("dense_diff")
    t = Table("tetra", cols, {"q": a.q, "r": a.r, "height": a.height, "mode": a.mode, "oracle": a.oracle})
    size = tetra_size(a.height, a.q, a.r)
    t.meta["size"] = size
    t.meta["total_multiplicity"] = tetra_spectra.total_multiplicity(eigs)
    diffs = None
    if a.oracle:
        dense = tetra_spectra.dense_spectrum(a.height, a.q, a.r, a.mode, max_size=a.max_dense)
        max_diff, mult_ok = tetra_spectra.compare_with_dense(eigs, dense, a.tol)
        diffs = _entry_diffs(eigs, dense)
        t.meta["max_diff"] = max_diff
        t.meta["multiplicity_match"] = mult_ok
    for c, e in enumerate(eigs):
        row = [e.lam, e.multiplicity, e.case_tag, e.n, e.m]
        if a.oracle:
            row.append(float(diffs[c]))
        t.add(*row)
    if t.meta["total_multiplicity"] != size:
        raise ConsistencyError("multiplicities do not add up to the tetrahedron size")
    if a.oracle and not (t.meta["max_diff"] <= a.tol and t.meta["multiplicity_match"]):
        raise ConsistencyError(f"closed form and dense spectrum differ (max diff {t.meta['max_diff']:.3e})")
    return t


def cmd_folner(a) -> Table:
    kind, ratios = tetra_spectra.folner_classify(a.q, a.r, range(a.n_min, a.n_max + 1))
    cols = ["n", "N", "boundary_ratio", "boundary_ratio_decimal", "moment_plancherel_exact",
            "moment_plancherel", "moment_truncated", "gap", "envelope", "moment_renormalized", "gap_renormalized"]
    t = Table("folner", cols, {"q": a.q, "r": a.r, "n_min": a.n_min, "n_max": a.n_max, "moments_up_to": a.N})
    P = WalkParams.simple(a.q, a.r)
    exact = [exact_return_prob(N, P, max_states=a.max_states) for N in range(a.N + 1)]
    m2_gaps = []
    breach = []
    for n, ratio in ratios:
        trunc = tetra_spectra.cumulative_measure(n, a.q, a.r, tetra_spectra.TRUNCATED)
        ren = tetra_spectra.cumulative_measure(n, a.q, a.r, tetra_spectra.RENORMALIZED)
        size = tetra_size(n, a.q, a.r)
        for N in range(a.N + 1):
            mt, mr = trunc.moment(N), ren.moment(N)
            gap = float(exact[N]) - mt
            env = 2 * tetra_spectra.boundary_neighbourhood_size(n, N, a.q, a.r) / size
            if abs(gap) > env + 1e-12:
                breach.append((n, N))
            t.add(n, N, ratio, float(ratio), exact[N], float(exact[N]), mt, gap, env, mr, mr - float(exact[N]))
            if N == 2:
                m2_gaps.append(mr - float(exact[N]))
    t.meta["classification"] = kind
    if m2_gaps:
        t.meta["m2_gap_min"] = min(m2_gaps)
    if breach:
        raise ConsistencyError(f"moment gap outside the boundary envelope at (n, N) = {breach[0]}")
    return t


def cmd_asymptotics(a) -> Table:
    Ns = [int(x) for x in a.grid.split(",")]
    t = Table("asymptotics", ["N", "direct", "asymptotic", "ratio"],
              {"q": a.q, "r": a.r, "alpha": a.alpha, "grid": a.grid, "quantity": a.quantity})
    for N in Ns:
        if a.quantity == "sigma":
            d = asymptotics.sigma_direct(N, a.k, a.gamma, asymptotics.decay_base(a.q, a.r))
            s = asymptotics.sigma_asymptotic(N, a.k, a.gamma, asymptotics.decay_base(a.q, a.r))
        else:
            d = asymptotics.spectral_return_sum(N, a.q, a.r, a.alpha)
            s = asymptotics.return_asymptotic(N, a.q, a.r, a.alpha)
        t.add(N, d, s, d / s)
    c = asymptotics.constants(a.k, asymptotics.decay_base(a.q, a.r))
    t.meta.update({"k": a.k, "gamma": a.gamma, "xi": c.xi_k, "B": c.B_k, "C": c.C_k})
    return t


def cmd_simulate(a) -> Table:
    alpha = a.alpha if a.alpha is not None else Fraction(a.q, a.q + a.r)
    s = simulate_escape(WalkParams(a.q, a.r, alpha), a.steps, a.trials, a.seed)
    t = Table("simulate", ["quantity", "value", "metric"],
              {"q": a.q, "r": a.r, "alpha": alpha, "steps": a.steps, "trials": a.trials, "seed": a.seed})
    t.add("mean_rate", s.mean_rate, s.metric)
    t.add("mean_rate_horocycle", s.mean_rate_hor, "horocycle_index")
    t.add("mean_rate_tree_bound", s.mean_rate_tree_bound, "tree_lower_bound")
    if s.mean_rate_bfs is not None:
        t.add("mean_rate_bfs", s.mean_rate_bfs, "bfs")
    t.add("drift_target", abs(2 * float(alpha) - 1), "exact")
    t.add("normalized_mean", float(np.mean(s.normalized_samples)), s.metric)
    return t


COMMANDS = {
    "spectrum": cmd_spectrum, "plancherel": cmd_plancherel, "mu-ox": cmd_mu_ox,
    "return-prob": cmd_return_prob, "tetra": cmd_tetra, "folner": cmd_folner,
    "asymptotics": cmd_asymptotics, "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dlspectra", description="Spectral computations for random walks on DL(q, r).")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--q", type=int, default=2)
        sp.add_argument("--r", type=int, default=2)
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", default=None, help="write to this file instead of stdout")
        sp.add_argument("--tol", type=_positive_float, default=1e-9)
        sp.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES)
        return sp

    for name in ("spectrum", "plancherel"):
        common(sub.add_parser(name)).add_argument("--n-max", type=int, default=10)
    sp = common(sub.add_parser("mu-ox"))
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--word", default="d1", help='moves from the origin, e.g. "d1,u0"')
    sp = common(sub.add_parser("return-prob"))
    sp.add_argument("--N", type=int, required=True, help="number of steps")
    sp.add_argument("--alpha", type=_rational, default=None)
    sp.add_argument("--method", choices=["dp", "spectral", "asymptotic", "all"], default="all")
    sp.set_defaults(tol=1e-8)
    sp = common(sub.add_parser("tetra"))
    sp.add_argument("--height", type=int, required=True)
    sp.add_argument("--mode", choices=list(tetra_spectra.MODES), default=tetra_spectra.RENORMALIZED)
    sp.add_argument("--oracle", action="store_true", help="compare with a dense eigensolve")
    sp.add_argument("--max-dense", type=int, default=5000)
    sp = common(sub.add_parser("folner"))
    sp.add_argument("--n-min", type=int, default=4)
    sp.add_argument("--n-max", type=int, default=10)
    sp.add_argument("--N", type=int, default=8, help="moments up to this order")
    sp = common(sub.add_parser("asymptotics"))
    sp.add_argument("--grid", default="1000,10000,100000", help="comma-separated N values (2N steps)")
    sp.add_argument("--quantity", choices=["return", "sigma"], default="return")
    sp.add_argument("--alpha", type=_rational, default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--gamma", type=float, default=0.0)
    sp = common(sub.add_parser("simulate"))
    sp.add_argument("--alpha", type=_rational, default=None)
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _validate(a):
    if a.q < 2 or a.r < 2:
        raise UsageError("--q and --r must be at least 2")
    for name in ("n_max", "height", "N", "steps", "trials"):
        v = getattr(a, name, None)
        if v is not None and v < 0:
            raise UsageError(f"--{name.replace('_', '-')} must be nonnegative")
    if getattr(a, "n_max", None) is not None and a.command in ("spectrum", "plancherel", "mu-ox") and a.n_max < 2:
        raise UsageError("--n-max must be at least 2")
    if a.command == "tetra" and a.height < 2:
        raise UsageError("--height must be at least 2")
    if a.command == "folner" and not 2 <= a.n_min <= a.n_max:
        raise UsageError("need 2 <= --n-min <= --n-max")
    alpha = getattr(a, "alpha", None)
    if alpha is not None and not 0 < alpha < 1:
        raise UsageError("--alpha must lie strictly between 0 and 1")


def main(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
        _validate(a)
        table = COMMANDS[a.command](a)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConsistencyError as e:
        print(f"consistency failure: {e}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except StateBudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    text = table.to_csv() if a.format == "csv" else table.to_json()
    if a.out:
        with open(a.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK
