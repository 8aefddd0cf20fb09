import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import pytest

from dlspectra.cli import main
from dlspectra.dl_graph import tetra_size

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


@pytest.mark.parametrize("args,name", [
    (["spectrum", "--q", "2", "--r", "2", "--n-max", "6"], "spectrum_q2_r2_n6.csv"),
    (["plancherel", "--q", "2", "--r", "3", "--n-max", "6"], "plancherel_q2_r3_n6.csv"),
    (["return-prob", "--q", "2", "--r", "2", "--N", "12", "--method", "dp"], "return_prob_q2_r2_N12.csv"),
    (["tetra", "--q", "2", "--r", "3", "--height", "3"], "tetra_q2_r3_h3.csv"),
    (["folner", "--q", "2", "--r", "2", "--n-min", "4", "--n-max", "6", "--N", "4"], "folner_q2_r2.csv"),
])
def test_golden_files(capsys, tmp_path, args, name):
    out = tmp_path / name
    assert main(args + ["--out", str(out)]) == 0
    assert out.read_bytes() == (GOLDEN / name).read_bytes()


def test_spectrum_small(capsys):
    code, out, _ = run(capsys, "spectrum", "--q", "2", "--r", "2", "--n-max", "4")
    assert code == 0
    _, rows = parse_csv(out)
    lams = [float(r["lambda"]) for r in rows]
    expected = sorted([0.0, 0.5, -0.5, 1 / math.sqrt(2), -1 / math.sqrt(2)])
    assert lams == sorted(lams)
    assert len(set(lams)) == len(lams)
    assert lams == pytest.approx(expected, abs=1e-15)
    assert any(r["n"] == "2" for r in rows)


def test_plancherel_exact_masses(capsys):
    _, out, _ = run(capsys, "plancherel", "--q", "2", "--r", "2", "--n-max", "5")
    meta, rows = parse_csv(out)
    first = rows[0]
    assert (first["m"], first["n"], first["mass_exact"]) == ("1", "2", "1/3")
    assert float(meta["tail_bound"]) > 0


def test_return_prob_two_steps(capsys):
    code, out, _ = run(capsys, "return-prob", "--q", "2", "--r", "2", "--N", "2")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["dp_exact"] == "1/4"


@pytest.mark.parametrize("N", range(0, 13))
def test_return_prob_routes_agree(capsys, N):
    code, out, _ = run(capsys, "return-prob", "--q", "2", "--r", "2", "--N", str(N), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    row = doc["rows"][0]
    assert float(row["rel_diff_spectral"]) < 1e-8
    if N % 2:
        assert Fraction(row["dp_exact"]) == 0
        assert float(row["spectral"]) == 0 and float(row["asymptotic"]) == 0


def test_return_prob_drifted(capsys):
    code, out, _ = run(capsys, "return-prob", "--q", "2", "--r", "3", "--N", "6", "--alpha", "1/3")
    assert code == 0
    meta, rows = parse_csv(out)
    assert meta["alpha"] == "1/3"
    assert float(rows[0]["rel_diff_spectral"]) < 1e-8


def test_tetra_oracle(capsys):
    code, out, _ = run(capsys, "tetra", "--q", "2", "--r", "3", "--height", "3", "--oracle")
    assert code == 0
    meta, rows = parse_csv(out)
    assert float(meta["max_diff"]) < 1e-9
    assert meta["multiplicity_match"] == "true"
    assert sum(int(r["multiplicity"]) for r in rows) == tetra_size(3, 2, 3) == 65
    assert max(float(r["dense_diff"]) for r in rows) < 1e-9


def test_tetra_equal_branching_bounded(capsys):
    _, out, _ = run(capsys, "tetra", "--q", "2", "--r", "2", "--height", "4")
    _, rows = parse_csv(out)
    assert all(abs(float(r["lambda"])) <= 1 + 1e-15 for r in rows)


def test_tetra_consistency_failure(capsys):
    code, _, err = run(capsys, "tetra", "--q", "2", "--r", "3", "--height", "3", "--oracle", "--tol", "1e-30")
    assert code == 2
    assert "consistency" in err


def test_budget_exit_codes(capsys):
    assert run(capsys, "tetra", "--q", "2", "--r", "3", "--height", "4", "--oracle", "--max-dense", "10")[0] == 3
    assert run(capsys, "return-prob", "--N", "14", "--method", "dp", "--max-states", "10")[0] == 3


@pytest.mark.parametrize("args", [
    ["spectrum", "--q", "1"],
    ["nonsense"],
    [],
    ["return-prob"],
    ["return-prob", "--N", "4", "--alpha", "3/2"],
    ["return-prob", "--N", "4", "--alpha", "abc"],
    ["tetra", "--height", "1"],
    ["folner", "--n-min", "7", "--n-max", "5"],
    ["spectrum", "--format", "xml"],
])
def test_usage_errors(capsys, args):
    code, out, err = run(capsys, *args)
    assert code == 1
    assert out == ""
    assert err


def test_json_mirrors_csv(capsys):
    _, text_csv, _ = run(capsys, "plancherel", "--q", "2", "--r", "3", "--n-max", "4")
    _, text_json, _ = run(capsys, "plancherel", "--q", "2", "--r", "3", "--n-max", "4", "--format", "json")
    meta, rows = parse_csv(text_csv)
    doc = json.loads(text_json)
    assert doc["schema_version"] == 1 and meta["schema_version"] == "1"
    assert doc["rows"] == rows
    assert list(rows[0]) == doc["columns"]


def test_folner_reports(capsys):
    code, out, _ = run(capsys, "folner", "--q", "2", "--r", "3", "--n-min", "4", "--n-max", "6", "--N", "2")
    assert code == 0
    meta, rows = parse_csv(out)
    assert meta["classification"] == "expanding"
    assert float(meta["m2_gap_min"]) > 0.04
    code, out, _ = run(capsys, "folner", "--n-min", "4", "--n-max", "5", "--N", "2")
    assert parse_csv(out)[0]["classification"] == "folner"


def test_asymptotics_command(capsys):
    code, out, _ = run(capsys, "asymptotics", "--grid", "1000,10000", "--quantity", "sigma")
    assert code == 0
    _, rows = parse_csv(out)
    assert abs(float(rows[1]["ratio"]) - 1) < 0.1


def test_simulate_deterministic(capsys):
    args = ["simulate", "--alpha", "9/10", "--steps", "200", "--trials", "5", "--seed", "3"]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b
    _, rows = parse_csv(a)
    assert {r["quantity"]: r["metric"] for r in rows}["mean_rate"] == "tree_lower_bound"


def test_mu_ox_command(capsys):
    code, out, _ = run(capsys, "mu-ox", "--word", "d1,u0", "--n-max", "5")
    assert code == 0
    meta, rows = parse_csv(out)
    assert meta["word"] == "d1,u0" and len(rows) > 0
