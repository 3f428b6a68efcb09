import csv
import io
import subprocess
import sys

import pytest

from ordinalviews.cli import main, read_order_file
from ordinalviews.core_model import write_panel_csv
from ordinalviews.harness import generate_synthetic_panel


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def profile(tmp_path):
    p = tmp_path / "views.txt"
    p.write_text("# three analysts\nA,B,C,D\nB,A,C,D\nA,C,B,D\n")
    return p


def test_read_order_file(profile, tmp_path):
    ids, orders = read_order_file(profile)
    assert ids == ["A", "B", "C", "D"] and len(orders) == 3
    assert orders[1].ranking.tolist() == [1, 0, 2, 3]
    bad = tmp_path / "bad.txt"
    bad.write_text("A,B,C\nA,B,B\n")
    with pytest.raises(ValueError, match="not a permutation"):
        read_order_file(bad)


def test_aggregate(capsys, profile):
    code, out, _ = _run(capsys, "aggregate", str(profile), "--method", "kemeny")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "A,B,C,D"
    assert lines[1].startswith("kt_score,")
    code, out, _ = _run(capsys, "aggregate", str(profile), "--method", "borda", "--local-improve")
    assert code == 0 and out.splitlines()[0] == "A,B,C,D"


def test_solve(capsys, tmp_path):
    scen = tmp_path / "mu.csv"
    scen.write_text("x,y\n0.1,0\n0,0.1\n")
    sig = tmp_path / "sigma.csv"
    sig.write_text(",x,y\nx,1,0\ny,0,1\n")  # labelled rows are accepted
    code, out, _ = _run(capsys, "solve", str(scen), str(sig), "--method", "maxmin", "--delta", "1")
    assert code == 0
    vals = dict(_rows(out)[1:])
    assert float(vals["objective"]) == pytest.approx(-0.20, abs=1e-12)
    assert float(vals["w:x"]) == pytest.approx(0.5, abs=1e-9)
    code, out, _ = _run(capsys, "solve", str(scen), str(sig), "--method", "minregret", "--delta", "1")
    assert code == 0 and "max_regret" in out
    code, out, _ = _run(capsys, "solve", str(scen), str(sig), "--method", "soft", "--gamma", "0.5", "--delta", "1")
    assert code == 0
    assert float(dict(_rows(out)[1:])["objective"]) == pytest.approx(0.055 - 0.5 * (0.55**2 + 0.45**2), abs=1e-9)


def test_solve_errors_exit_with_code_2(capsys, tmp_path):
    scen = tmp_path / "mu.csv"
    scen.write_text("x,y\n0.1,0\n0,0.1\n")
    sig = tmp_path / "sigma.csv"
    sig.write_text("x,z\n1,0\n0,1\n")
    code, _, err = _run(capsys, "solve", str(scen), str(sig))
    assert code == 2 and "different assets" in err
    code, _, err = _run(capsys, "solve", str(scen), str(tmp_path / "missing.csv"))
    assert code == 2


def test_estimate(capsys, tmp_path):
    panel = generate_synthetic_panel(3, 24, seed=0)
    pp = tmp_path / "panel.csv"
    write_panel_csv(panel, pp)
    views = tmp_path / "views.txt"
    views.write_text("A02,A00,A01\nA00,A01,A02\n")
    code, out, _ = _run(capsys, "estimate", str(pp), str(views), "--c", "0.5", "--samples", "2000", "--burn-in", "100")
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["order", "asset", "mu", "se"] and len(rows) == 1 + 2 * 3
    mu = {(r[0], r[1]): float(r[2]) for r in rows[1:]}
    assert mu[("0", "A02")] - mu[("0", "A00")] > mu[("1", "A02")] - mu[("1", "A00")]


def test_simulate(capsys, tmp_path):
    grid = tmp_path / "grid.toml"
    grid.write_text('ks = [2]\nds = [0.3]\ncs = [0.5]\nmethods = ["borda", "maxmin"]\n')
    out_dir = tmp_path / "out"
    code, out, _ = _run(capsys, "simulate", "--synthetic", "n=4,T=6", "--grid", str(grid), "--out", str(out_dir), "--seed", "3")
    assert code == 0
    assert {p.name for p in out_dir.iterdir()} == {"sr_wins.csv", "ceq_wins.csv", "per_cell_metrics.csv", "summary.md"}
    assert len(out.splitlines()) == 4


def test_simulate_with_panel_and_rf_column(capsys, tmp_path):
    panel = generate_synthetic_panel(4, 6, seed=1)
    pp = tmp_path / "panel.csv"
    write_panel_csv(panel, pp)
    # add an rf column
    lines = pp.read_text().splitlines()
    lines = [lines[0] + ",rf"] + [ln + ",0.001" for ln in lines[1:]]
    pp.write_text("\n".join(lines) + "\n")
    grid = tmp_path / "grid.toml"
    grid.write_text('ks = [2]\nds = [0.3]\ncs = [0.5]\nmethods = ["copeland"]\nrf = "rf"\n')
    code, _, err = _run(capsys, "simulate", "--panel", str(pp), "--grid", str(grid), "--out", str(tmp_path / "o"))
    assert code == 0, err
    rows = list(csv.DictReader(open(tmp_path / "o" / "per_cell_metrics.csv")))
    assert len(rows) == 1 and rows[0]["method"] == "copeland"


def test_simulate_rejects_bad_synthetic_spec(capsys, tmp_path):
    code, _, err = _run(capsys, "simulate", "--synthetic", "n=4", "--out", str(tmp_path))
    assert code == 2 and "n and T" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ordinalviews", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("aggregate", "estimate", "solve", "simulate"):
        assert cmd in res.stdout
