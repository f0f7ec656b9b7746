import csv
import json

import pytest

from ergodic_hjb.cli import main, read_config_file
from ergodic_hjb.core import ConfigError


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_check_ou_c4(tmp_path):
    assert run(tmp_path, "check", "C4", "--preset", "ou-1d") == 0
    rep = json.loads((tmp_path / "conditions.json").read_text())[0]
    assert rep["holds"] and rep["R0"] == 1.0


def test_check_unreachable_m(tmp_path):
    assert run(tmp_path, "check", "C10strong", "--preset", "ou-1d", "--param", "M=1e6") == 1


def test_even_n_is_a_config_error(tmp_path):
    assert run(tmp_path, "check", "C4", "--preset", "ou-1d", "--grid-n", "480") == 2


@pytest.mark.parametrize("args", [
    ["check", "C99", "--preset", "ou-1d"],
    ["check", "C5", "--preset", "ou-1d"],                       # lambda, Lambda missing
    ["check", "C6.5", "--preset", "ou-1d"],
    ["ergodic", "--preset", "nope"],
    ["ergodic", "--preset", "pucci-ou", "--dim", "2"],
    ["ergodic", "--preset", "ou-1d", "--param", "shift"],
    ["parabolic", "--preset", "ou-1d", "--h0", "bumpy"],
    ["ergodic", "--bogus-flag"],
])
def test_config_errors(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_check_with_lambdas(tmp_path):
    assert run(tmp_path, "check", "C5", "C10", "C6.5", "--preset", "ou-1d", "--lambda", "1",
               "--big-lambda", "1") == 0


def test_ergodic_explicit_example(tmp_path):
    assert run(tmp_path, "ergodic", "--preset", "paper-example", "--gnuplot") == 0
    out = json.loads((tmp_path / "ergodic.json").read_text())
    assert abs(out["c"]) <= 5e-3
    rows = list(csv.reader(open(tmp_path / "chi.csv")))
    assert rows[0] == ["x", "chi"] and len(rows) == 482
    assert (tmp_path / "ladder.csv").exists() and (tmp_path / "growth.csv").exists()
    assert (tmp_path / "chi.gp").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["grid_n"] == 481 and "numpy" in manifest["versions"]


def test_ergodic_constant_cost(tmp_path):
    assert run(tmp_path, "ergodic", "--preset", "constant-cost", "--grid-n", "61") == 0
    assert json.loads((tmp_path / "ergodic.json").read_text())["c"] == pytest.approx(-2.0, abs=1e-12)


def test_ergodic_probe(tmp_path):
    # the c gap is delta_min * (chi(1) - chi(0)); ten rungs bring it under 1e-3
    assert run(tmp_path, "ergodic", "--preset", "paper-example", "--x-ref", "1.0",
               "--probe", "0.0", "--threads", "2", "--ladder-len", "10") == 0
    probe = json.loads((tmp_path / "probe.json").read_text())
    assert probe["delta_c"] <= 1e-3
    assert json.loads((tmp_path / "ergodic.json").read_text())["x_ref"] == [1.0]


def test_parabolic_ou_linear(tmp_path):
    assert run(tmp_path, "parabolic", "--preset", "ou-linear", "--grid-n", "161", "--t-final", "20") == 0
    tail = json.loads((tmp_path / "tail.json").read_text())
    assert abs(tail["ubar_minus_average"]) <= 1e-2
    header = next(csv.reader(open(tmp_path / "snapshots.csv")))
    assert header == ["t", "x", "u"]


def test_parabolic_constant(tmp_path):
    assert run(tmp_path, "parabolic", "--preset", "ou-linear", "--h0", "const:3", "--grid-n", "81",
               "--t-final", "2") == 0
    tail = json.loads((tmp_path / "tail.json").read_text())
    assert tail["ubar"] == 3.0 and tail["ulow"] == 3.0


def test_parabolic_cfl_rejection(tmp_path):
    assert run(tmp_path, "parabolic", "--preset", "ou-linear", "--dt", "1.0", "--t-final", "2") == 1


def test_discounted_with_monte_carlo(tmp_path):
    assert run(tmp_path, "discounted", "--preset", "paper-example", "--delta", "0.5",
               "--mc-paths", "400", "--mc-dt", "0.05", "--seed", "7") == 0
    out = json.loads((tmp_path / "discounted.json").read_text())
    mc = out["monte_carlo"]
    assert mc["seed"] == 7 and abs(mc["estimate"] - mc["grid_value"]) <= max(4 * mc["stderr"], 0.05)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\npreset = constant-cost\ngrid-n = 61\nparam = level=3\n")
    assert main(["ergodic", "--config", str(cfg), "--out", str(tmp_path), "--ladder-len", "2"]) == 0
    out = json.loads((tmp_path / "ergodic.json").read_text())
    assert out["c"] == pytest.approx(-3.0) and len(out["ladder"]) == 2
    assert main(["ergodic", "--config", str(cfg), "--grid-n", "60", "--out", str(tmp_path)]) == 2


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config_file(bad)
    bad.write_text("mystery = 1\n")
    assert main(["ergodic", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["ergodic", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2


def test_help_documents_columns(capsys):
    assert main(["ergodic", "--help"]) == 0
    text = capsys.readouterr().out
    assert "chi.csv" in text and "x[,y],chi" in text
