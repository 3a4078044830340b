import csv
import io
import math
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from dampwave import cli
from dampwave.config import ConfigError, load, loads, shipped_configs
from dampwave.report import parse_report, render_report
from dampwave.solver import CSV_COLUMNS

CONFIGS = shipped_configs()

SMALL_RUN = """
[dissipation.b1]
family = "constant"
mu = 1

[dissipation.b2]
family = "pure-power"
mu = 1
r = "1/2"

[scenario]
n = 1
m = 1
p = 4
q = 4

[grid]
dim = 1
points = 256
half_length = 40

[run]
t_end = {t_end}
output_times = {{ start = 0, stop = {t_end}, count = 61 }}
epsilon = {eps}
nonlinear = {nonlinear}

[run.profile]
width = 3
kind = "{kind}"
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def small(tmp_path, t_end=30, eps="1e-3", nonlinear="true", kind="bump", name="run.toml"):
    return write(tmp_path, SMALL_RUN.format(t_end=t_end, eps=eps, nonlinear=nonlinear, kind=kind), name)


# ---------------------------------------------------------------------------
# config and report

def test_shipped_configs_present():
    assert {"coupled_power", "coupled_log_decay", "linear_constant", "linear_pure_power", "linear_log_growth",
            "linear_log_decay"} <= set(CONFIGS)
    for path in CONFIGS.values():
        load(path)


def test_numbers_are_exact():
    cfg = loads('[scenario]\nn = 2\nm = 2\np = 1.2\nq = "13/9"\ngamma2 = "-1/3"\n')
    scn = cfg.scenario()
    assert scn.nl.p == F(6, 5) and scn.nl.q == F(13, 9) and scn.nl.gamma2 == F(-1, 3)


@pytest.mark.parametrize("text, where", [
    ("[scenario]\nn = 2\np = 2\nq = 2\nbogus = 1\n", "scenario"),
    ("[scenario]\nn = 2\np = 2\n", "scenario"),
    ("[grid]\ndim = 4\npoints = 64\nhalf_length = 1\n", "grid.dim"),
    ("[scenario]\nn = 2\np = \"two\"\nq = 2\n", "scenario.p"),
    ("[extra]\nx = 1\n", "<root>"),
])
def test_schema_rejections(text, where):
    with pytest.raises(ConfigError) as info:
        loads(text)
    assert info.value.path == where


def test_empty_and_malformed():
    with pytest.raises(ConfigError):
        loads("")
    with pytest.raises(ConfigError):
        loads("[scenario\n")


def test_semantic_errors_name_the_key():
    cfg = loads("[scenario]\nn = 2\np = 2\nq = 2\nalpha = 2\n")
    with pytest.raises(ConfigError, match="scenario.alpha"):
        cfg.scenario()
    cfg = loads("[scenario]\nn = 2\np = 2\nq = 2\ninterplay = \"fitted\"\n")
    with pytest.raises(ConfigError, match="interplay"):
        cfg.scenario()


def test_report_roundtrip():
    data = {"top": 1, "a": {"x": F(13, 9), "flag": True, "inner": {"y": math.inf, "z": None}},
            "b": {"notes": ["one, two", "three"], "nums": [1, 2.5]}}
    text = render_report(data)
    parsed = parse_report(text)
    assert parsed[""]["top"] == "1"
    assert parsed["a"] == {"x": "13/9", "flag": "true"}
    assert parsed["a.inner"] == {"y": "inf", "z": "none"}
    assert parsed["b"] == {"notes[0]": "one, two", "notes[1]": "three", "nums": "[1, 2.5]"}


# ---------------------------------------------------------------------------
# check

def test_check_example_2_4(capsys):
    assert cli.main(["check", "--config", str(CONFIGS["coupled_power"])]) == 0
    parsed = parse_report(capsys.readouterr().out)
    assert parsed["ranges"] == {"p": "p > 1", "q": "q > 13/9"}
    assert parsed["verdict"]["theorem"] == "T2.1"


def test_check_example_2_5(capsys, tmp_path):
    assert cli.main(["check", "--config", str(CONFIGS["coupled_log_decay"]), "--out", str(tmp_path)]) == 0
    parsed = parse_report((tmp_path / "check_report.txt").read_text())
    assert parsed["ranges"] == {"p": "p > 1", "q": "q > 7/3"}
    # user-supplied interplay differs from the fitted coefficients
    assert any("fitted value" in v for k, v in parsed["verdict"].items() if k.startswith("warnings"))


def test_check_violation_exit_1(tmp_path, capsys):
    text = Path(CONFIGS["coupled_power"]).read_text().replace('q = "3/2"', 'q = "7/5"').replace('theorem = "auto"',
                                                                                      'theorem = "T2.1"')
    assert cli.main(["check", "--config", write(tmp_path, text)]) == 1
    parsed = parse_report(capsys.readouterr().out)
    assert parsed["verdict.clauses.q_tilde > p_Fuj(gamma2)"]["passed"] == "false"
    assert parsed["verdict.clauses.q_tilde > p_Fuj(gamma2)"]["lhs"] == "11/5"


def test_check_not_covered_exit_1(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nn = 1\nm = 1\np = 2\nq = 2\n")
    assert cli.main(["check", "--config", cfg]) == 1
    assert parse_report(capsys.readouterr().out)["verdict"]["theorem"] == "none"


@pytest.mark.parametrize("text", ["", "[scenario]\nn = 2\np = 2\nq = 2\nwhat = 3\n", "[grid]\ndim = 1\npoints = 64\nhalf_length = 1\n"])
def test_check_config_errors_exit_2(tmp_path, capsys, text):
    assert cli.main(["check", "--config", write(tmp_path, text)]) == 2
    assert "error" in capsys.readouterr().err


def test_check_missing_config(capsys):
    assert cli.main(["check"]) == 2


def test_check_named_checker_wrong_target(tmp_path, capsys):
    text = "[scenario]\nn = 2\nm = 2\np = 2\nq = 2\n[checks]\ntheorem = \"T2.5a\"\n"
    assert cli.main(["check", "--config", write(tmp_path, text)]) == 2


# ---------------------------------------------------------------------------
# table

def test_table_rows(capsys):
    assert cli.main(["table", "--beta", "3", "--gamma1", "0", "--n", "2", "--m", "1"]) == 0
    assert capsys.readouterr().out.startswith("p > 2 ")
    assert cli.main(["table", "--beta", "1/2", "--gamma1", "0", "--n", "2", "--m", "1", "--csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1 and rows[0]["lower_bound"] == "7/2"


def test_table_four_regimes(capsys):
    # beta < 1 and beta >= 1, each with gamma1 below and above its row threshold (n=2, m=1)
    assert cli.main(["table", "--beta", "1/2", "3", "--gamma1", "-1", "4", "--n", "2", "--csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len({r["row"] for r in rows}) == 4


def test_table_from_config(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nn = 2\nm = 1\np = 2\nq = 2\n[table]\nbeta = [3]\ngamma1 = [0]\n")
    assert cli.main(["table", "--config", cfg, "--csv"]) == 0
    assert list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]["lower_bound"] == "2"


def test_table_bad_input(capsys):
    assert cli.main(["table", "--beta", "0", "--gamma1", "0"]) == 2
    assert cli.main(["table"]) == 2


# ---------------------------------------------------------------------------
# simulate

def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_simulate_linear_fit(tmp_path):
    cfg = small(tmp_path, t_end=30, eps=1, nonlinear="false")
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "trajectory.csv")
    assert tuple(header) == CSV_COLUMNS and data.shape == (61, len(CSV_COLUMNS))
    summary = parse_report((out / "summary.txt").read_text())
    assert summary["envelope_u"]["passed"] == "true"
    assert summary["fit_u"]["predicted_exponent"] == "-3/4"
    # constant damping: B = t reaches 30, so a loose tolerance at this horizon
    assert abs(float(summary["fit_u"]["deviation"])) < 0.1


def test_simulate_zero_data(tmp_path):
    cfg = small(tmp_path, t_end=10, eps=0)
    out = tmp_path / "z"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    _, data = read_csv(out / "trajectory.csv")
    assert np.all(data[:, 3:] == 0)
    summary = parse_report((out / "summary.txt").read_text())
    assert summary["envelope_u"]["passed"] == "true" and float(summary["envelope_u"]["max_ratio"]) == 0
    assert "skipped" in summary["fit_u"]


def test_simulate_horizon_guard(tmp_path, capsys, monkeypatch):
    called = []
    monkeypatch.setattr("dampwave.solver.RK45", lambda *a, **k: called.append(1))
    cfg = small(tmp_path, t_end=40)
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "h")]) == 2
    assert not called
    assert "safe horizon" in capsys.readouterr().err


def test_simulate_blow_up(tmp_path, capsys):
    text = SMALL_RUN.format(t_end=20, eps=50, nonlinear="true", kind="bump").replace(
        'family = "pure-power"\nmu = 1\nr = "1/2"', 'family = "constant"\nmu = 1').replace("p = 4\nq = 4", "p = 2\nq = 2")
    out = tmp_path / "b"
    assert cli.main(["simulate", "--config", write(tmp_path, text), "--out", str(out)]) == 3
    summary = parse_report((out / "summary.txt").read_text())
    assert 0 < float(summary["blow_up"]["last_finite_time"]) < 20


def test_simulate_deterministic(tmp_path):
    cfg = small(tmp_path, t_end=8, kind="noisy-bump")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["simulate", "--config", cfg, "--out", str(a), "--seed", "5"]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(b), "--seed", "5"]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(c), "--seed", "6"]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()


def test_simulate_stdout_without_out(tmp_path, capsys):
    cfg = small(tmp_path, t_end=4)
    assert cli.main(["simulate", "--config", cfg]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "[envelope_u]" in captured.err


def test_simulate_batch(tmp_path, capsys):
    one = small(tmp_path, t_end=4, name="one.toml")
    two = small(tmp_path, t_end=5, name="two.toml")
    out = tmp_path / "batch"
    assert cli.main(["simulate", "--config", one, "--config", two, "--out", str(out), "--jobs", "2"]) == 0
    assert (out / "one" / "trajectory.csv").exists() and (out / "two" / "trajectory.csv").exists()


def test_simulate_requires_sections(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(CONFIGS["coupled_power"])]) == 2


# ---------------------------------------------------------------------------
# verify and fit

def test_verify_default_suite(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    report = parse_report((tmp_path / "verify_report.txt").read_text())
    const = report["primitive_properties[constant]"]
    assert (float(const["P6_upper"]), float(const["P6_lower"])) == (2.0, 1.0)
    assert (float(const["P7_upper"]), float(const["P7_lower"])) == (2.0, 1.0)


def test_verify_shipped_config(capsys):
    assert cli.main(["verify", "--config", str(CONFIGS["coupled_log_decay"])]) == 0


def test_verify_detects_loose_tolerance(capsys):
    assert cli.main(["verify", "--tolerance", "1e-2"]) == 1
    assert "FAIL mode_oracle_solver" in capsys.readouterr().out


def test_fit_roundtrip(tmp_path, capsys):
    cfg = small(tmp_path, t_end=30, eps=1, nonlinear="false")
    out = tmp_path / "f"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    assert cli.main(["fit", str(out / "trajectory.csv"), "--config", cfg]) == 0
    report = parse_report(capsys.readouterr().out)
    summary = parse_report((out / "summary.txt").read_text())
    assert report["L2_grad_u"]["slope"] == summary["fit_u"]["slope"]
    assert report["L2_grad_u"]["predicted_exponent"] == "-3/4"


def test_fit_bad_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert cli.main(["fit", str(bad)]) == 2
