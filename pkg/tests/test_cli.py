import csv
import json

import pytest

from csslab.cli import ConfigError, DEFAULTS, emit_report, load_config, main, parse_config_text, render_markdown, summary_dict


def test_parse_config_text():
    cfg = parse_config_text("n = 1024  # total nodes\nb_values = [0.02, 0.01]\npde_shoot = true\nbracket = none\n")
    assert cfg == {"n": 1024, "b_values": [0.02, 0.01], "pde_shoot": True, "bracket": None}


@pytest.mark.parametrize("text", ["bogus = 1", "n = 1.5", "n", "b0 = [1,", "pde_shoot = 1"])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_config_checks(tmp_path):
    assert load_config() == DEFAULTS
    with pytest.raises(ConfigError):
        load_config(overrides={"n": 100})
    with pytest.raises(ConfigError):
        load_config(overrides={"bracket": [0.1]})
    p = tmp_path / "c.cfg"
    p.write_text("r_max = 200\n")
    assert load_config(p)["r_max"] == 200.0


def test_unknown_key_exit_code(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("colour = 3\n")
    assert main(["run", "rho", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_empty_report_is_valid(tmp_path):
    out = emit_report([], tmp_path / "empty")
    body = json.loads((out / "summary.json").read_text())
    assert body["schema_version"] == 1 and body["scenarios"] == {} and body["criteria"] == {}
    assert "No scenarios" in render_markdown([])


def _small(tmp_path, extra=""):
    p = tmp_path / "small.cfg"
    p.write_text("n = 2048\nsamples = 4\nkernel_base = 256\nvolterra_points = 6\n" + extra)
    return p


def test_runs_are_deterministic(tmp_path):
    cfg = _small(tmp_path)
    a = main(["run", "rho", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"])
    b = main(["run", "rho", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "7"])
    assert a == b
    sa = (tmp_path / "a" / "rho" / "summary.json").read_bytes()
    sb = (tmp_path / "b" / "rho" / "summary.json").read_bytes()
    assert sa == sb
    body = json.loads(sa)
    assert body["config"]["seed"] == 7
    assert set(body["criteria"]) <= {"C4", "inv"}


def test_same_sign_bracket_fails(tmp_path, capsys):
    cfg = _small(tmp_path, "bracket = [0.0001, 0.0002]\n")
    code = main(["run", "eta-shoot", "--config", str(cfg), "--out", str(tmp_path)])
    assert code != 0
    assert "BracketError" in capsys.readouterr().err


def test_rate_fit_table(tmp_path):
    cfg = _small(tmp_path, "b0_values = [0.02, 0.01]\n")
    main(["run", "rate-fit", "--config", str(cfg), "--out", str(tmp_path)])
    with open(tmp_path / "rate-fit" / "rate-fit_rate_fit.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["b0", "T", "ell", "flatness_pct"]
    assert len(rows) == 3
    md = (tmp_path / "rate-fit" / "report.md").read_text()
    assert "| b0 | T | ell | flatness% |" in md


def test_summary_orders_criteria():
    from csslab.experiments import ScenarioResult

    r = ScenarioResult("x")
    r.check("C10", "a", 1.0, "", True)
    r.check("C2", "b", 1.0, "", False)
    r.check("inv", "c", 1.0, "", True)
    body = summary_dict([r])
    assert list(body["criteria"]) == ["C2", "C10", "inv"]
    assert body["criteria"]["C2"]["passed"] is False
