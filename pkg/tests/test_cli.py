import json

import pytest

from simulate import build_parser, main

SHORT_SCENARIO = """\
name: short
decimation: 1
schedule:
  - {duration: 0.02, irradiance: 1000.0, temperature: 25.0}
plant: {r_lo: 0.0, r_lg: 0.0, r_on: 0.0}
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "short.yaml"
    path.write_text(SHORT_SCENARIO, encoding="utf-8")
    return path


def test_size(capsys):
    assert main(["size", "--t-on", "5e-6"]) == 0
    out = capsys.readouterr().out
    assert "l_min" in out
    assert "duty" in out


def test_infeasible_size_is_a_usage_error(capsys):
    assert main(["size", "--v-in", "500"]) == 2
    assert "error:" in capsys.readouterr().err


def test_show_builtin(capsys):
    assert main(["show", "paper"]) == 0
    assert capsys.readouterr().out.startswith("name: paper")


def test_unknown_scenario(tmp_path, capsys):
    assert main(["run", "--scenario", "missing", "--out", str(tmp_path)]) == 2
    assert "missing" in capsys.readouterr().err


def test_run_argument_choices():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--controller", "pid"])


def test_short_run_writes_outputs(scenario_file, tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--scenario", str(scenario_file), "--controller", "fo", "--dt", "1e-5",
                 "--csv", "--report", "--out", str(out)])
    assert code == 0
    assert (out / "fo.csv").is_file()
    assert (out / "report.txt").is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["end_reason"] == "completed"
    assert summary["runs"][0]["samples"] == 2000


def test_comparison_run_reports_failed_band(tmp_path):
    # P&O starting at half the open-circuit voltage cannot reach the MPP within one period
    path = tmp_path / "far.yaml"
    path.write_text(SHORT_SCENARIO + "controller: {mppt_v_init_frac: 0.5}\n", encoding="utf-8")
    out = tmp_path / "both"
    code = main(["run", "--scenario", str(path), "--dt", "1e-5", "--csv", "--check", "--out", str(out)])
    assert code == 1
    assert (out / "fo.csv").is_file() and (out / "io.csv").is_file()
    doc = json.loads((out / "check.json").read_text())
    assert doc["passed"] is False
    assert "mppt_tracking" in {f["name"] for f in doc["failures"]}


def test_output_dir_from_environment(scenario_file, tmp_path, monkeypatch):
    monkeypatch.setenv("FRACGRID_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--scenario", str(scenario_file), "--controller", "io", "--dt", "1e-5"]) == 0
    assert (tmp_path / "env" / "summary.json").is_file()
