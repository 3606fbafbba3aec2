import json

import numpy as np
import pytest

from acceptance import CheckResult, evaluate, write_check
from errors import ConfigurationError
from events import EventType, SimEvent, SimEventBus
from metrics import CaseSummary
from scenario import Scenario
from session import ReportTable, RunRequest, RunSession, emit_outputs, write_csv
from sim_engine import CSV_COLUMNS, CaseSpan, SimLog

GOLDEN_HEADER = "time_s,x1_v,x2_a,x3_v,x4_a,u1,u2,beta,x1ref_v,x4ref_a,ipv_a,ppv_w,vg_v,V1,V2,V3"


def _summary(case_id=1, thd=4.5, pf=0.998, loss=5.8, settling=0.05):
    return CaseSummary(case_id, thd, pf, 1400.0, -50.0, 1492.0, 100.0 - loss, loss,
                       settled=True, settling_time=settling)


def _log(n=100, dt=1e-5, ppv=1492.0, cases=()):
    t = np.arange(n) * dt
    return SimLog.from_arrays(dt, cases=cases, time_s=t, x3_v=np.full(n, 400.0), ppv_w=np.full(n, ppv))


class TestRunRequest:
    def test_defaults(self):
        req = RunRequest()
        assert req.modes == ("fo", "io")
        assert req.scenario == "paper"

    def test_single_mode(self):
        assert RunRequest(controller="io").modes == ("io",)

    def test_invalid_controller(self):
        with pytest.raises(ConfigurationError, match="controller"):
            RunRequest(controller="pid")

    def test_invalid_workers(self):
        with pytest.raises(ConfigurationError, match="workers"):
            RunRequest(workers=0)

    def test_from_config_ignores_extra_keys(self, tmp_path):
        req = RunRequest.from_config({"out": str(tmp_path), "csv": True, "log_level": "INFO"})
        assert req.out == tmp_path
        assert req.csv


class TestWriteCsv:
    def test_golden_header(self, tmp_path):
        assert ",".join(CSV_COLUMNS) == GOLDEN_HEADER
        path = write_csv(_log(n=3), tmp_path / "fo.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == GOLDEN_HEADER
        assert len(lines) == 4
        assert float(lines[2].split(",")[0]) == pytest.approx(1e-5)

    def test_empty_log_is_header_only(self, tmp_path):
        path = write_csv(SimLog.from_arrays(1e-5, time_s=np.zeros(0)), tmp_path / "empty.csv")
        assert path.read_text().splitlines() == [GOLDEN_HEADER]


class TestReportTable:
    def test_text_report(self):
        table = ReportTable.from_summaries({"fo": [_summary()], "io": [_summary(thd=5.6)]})
        text = table.to_text()
        assert "Case 1" in text
        assert "FO IEEE pass" in text
        assert "IO IEEE FAIL" in text

    def test_csv_report(self):
        table = ReportTable.from_summaries({"fo": [_summary(), _summary(case_id=2, thd=9.0)]})
        lines = table.to_csv().splitlines()
        assert lines[0].startswith("case,mode,thd_pct,pf")
        assert lines[1].startswith("1,fo,4.5,")
        assert lines[1].endswith(",True")
        assert lines[2].endswith(",False")

    def test_rows_pair_modes(self):
        table = ReportTable.from_summaries({"fo": [_summary(), _summary(case_id=2)], "io": [_summary()]})
        assert len(table.rows) == 1
        assert set(table.rows[0]) == {"fo", "io"}


class TestEmitOutputs:
    def test_flags_gate_outputs(self, tmp_path):
        req = RunRequest(out=tmp_path, csv=True)
        paths = emit_outputs({"fo": _log()}, {"fo": []}, req)
        assert paths == [tmp_path / "fo.csv"]
        assert not (tmp_path / "report.txt").exists()

    def test_report_and_figures(self, tmp_path):
        req = RunRequest(out=tmp_path, report=True, plots=True)
        emit_outputs({"fo": _log(n=4000), "io": _log(n=4000)}, {"fo": [_summary()], "io": [_summary()]}, req)
        assert (tmp_path / "report.txt").is_file()
        assert (tmp_path / "report.csv").is_file()
        pngs = sorted(p.name for p in (tmp_path / "figures").iterdir())
        assert "grid_current.png" in pngs
        assert {"dc_link_voltage.png", "boost_duty.png", "lyapunov_v3.png"} <= set(pngs)
        assert len(pngs) == 14

    def test_scenario_adds_characteristic_figures(self, tmp_path):
        req = RunRequest(out=tmp_path, plots=True)
        paths = emit_outputs({"fo": _log(n=4000)}, {"fo": []}, req, Scenario())
        names = {p.name for p in paths}
        assert {"pv_curves_irradiance.png", "pv_curves_temperature.png", "relaxation_energy.png"} <= names
        assert len(names) == 17
        assert all(p.is_file() for p in paths)


class TestRunSession:
    def test_session_files(self, tmp_path):
        bus = SimEventBus()
        session = RunSession(RunRequest(out=tmp_path / "run"), bus)
        bus.emit(SimEvent(type=EventType.CASE_STARTED, data={"case_id": 1}, time=0.0))
        bus.emit(SimEvent(type=EventType.PROGRESS, data={"fraction": 0.5}, time=0.02))
        session.log_run("fo", _log(), [_summary()])
        path = session.finalize("completed")

        summary = json.loads(path.read_text())
        assert summary["end_reason"] == "completed"
        assert summary["csv_schema_version"] == 1
        assert summary["event_counts"] == {"case_started": 1, "progress": 1}
        assert summary["runs"][0]["mode"] == "fo"

        text = session.log_path.read_text()
        assert "case_started" in text
        assert "progress" not in text
        assert "Run FO" in text
        assert "Session ended: completed" in text


class TestAcceptance:
    def test_bands(self):
        span = CaseSpan(1, 0.0, 0.2, 1000.0, 25.0, 203.0, 1492.0)
        log = _log(n=20_000, cases=[span])
        fo, io = _summary(thd=4.1, loss=5.7), _summary(thd=5.0, pf=0.997, loss=5.9)
        results = evaluate({"fo": log, "io": log}, {"fo": [fo], "io": [io]})
        by_name = {r.name: r for r in results}
        assert by_name["mppt_tracking"].passed
        assert by_name["thd_ieee"].passed
        assert by_name["settling_time"].passed
        assert by_name["thd_fo_below_io"].passed
        assert by_name["pf_fo_not_below_io"].passed
        assert by_name["loss_fo_not_above_io"].passed
        assert by_name["efficiency"].passed
        assert all(r.passed for r in results)

    def test_lossless_skips_efficiency(self):
        log = _log(n=20_000, cases=[CaseSpan(1, 0.0, 0.2, 1000.0, 25.0, 203.0, 1492.0)])
        results = evaluate({"fo": log}, {"fo": [_summary()]}, lossless=True)
        assert "efficiency" not in {r.name for r in results}

    def test_poor_tracking_fails(self):
        log = _log(n=20_000, ppv=1000.0, cases=[CaseSpan(1, 0.0, 0.2, 1000.0, 25.0, 203.0, 1492.0)])
        [mppt] = [r for r in evaluate({"fo": log}, {"fo": []}) if r.name == "mppt_tracking"]
        assert not mppt.passed
        assert mppt.value == pytest.approx(1000.0 / 1492.0)

    def test_small_lyapunov_increases_fail(self):
        n = 20_000
        v3dot = np.where(np.arange(n) % 50 == 0, 1e-9, -1.0)
        log = SimLog.from_arrays(1e-5, cases=[CaseSpan(1, 0.0, 0.2, 1000.0, 25.0, 203.0, 1492.0)],
                                 time_s=np.arange(n) * 1e-5, x3_v=np.full(n, 400.0),
                                 ppv_w=np.full(n, 1492.0), V3dot=v3dot)
        by_name = {r.name: r for r in evaluate({"fo": log}, {"fo": [_summary()]})}
        assert by_name["lyapunov_V1"].passed
        assert not by_name["lyapunov_V3"].passed
        assert by_name["lyapunov_V3"].value == pytest.approx(0.98, abs=1e-3)

    def test_check_file(self, tmp_path):
        results = [CheckResult("thd_ieee", True, 4.1, "< 5.0 %", 1),
                   CheckResult("power_factor", False, float("nan"), ">= 0.995", 2)]
        doc = json.loads(write_check(results, tmp_path / "check.json").read_text())
        assert doc["passed"] is False
        assert doc["failures"] == [{"name": "power_factor", "passed": False, "value": None,
                                    "band": ">= 0.995", "case_id": 2}]
        assert len(doc["checks"]) == 2
