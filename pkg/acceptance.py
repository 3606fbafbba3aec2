"""Acceptance bands evaluated on a finished run (``simulate.py run --check``)."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from metrics import IEEE_THD_LIMIT, CaseSummary, lyapunov_decrease_fraction
from sim_engine import SimLog

logger = logging.getLogger(__name__)

MPPT_FRACTION = 0.985
MPPT_TAIL_S = 0.1
PF_MIN = 0.995
EFFICIENCY_BAND = (92.0, 97.0)
SETTLE_MAX_S = 0.15
LYAPUNOV_MIN = 0.99


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float | None
    band: str
    case_id: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["value"], float) and not math.isfinite(d["value"]):
            d["value"] = None
        return d


def _check(name: str, value: float | None, ok: bool, band: str, case_id: int | None = None) -> CheckResult:
    return CheckResult(name, bool(ok) and value is not None, None if value is None else float(value), band, case_id)


def mppt_tracking(log: SimLog) -> list[CheckResult]:
    """Mean PV power over the last 0.1 s of each case against the MPP oracle."""
    t = log.columns["time_s"]
    out = []
    for span in log.completed_cases:
        mask = (t >= span.t_end - MPPT_TAIL_S - 1e-12) & (t < span.t_end - 1e-12)
        if not mask.any() or span.p_mpp <= 0:
            out.append(_check("mppt_tracking", None, False, f">= {MPPT_FRACTION}", span.case_id))
            continue
        ratio = float(np.mean(log.columns["ppv_w"][mask])) / span.p_mpp
        out.append(_check("mppt_tracking", ratio, ratio >= MPPT_FRACTION, f">= {MPPT_FRACTION}", span.case_id))
    return out


def lyapunov_monitoring(log: SimLog, summaries: list[CaseSummary]) -> list[CheckResult]:
    """Share of V1 and V3 rate samples <= 0 in each settled case's steady state.

    Rates are the recorded backward differences; only roundoff is forgiven.
    """
    t = log.columns["time_s"]
    by_case = {s.case_id: s for s in summaries}
    out = []
    for span in log.completed_cases:
        summary = by_case.get(span.case_id)
        if summary is None or summary.settling_time is None:
            continue
        mask = (t >= span.t_start + summary.settling_time) & (t < span.t_end - 1e-12)
        for column in ("V1", "V3"):
            frac = lyapunov_decrease_fraction(log.columns[f"{column}dot"][mask])
            if math.isnan(frac):
                continue
            out.append(_check(f"lyapunov_{column}", frac, frac >= LYAPUNOV_MIN, f">= {LYAPUNOV_MIN}", span.case_id))
    return out


def evaluate(logs: dict[str, SimLog], summaries: dict[str, list[CaseSummary]],
             lossless: bool = False) -> list[CheckResult]:
    """Every band that applies to the modes present in *logs*.

    Single-mode bands run on the FO results when present; FO-vs-IO orderings
    need both. Efficiency bands are skipped for a lossless plant.
    """
    primary = "fo" if "fo" in logs else next(iter(logs))
    log, sums = logs[primary], summaries[primary]
    results = mppt_tracking(log)

    first = sums[0] if sums else None
    if first is not None:
        results.append(_check("settling_time", first.settling_time,
                               first.settling_time is not None and first.settling_time < SETTLE_MAX_S,
                               f"< {SETTLE_MAX_S} s", first.case_id))
        results.append(_check("thd_ieee", first.thd_pct, first.thd_pct < IEEE_THD_LIMIT,
                               f"< {IEEE_THD_LIMIT} %", first.case_id))
    for s in sums:
        results.append(_check("power_factor", s.pf, s.pf >= PF_MIN, f">= {PF_MIN}", s.case_id))
        if not lossless:
            lo, hi = EFFICIENCY_BAND
            results.append(_check("efficiency", s.efficiency_pct, lo <= s.efficiency_pct <= hi,
                                  f"[{lo}, {hi}] %", s.case_id))

    if "fo" in summaries and "io" in summaries:
        for fo, io in zip(summaries["fo"], summaries["io"]):
            results.append(_check("thd_fo_below_io", fo.thd_pct - io.thd_pct, fo.thd_pct < io.thd_pct,
                                  "FO < IO", fo.case_id))
            results.append(_check("pf_fo_not_below_io", fo.pf - io.pf, fo.pf >= io.pf, "FO >= IO", fo.case_id))
            if not lossless:
                results.append(_check("loss_fo_not_above_io", fo.loss_pct - io.loss_pct,
                                      fo.loss_pct <= io.loss_pct, "FO <= IO", fo.case_id))

    results.extend(lyapunov_monitoring(log, sums))
    failed = [r for r in results if not r.passed]
    logger.info("Acceptance: %d of %d checks passed", len(results) - len(failed), len(results))
    return results


def write_check(results: list[CheckResult], path: str | Path) -> Path:
    path = Path(path)
    failures = [r.to_dict() for r in results if not r.passed]
    doc = {"passed": not failures, "failures": failures, "checks": [r.to_dict() for r in results]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
    return path
