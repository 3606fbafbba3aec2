"""Fixed-step closed-loop simulation of the grid-tied PV system.

The plant is advanced with RK4 (averaged model) or forward Euler (switched
model); the controller loops run on their own rate grids and hold their
outputs in between. Every run is deterministic.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from controllers import get_stack
from errors import ConfigurationError, DivergenceError
from events import EventType, SimEvent, SimEventBus
from metrics import MIN_PERIODS, CaseSummary, TimeSpan, settling_time, summarize_case
from power_stage import (
    ControlInputs,
    PlantParams,
    PlantState,
    derivatives,
    grid_voltage,
    pwm_switch_states,
    stored_energy,
)
from pv_model import STC, PVSource, mpp_oracle, open_circuit_voltage
from scenario import Scenario, step_count, validate_scenario

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "time_s", "x1_v", "x2_a", "x3_v", "x4_a", "u1", "u2", "beta", "x1ref_v", "x4ref_a",
    "ipv_a", "ppv_w", "vg_v", "V1", "V2", "V3",
)
# Kept in the log but not written to CSV
RATE_COLUMNS = ("V1dot", "V2dot", "V3dot")
LOG_COLUMNS = CSV_COLUMNS + RATE_COLUMNS
DIVERGENCE_LIMIT = 1e6
# Full-rate metric windows are stored at no more than this many samples per grid period
WINDOW_SAMPLES_PER_PERIOD = 20_000


@dataclass(frozen=True)
class CaseSpan:
    case_id: int
    t_start: float
    t_end: float
    irradiance: float
    temperature: float
    v_mpp: float
    p_mpp: float


@dataclass
class CaseWindow:
    """Undecimated signals over the last grid periods of one case."""

    case_id: int
    fs: float
    t_start: float
    t_end: float
    v_g: np.ndarray
    i_g: np.ndarray
    p_pv: np.ndarray
    x3: np.ndarray
    # J, state energy at t_end minus at t_start
    stored_energy_change: float = 0.0


@dataclass
class SimLog:
    columns: dict[str, np.ndarray]
    dt: float
    decimation: int
    t_end: float
    grid_freq: float = 50.0
    v_dc_ref: float = 400.0
    mode: str = "fo"
    fidelity: str = "averaged"
    scenario_name: str = ""
    cases: list[CaseSpan] = field(default_factory=list)
    windows: dict[int, CaseWindow] = field(default_factory=dict)
    events: list[tuple[float, str, dict]] = field(default_factory=list)
    saturation_counts: dict[str, int] = field(default_factory=dict)
    low_dc_link_count: int = 0
    aborted: bool = False

    def __len__(self) -> int:
        return int(self.columns["time_s"].size)

    @property
    def completed_cases(self) -> list[CaseSpan]:
        return [c for c in self.cases if c.t_end <= self.t_end + 1e-9]

    @property
    def analysable_cases(self) -> list[CaseSpan]:
        """Completed cases long enough for the steady-state metric window."""
        span = MIN_PERIODS / self.grid_freq - 1e-9
        return [c for c in self.completed_cases if c.t_end - c.t_start >= span]

    def identical(self, other: SimLog) -> bool:
        """Same recorded samples and event timeline, bit for bit."""
        if set(self.columns) != set(other.columns):
            return False
        if [(t, kind) for t, kind, _ in self.events] != [(t, kind) for t, kind, _ in other.events]:
            return False
        return all(np.array_equal(self.columns[k], other.columns[k], equal_nan=True) for k in self.columns)

    @classmethod
    def from_arrays(cls, dt: float, decimation: int = 1, cases=(), **arrays) -> SimLog:
        """Build a log from column arrays; missing columns are zero-filled."""
        n = len(arrays["time_s"])
        columns = {name: np.asarray(arrays.get(name, np.zeros(n)), dtype=float) for name in LOG_COLUMNS}
        t_end = float(columns["time_s"][-1] + dt * decimation) if n else 0.0
        return cls(columns=columns, dt=dt, decimation=decimation, t_end=t_end, cases=list(cases))


@dataclass(frozen=True)
class SettleResult:
    case_id: int
    settling_time: float | None

    @property
    def settled(self) -> bool:
        return self.settling_time is not None


@dataclass
class ComparisonResult:
    fo: SimLog
    io: SimLog
    summaries: list[tuple[CaseSummary, CaseSummary]]


def _empty_columns() -> dict[str, np.ndarray]:
    return {name: np.zeros(0) for name in LOG_COLUMNS}


def _rk4(x1, x2, x3, x4, u1, u2, t, dt, source: PVSource, p: PlantParams):
    half = 0.5 * dt
    vg0 = grid_voltage(t, p)
    vgm = grid_voltage(t + half, p)
    vg1 = grid_voltage(t + dt, p)
    a = derivatives(x1, x2, x3, x4, u1, u2, source.current(x1), vg0, p)
    y1 = x1 + half * a[0]
    b = derivatives(y1, x2 + half * a[1], x3 + half * a[2], x4 + half * a[3], u1, u2,
                    source.current(y1), vgm, p)
    y1 = x1 + half * b[0]
    c = derivatives(y1, x2 + half * b[1], x3 + half * b[2], x4 + half * b[3], u1, u2,
                    source.current(y1), vgm, p)
    y1 = x1 + dt * c[0]
    d = derivatives(y1, x2 + dt * c[1], x3 + dt * c[2], x4 + dt * c[3], u1, u2,
                    source.current(y1), vg1, p)
    k = dt / 6.0
    return (
        x1 + k * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
        x2 + k * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
        x3 + k * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2]),
        x4 + k * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3]),
    )


def run(sc: Scenario, bus: SimEventBus | None = None) -> SimLog:
    """Simulate *sc* and return its decimated log plus full-rate case windows.

    Raises DivergenceError when any state magnitude reaches 1e6 or becomes
    non-finite. An empty schedule yields an empty log.
    """
    sc = validate_scenario(sc)
    dt = sc.effective_dt
    plant = sc.plant
    dec = sc.decimation
    events: list[tuple[float, str, dict]] = []

    def emit(kind: EventType, t: float, message: str | None = None, **data):
        events.append((t, kind.name.lower(), data))
        if bus:
            bus.emit(SimEvent(type=kind, data=data, time=t, message=message))

    log = SimLog(columns=_empty_columns(), dt=dt, decimation=dec, t_end=0.0, grid_freq=plant.grid_freq,
                 v_dc_ref=sc.controller.v_dc_ref, mode=sc.mode, fidelity=sc.fidelity,
                 scenario_name=sc.name, events=events)
    if not sc.schedule:
        logger.info("Scenario '%s' has an empty schedule; nothing to simulate", sc.name)
        return log

    arr = sc.pv.build_array()
    source = PVSource(arr, sc.schedule[0].env)
    v_oc_stc = open_circuit_voltage(arr, STC)
    stack = get_stack(sc.mode)(sc.controller, plant, v_oc_stc)
    cfg = stack.cfg
    if sc.initial_state is not None:
        x1, x2, x3, x4 = sc.initial_state
    else:
        x1, x2, x3, x4 = 0.9 * v_oc_stc, 0.0, cfg.v_dc_ref, 0.0

    n_v = step_count(1.0 / cfg.rate_voltage_loop, dt, "voltage-loop period")
    n_i = step_count(1.0 / cfg.rate_current_loop, dt, "current-loop period")
    n_mppt = step_count(cfg.mppt_period, dt, "MPPT period")
    n_period = step_count(plant.grid_period, dt, "grid period")
    n_win = MIN_PERIODS * n_period
    stride = max(1, n_period // WINDOW_SAMPLES_PER_PERIOD)
    if n_period % stride:
        stride = 1
    switched = sc.fidelity == "switched"

    logger.info("Run '%s': mode=%s fidelity=%s dt=%g s, %d case(s), %.3f s",
                sc.name, sc.mode, sc.fidelity, dt, len(sc.schedule), sc.duration)
    emit(EventType.RUN_STARTED, 0.0, scenario=sc.name, mode=sc.mode, fidelity=sc.fidelity, dt=dt)
    started = time.perf_counter()

    rows: list[tuple[float, ...]] = []
    u1 = u2 = beta = 0.0
    k = 0
    k_start = 0
    aborted = False
    for case_id, seg in enumerate(sc.schedule, start=1):
        k_end = k_start + step_count(seg.duration, dt, "segment duration")
        env = seg.env
        source.set_environment(env)
        stack.set_open_circuit_voltage(source.v_oc)
        mpp = mpp_oracle(arr, env)
        span = CaseSpan(case_id, k_start * dt, k_end * dt, env.irradiance, env.temperature, mpp.v_mpp, mpp.p_mpp)
        log.cases.append(span)
        emit(EventType.CASE_STARTED, span.t_start, case_id=case_id, irradiance=env.irradiance,
             temperature=env.temperature, p_mpp=mpp.p_mpp)
        logger.debug("case %d: G=%g W/m2 T=%g C, MPP %.1f W at %.2f V",
                     case_id, env.irradiance, env.temperature, mpp.p_mpp, mpp.v_mpp)

        k_win = k_end - n_win if k_end - k_start >= n_win else None
        buf: dict[str, list[float]] = {"v_g": [], "i_g": [], "p_pv": [], "x3": []}
        e_win = 0.0

        for k in range(k_start, k_end):
            t = k * dt
            i_pv = source.current(x1)
            s = PlantState(x1, x2, x3, x4)
            if k % n_mppt == 0:
                stack.mppt(x1, i_pv)
            if k % n_v == 0:
                u1 = stack.voltage_loop(s, i_pv)
            v_g = grid_voltage(t, plant)
            if k % n_i == 0:
                beta = stack.dc_link(x3)
                u2 = stack.current_loop(s, v_g, beta)
            for kind, data in stack.drain_events():
                emit(EventType[kind.upper()], t, **data)

            if k % dec == 0 or k % n_period == 0:
                pr = stack.probe()
                rows.append((t, x1, x2, x3, x4, u1, u2, beta, stack.x1_ref, stack.loops.x4_ref,
                             i_pv, x1 * i_pv, v_g, pr.v1, pr.v2, pr.v3, pr.v1_dot, pr.v2_dot, pr.v3_dot))
            if k == k_win:
                e_win = stored_energy(s, plant)
            if k_win is not None and k >= k_win and (k - k_win) % stride == 0:
                buf["v_g"].append(v_g)
                buf["i_g"].append(x4)
                buf["p_pv"].append(x1 * i_pv)
                buf["x3"].append(x3)

            if switched:
                sw = pwm_switch_states(ControlInputs(u1, u2), t, plant)
                d = derivatives(x1, x2, x3, x4, sw.mu1, sw.mu2, i_pv, v_g, plant)
                x1, x2, x3, x4 = x1 + dt * d[0], x2 + dt * d[1], x3 + dt * d[2], x4 + dt * d[3]
            else:
                x1, x2, x3, x4 = _rk4(x1, x2, x3, x4, u1, u2, t, dt, source, plant)
            x1 = max(x1, 0.0)
            x3 = max(x3, 0.0)

            if not (abs(x1) < DIVERGENCE_LIMIT and abs(x2) < DIVERGENCE_LIMIT
                    and abs(x3) < DIVERGENCE_LIMIT and abs(x4) < DIVERGENCE_LIMIT):
                err = DivergenceError(t + dt, (x1, x2, x3, x4))
                emit(EventType.RUN_ERROR, t + dt, message=str(err), error=str(err))
                logger.error("%s", err)
                raise err

            if (k + 1) % n_period == 0:
                emit(EventType.PROGRESS, (k + 1) * dt, case_id=case_id,
                     fraction=(k + 1) * dt / sc.duration, x3=x3, p_pv=x1 * i_pv)
                if bus and bus.stop_requested:
                    aborted = True
                    k += 1
                    break
        else:
            k = k_end

        if aborted:
            break
        if k_win is not None:
            log.windows[case_id] = CaseWindow(case_id, 1.0 / (dt * stride), k_win * dt, k_end * dt,
                                              *(np.asarray(buf[n]) for n in ("v_g", "i_g", "p_pv", "x3")),
                                              stored_energy(PlantState(x1, x2, x3, x4), plant) - e_win)
        emit(EventType.CASE_FINISHED, k_end * dt, case_id=case_id)
        k_start = k_end

    if rows:
        data = np.asarray(rows, dtype=float)
        log.columns = {name: data[:, j].copy() for j, name in enumerate(LOG_COLUMNS)}
    log.t_end = k * dt
    log.aborted = aborted
    log.saturation_counts = dict(stack.loops.saturation_counts)
    log.low_dc_link_count = stack.loops.low_dc_link_count
    elapsed = time.perf_counter() - started
    emit(EventType.RUN_FINISHED, log.t_end, message="stopped" if aborted else "completed",
         samples=len(log), aborted=aborted)
    logger.info("Run '%s' (%s) %s after %.1f s wall time, %d samples",
                sc.name, sc.mode, "stopped" if aborted else "finished", elapsed, len(log))
    return log


def _replay(log: SimLog, bus: SimEventBus) -> None:
    for t, kind, data in log.events:
        bus.emit(SimEvent(type=EventType[kind.upper()], data=data, time=t))


def run_comparison(sc: Scenario, workers: int = 1, bus: SimEventBus | None = None) -> ComparisonResult:
    """Run the FO and IO stacks on the same scenario and pair their case summaries.

    With workers > 1 both runs execute in worker processes; their events are
    replayed on *bus* afterwards.
    """
    variants = [replace(sc, mode="fo"), replace(sc, mode="io")]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(variants))) as pool:
            fo, io = pool.map(run, variants)
        if bus:
            _replay(fo, bus)
            _replay(io, bus)
    else:
        fo, io = (run(v, bus) for v in variants)

    summaries = []
    io_ids = {c.case_id for c in io.analysable_cases}
    for span in fo.analysable_cases:
        if span.case_id not in io_ids:
            break
        summaries.append((summarize_case(fo, span), summarize_case(io, span)))
    return ComparisonResult(fo=fo, io=io, summaries=summaries)


def settle_detect(log: SimLog, band_frac: float = 0.02) -> list[SettleResult]:
    """Per case, the time from case start until x3 stays in band for one grid period."""
    if len(log) == 0:
        raise ConfigurationError("cannot detect settling on an empty log", "log")
    if not 0.0 < band_frac < 1.0:
        raise ConfigurationError(f"must lie in (0, 1), got {band_frac}", "band_frac")
    t = log.columns["time_s"]
    x3 = log.columns["x3_v"]
    spans = log.cases or [TimeSpan(float(t[0]), log.t_end)]
    results = []
    for n, span in enumerate(spans, start=1):
        case_id = getattr(span, "case_id", n)
        mask = (t >= span.t_start - 1e-12) & (t < span.t_end - 1e-12)
        settle = settling_time(t[mask], x3[mask], log.v_dc_ref, band_frac, 1.0 / log.grid_freq)
        if settle is None:
            logger.warning("case %d: DC link never settled within %.1f %%", case_id, 100 * band_frac)
        results.append(SettleResult(case_id, settle))
    return results


__all__ = [
    "CSV_COLUMNS", "CSV_SCHEMA_VERSION", "LOG_COLUMNS", "RATE_COLUMNS", "CaseSpan", "CaseWindow",
    "ComparisonResult", "SettleResult",
    "SimLog", "run", "run_comparison", "settle_detect",
]
