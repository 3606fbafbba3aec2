"""Steady-state signal analysis: THD, power factor, P/Q, efficiency and case summaries.

All spectral quantities use a plain DFT over an integer number of fundamental
periods, so harmonic k of a window holding n periods sits exactly in bin k*n.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from errors import ConfigurationError, MetricError
from power_stage import PlantParams

if TYPE_CHECKING:
    from sim_engine import SimLog

logger = logging.getLogger(__name__)

MIN_PERIODS = 5
DEFAULT_HARMONICS = 50
IEEE_THD_LIMIT = 5.0


@dataclass(frozen=True)
class AnalysisWindow:
    samples: np.ndarray
    fs: float
    f0: float
    n_periods: int

    def __post_init__(self):
        if self.n_periods < MIN_PERIODS:
            raise ConfigurationError(f"need at least {MIN_PERIODS} periods, got {self.n_periods}", "n_periods")
        if not (self.fs > 0 and self.f0 > 0):
            raise ConfigurationError("sample rate and fundamental must be positive", "fs")
        expected = round(self.n_periods * self.fs / self.f0)
        if np.ndim(self.samples) != 1 or len(self.samples) != expected:
            raise ConfigurationError(
                f"window must hold {expected} samples for {self.n_periods} periods, got {np.shape(self.samples)}",
                "samples")

    @classmethod
    def tail(cls, samples, fs: float, f0: float, n_periods: int = MIN_PERIODS) -> AnalysisWindow:
        """The last *n_periods* fundamental periods of *samples*."""
        n = round(n_periods * fs / f0)
        samples = np.asarray(samples, dtype=float)
        if n <= 0 or samples.size < n:
            raise ConfigurationError(f"signal of {samples.size} samples is shorter than {n_periods} periods",
                                     "samples")
        return cls(samples[samples.size - n:], fs, f0, n_periods)

    def fundamental_phasor(self) -> complex:
        """Complex peak amplitude of the fundamental."""
        return 2.0 * np.fft.rfft(self.samples)[self.n_periods] / len(self.samples)


class PowerReading(NamedTuple):
    p: float
    q: float


@dataclass(frozen=True)
class CaseSummary:
    case_id: int
    thd_pct: float
    pf: float
    p_real: float
    q_reactive: float
    p_pv: float
    efficiency_pct: float
    loss_pct: float
    settled: bool = True
    settling_time: float | None = None
    p_pv_min: float = math.nan

    @property
    def meets_ieee(self) -> bool:
        return self.thd_pct < IEEE_THD_LIMIT

    def to_dict(self) -> dict:
        return asdict(self)


def thd(w: AnalysisWindow, n_harmonics: int = DEFAULT_HARMONICS) -> float:
    """Harmonics 2..n_harmonics relative to the fundamental, in percent."""
    if n_harmonics < 2:
        raise ConfigurationError(f"need at least the second harmonic, got {n_harmonics}", "n_harmonics")
    if w.fs < 2 * n_harmonics * w.f0:
        raise ConfigurationError(
            f"fs={w.fs} Hz cannot resolve harmonic {n_harmonics} of {w.f0} Hz", "n_harmonics")
    spectrum = np.abs(np.fft.rfft(w.samples))
    bins = w.n_periods * np.arange(1, n_harmonics + 1)
    mags = spectrum[bins[bins < spectrum.size]]
    fundamental = mags[0]
    floor = 1e-12 * math.sqrt(float(np.sum(spectrum ** 2)))
    if fundamental == 0.0 or fundamental <= floor:
        raise MetricError("fundamental below the noise floor; THD undefined")
    return 100.0 * math.sqrt(float(np.sum(mags[1:] ** 2))) / fundamental


def _check_pair(v: AnalysisWindow, i: AnalysisWindow) -> None:
    if v.fs != i.fs or len(v.samples) != len(i.samples):
        raise ConfigurationError("voltage and current windows must share sample rate and length", "window")


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(np.square(x))))


def power_factor(v_window: AnalysisWindow, i_window: AnalysisWindow) -> float:
    """True power factor P / (V_rms I_rms)."""
    _check_pair(v_window, i_window)
    v_rms = _rms(v_window.samples)
    i_rms = _rms(i_window.samples)
    if v_rms == 0.0 or i_rms == 0.0:
        raise MetricError("zero RMS; power factor undefined")
    pf = float(np.mean(v_window.samples * i_window.samples)) / (v_rms * i_rms)
    return max(-1.0, min(1.0, pf))


def real_reactive_power(v_window: AnalysisWindow, i_window: AnalysisWindow) -> PowerReading:
    """Mean power and fundamental reactive power.

    Q > 0 when the current lags the voltage (inductive), Q < 0 when it leads.
    """
    _check_pair(v_window, i_window)
    if _rms(v_window.samples) == 0.0 or _rms(i_window.samples) == 0.0:
        raise MetricError("zero RMS; power undefined")
    p = float(np.mean(v_window.samples * i_window.samples))
    s1 = v_window.fundamental_phasor() * np.conj(i_window.fundamental_phasor())
    return PowerReading(p, 0.5 * float(s1.imag))


def efficiency(p_grid: float, p_pv: float) -> float:
    if not p_pv > 0:
        raise MetricError(f"PV power must be positive, got {p_pv}")
    return 100.0 * p_grid / p_pv


def settling_time(t: np.ndarray, x3: np.ndarray, ref: float, band_frac: float, period: float) -> float | None:
    """Time from t[0] until x3 has spent one full *period* inside ref*(1 +/- band_frac).

    Returns None when no such interval exists.
    """
    if t.size == 0:
        return None
    inside = np.abs(x3 - ref) <= band_frac * abs(ref)
    run_start = None
    tol = 1e-9 * period
    for k in range(t.size):
        if inside[k]:
            if run_start is None:
                run_start = t[k]
            if t[k] - run_start >= period - tol:
                return float(run_start + period - t[0])
        else:
            run_start = None
    return None


class TimeSpan(NamedTuple):
    t_start: float
    t_end: float


def _metric_or_nan(fn, *args) -> float:
    try:
        return fn(*args)
    except MetricError as exc:
        logger.warning("%s", exc)
        return math.nan


def summarize_case(log: SimLog, case_window, band_frac: float = 0.02, n_periods: int = MIN_PERIODS,
                   n_harmonics: int = DEFAULT_HARMONICS) -> CaseSummary:
    """Per-case THD, PF, P, Q, PV power and efficiency over the last grid periods.

    *case_window* is any object with ``t_start``/``t_end`` (and optionally
    ``case_id``). Full-rate windows recorded by the engine are used when they
    cover the end of the span; otherwise the decimated columns are analysed.
    Efficiency is taken against the PV power left after the change in stored
    energy over a full-rate window, so it books conduction losses only.
    """
    t0, t1 = float(case_window.t_start), float(case_window.t_end)
    case_id = int(getattr(case_window, "case_id", 0))
    if not t1 > t0:
        raise ConfigurationError(f"case window [{t0}, {t1}] has no length", "case_window")
    t = log.columns["time_s"]
    if t.size == 0 or t0 < t[0] - 1e-12 or t1 > log.t_end + 1e-9:
        raise ConfigurationError(f"case window [{t0}, {t1}] is not inside the log", "case_window")

    f0 = log.grid_freq
    mask = (t >= t0 - 1e-12) & (t < t1 - 1e-12)
    settle = settling_time(t[mask], log.columns["x3_v"][mask], log.v_dc_ref, band_frac, 1.0 / f0)
    p_pv_min = float(np.min(log.columns["ppv_w"][mask])) if mask.any() else math.nan

    window = log.windows.get(case_id)
    storing = 0.0
    if window is not None and abs(window.t_end - t1) < 1e-9:
        fs, v, i, p = window.fs, window.v_g, window.i_g, window.p_pv
        if abs((window.t_end - window.t_start) * f0 - n_periods) < 1e-6:
            storing = window.stored_energy_change * f0 / n_periods
    else:
        fs = 1.0 / (log.dt * log.decimation)
        v, i, p = (log.columns[c][mask] for c in ("vg_v", "x4_a", "ppv_w"))
    v_w = AnalysisWindow.tail(v, fs, f0, n_periods)
    i_w = AnalysisWindow.tail(i, fs, f0, n_periods)
    p_pv = float(np.mean(AnalysisWindow.tail(p, fs, f0, n_periods).samples))

    if settle is None:
        logger.warning("case %d never settled within %.1f %%; metrics withheld", case_id, 100 * band_frac)
        nan = math.nan
        return CaseSummary(case_id, nan, nan, nan, nan, p_pv, nan, nan, False, None, p_pv_min)

    thd_pct = _metric_or_nan(thd, i_w, n_harmonics)
    pf = _metric_or_nan(power_factor, v_w, i_w)
    try:
        p_real, q = real_reactive_power(v_w, i_w)
    except MetricError:
        p_real = q = math.nan
    eff = _metric_or_nan(efficiency, p_real, p_pv - storing)
    return CaseSummary(case_id=case_id, thd_pct=thd_pct, pf=max(0.0, pf) if not math.isnan(pf) else pf,
                       p_real=p_real, q_reactive=q, p_pv=p_pv, efficiency_pct=eff, loss_pct=100.0 - eff,
                       settled=True, settling_time=settle, p_pv_min=p_pv_min)


def rolling_power_quality(log: SimLog, n_periods: int = 1) -> dict[str, np.ndarray]:
    """P, Q, PF and mean PV power per block of *n_periods* grid periods of the decimated log."""
    t = log.columns["time_s"]
    fs = 1.0 / (log.dt * log.decimation)
    block = round(n_periods * fs / log.grid_freq)
    n_blocks = t.size // block if block else 0
    out = {k: np.full(n_blocks, math.nan) for k in ("t", "p", "q", "pf", "p_pv")}
    v_all, i_all = log.columns["vg_v"], log.columns["x4_a"]
    for b in range(n_blocks):
        sl = slice(b * block, (b + 1) * block)
        v, i = v_all[sl], i_all[sl]
        out["t"][b] = t[sl][-1]
        out["p"][b] = float(np.mean(v * i))
        out["p_pv"][b] = float(np.mean(log.columns["ppv_w"][sl]))
        v_rms, i_rms = _rms(v), _rms(i)
        if v_rms > 0 and i_rms > 0:
            out["pf"][b] = out["p"][b] / (v_rms * i_rms)
            v1 = 2.0 * np.fft.rfft(v)[n_periods] / block
            i1 = 2.0 * np.fft.rfft(i)[n_periods] / block
            out["q"][b] = 0.5 * float((v1 * np.conj(i1)).imag)
    return out


def energy_residual(log: SimLog, plant: PlantParams, t0: float, t1: float) -> float:
    """Stored-energy bookkeeping error over [t0, t1], relative to the PV energy delivered."""
    c = log.columns
    mask = (c["time_s"] >= t0) & (c["time_s"] <= t1)
    if np.count_nonzero(mask) < 2:
        raise ConfigurationError(f"no samples in [{t0}, {t1}]", "window")
    t = c["time_s"][mask]
    x1, x2, x3, x4 = (c[k][mask] for k in ("x1_v", "x2_a", "x3_v", "x4_a"))
    stored = 0.5 * (plant.c_pv * x1 ** 2 + plant.l_o * x2 ** 2 + plant.c_dc * x3 ** 2 + plant.l_g * x4 ** 2)
    p_in = c["ppv_w"][mask]
    p_out = c["vg_v"][mask] * x4
    p_loss = (plant.r_lo + c["u1"][mask] * plant.r_on) * x2 ** 2 + (plant.r_lg + 2.0 * plant.r_on) * x4 ** 2
    e_in = float(trapezoid(p_in, t))
    if e_in <= 0:
        raise MetricError("no PV energy delivered in the window")
    balance = float(trapezoid(p_in - p_out - p_loss, t))
    return abs((stored[-1] - stored[0]) - balance) / e_in


def lyapunov_decrease_fraction(rates, tol: float = 0.0) -> float:
    """Share of finite Lyapunov rate samples V-dot that are <= tol."""
    r = np.asarray(rates, dtype=float)
    r = r[np.isfinite(r)]
    if r.size == 0:
        return math.nan
    return float(np.count_nonzero(r <= tol)) / r.size
