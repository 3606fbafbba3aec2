"""Single-diode photovoltaic source: I-V solving, parameter extraction and MPP oracle."""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import constants, optimize

from errors import ConfigurationError, ExtractionError, SolverError

logger = logging.getLogger(__name__)

T_REF_C = 25.0
G_REF = 1000.0
BANDGAP_EV = 1.12
MAX_NEWTON = 100
RESIDUAL_TOL = 1e-9
IDEALITY_GRID = tuple(round(1.0 + 0.05 * k, 2) for k in range(21))


def _kelvin(t_c: float) -> float:
    return t_c + constants.zero_Celsius


@dataclass(frozen=True)
class EnvironmentInput:
    irradiance: float = G_REF
    temperature: float = T_REF_C

    def __post_init__(self):
        if not 0.0 <= self.irradiance <= 1500.0:
            raise ConfigurationError(f"must lie in [0, 1500] W/m^2, got {self.irradiance}", "irradiance")
        if not -40.0 <= self.temperature <= 90.0:
            raise ConfigurationError(f"must lie in [-40, 90] C, got {self.temperature}", "temperature")


STC = EnvironmentInput()


@dataclass(frozen=True)
class Datasheet:
    """Per-panel datasheet values at STC."""

    v_oc: float = 36.4
    i_sc: float = 7.84
    v_mpp: float = 29.0
    p_max: float = 215.0
    n_s_cells: int = 60
    k_i: float = 0.03

    @property
    def i_mpp(self) -> float:
        return self.p_max / self.v_mpp


# Soltech 1STH-215-P
SOLTECH_215 = Datasheet()


@dataclass(frozen=True)
class PVPanelParams:
    i_ph_stc: float
    i_0_stc: float
    r_s: float
    r_p: float
    a: float
    n_s_cells: int = 60
    k_i: float = 0.03

    def __post_init__(self):
        if not self.i_ph_stc > 0:
            raise ConfigurationError(f"must be positive, got {self.i_ph_stc}", "i_ph_stc")
        if not self.i_0_stc > 0:
            raise ConfigurationError(f"must be positive, got {self.i_0_stc}", "i_0_stc")
        if not self.r_s >= 0:
            raise ConfigurationError(f"must be non-negative, got {self.r_s}", "r_s")
        if not self.r_p > 0:
            raise ConfigurationError(f"must be positive, got {self.r_p}", "r_p")
        if not 1.0 <= self.a <= 2.0:
            raise ConfigurationError(f"must lie in [1, 2], got {self.a}", "a")
        if self.n_s_cells < 1:
            raise ConfigurationError(f"must be >= 1, got {self.n_s_cells}", "n_s_cells")

    def modified_ideality(self, t_c: float) -> float:
        """a * Ns * kT/q in volts."""
        return self.a * self.n_s_cells * constants.k * _kelvin(t_c) / constants.e


@dataclass(frozen=True)
class PVArray:
    panel: PVPanelParams
    n_series_panels: int = 7
    n_parallel_strings: int = 1

    def __post_init__(self):
        if self.n_series_panels < 1:
            raise ConfigurationError(f"must be >= 1, got {self.n_series_panels}", "n_series_panels")
        if self.n_parallel_strings < 1:
            raise ConfigurationError(f"must be >= 1, got {self.n_parallel_strings}", "n_parallel_strings")


class CellConditions(NamedTuple):
    """Effective single-diode parameters of one panel at a given environment."""

    i_ph: float
    i_0: float
    a_vt: float
    r_s: float
    r_p: float


class MPPResult(NamedTuple):
    v_mpp: float
    p_mpp: float


def apply_environment(params: PVPanelParams, env: EnvironmentInput) -> CellConditions:
    """Translate STC parameters to the operating environment.

    Photocurrent is linear in irradiance with a short-circuit temperature
    coefficient; the saturation current follows the cubic temperature law
    with a silicon band gap.
    """
    t_ref = _kelvin(T_REF_C)
    t = _kelvin(env.temperature)
    i_ph = env.irradiance / G_REF * (params.i_ph_stc + params.k_i * (env.temperature - T_REF_C))
    gap = constants.e * BANDGAP_EV / (params.a * constants.k)
    i_0 = params.i_0_stc * (t / t_ref) ** 3 * math.exp(gap * (1.0 / t_ref - 1.0 / t))
    return CellConditions(max(i_ph, 0.0), i_0, params.modified_ideality(env.temperature), params.r_s, params.r_p)


def _residual(i, v, c: CellConditions):
    vd = v + i * c.r_s
    return c.i_ph - c.i_0 * np.expm1(np.minimum(vd / c.a_vt, 700.0)) - vd / c.r_p - i


def _slope(i, v, c: CellConditions):
    vd = v + i * c.r_s
    return -c.i_0 * c.r_s / c.a_vt * np.exp(np.minimum(vd / c.a_vt, 700.0)) - c.r_s / c.r_p - 1.0


def _bisect_panel(v: np.ndarray, c: CellConditions, tol: float) -> np.ndarray:
    hi = np.full_like(v, c.i_ph + 1e-12)
    lo = np.full_like(v, -1.0)
    for _ in range(200):
        neg = _residual(lo, v, c) < 0
        if not neg.any():
            break
        lo = np.where(neg, 2.0 * lo, lo)
    else:
        raise SolverError("could not bracket the PV current root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _residual(mid, v, c)
        lo = np.where(f > 0, mid, lo)
        hi = np.where(f > 0, hi, mid)
        if np.all(hi - lo < 1e-13) or np.all(np.abs(f) < tol):
            break
    mid = 0.5 * (lo + hi)
    if np.any(np.abs(_residual(mid, v, c)) >= tol):
        raise SolverError("bisection did not reach the residual tolerance")
    return mid


def _newton_panel(v: np.ndarray, c: CellConditions, tol: float) -> np.ndarray:
    # f(i) is concave and decreasing, so Newton started at i_ph approaches the root from the right.
    i = np.full_like(v, c.i_ph)
    f = _residual(i, v, c)
    for _ in range(MAX_NEWTON):
        active = np.abs(f) >= tol
        if not active.any():
            return i
        step = np.where(active, f / _slope(i, v, c), 0.0)
        cand = i - step
        f_cand = _residual(cand, v, c)
        for _ in range(30):
            worse = active & (np.abs(f_cand) > np.abs(f))
            if not worse.any():
                break
            step = np.where(worse, 0.5 * step, step)
            cand = i - step
            f_cand = _residual(cand, v, c)
        i, f = cand, f_cand
    stuck = np.abs(f) >= tol
    logger.debug("Newton left %d of %d points unconverged; bisecting", int(stuck.sum()), v.size)
    i = i.copy()
    i[stuck] = _bisect_panel(v[stuck], c, tol)
    return i


def pv_current(v, env: EnvironmentInput, arr: PVArray, method: str = "newton"):
    """Array terminal current at voltage *v*.

    Parameters
    ----------
    v : float or array-like
        Array terminal voltage [V], within [0, 1.05 * V_oc].
    env : EnvironmentInput
        Irradiance and cell temperature.
    arr : PVArray
        Panel parameters and series/parallel counts.
    method : str, default "newton"
        ``"newton"`` (damped, bisection fallback) or ``"bisect"``.

    Returns
    -------
    float or numpy.ndarray
        Terminal current [A] with implicit-equation residual below 1e-9 A.
    """
    if method not in ("newton", "bisect"):
        raise ConfigurationError(f"unknown solver '{method}'", "method")
    c = apply_environment(arr.panel, env)
    v_arr = np.asarray(v, dtype=float)
    v_panel = np.atleast_1d(v_arr / arr.n_series_panels)
    tol = RESIDUAL_TOL / arr.n_parallel_strings
    solver = _newton_panel if method == "newton" else _bisect_panel
    i = arr.n_parallel_strings * solver(v_panel, c, tol)
    return float(i[0]) if v_arr.ndim == 0 else i.reshape(v_arr.shape)


def open_circuit_voltage(arr: PVArray, env: EnvironmentInput) -> float:
    """Array voltage at which the terminal current vanishes."""
    c = apply_environment(arr.panel, env)
    if c.i_ph <= 0.0:
        return 0.0
    upper = c.a_vt * math.log1p(c.i_ph / c.i_0)

    def f(vp):
        return c.i_ph - c.i_0 * math.expm1(vp / c.a_vt) - vp / c.r_p

    if f(upper) >= 0.0:
        v_panel = upper
    else:
        v_panel = optimize.brentq(f, 0.0, upper, xtol=1e-12)
    return arr.n_series_panels * v_panel


def mpp_oracle(arr: PVArray, env: EnvironmentInput) -> MPPResult:
    """Global maximum power point by 10 mV scan plus golden-section refinement."""
    v_oc = open_circuit_voltage(arr, env)
    if v_oc <= 0.0:
        return MPPResult(0.0, 0.0)
    grid = np.arange(0.0, v_oc, 0.01)
    power = grid * pv_current(grid, env, arr)
    k = int(np.argmax(power))
    if 0 < k < grid.size - 1:
        res = optimize.minimize_scalar(lambda v: -v * pv_current(v, env, arr),
                                       bracket=(grid[k - 1], grid[k], grid[k + 1]),
                                       method="golden", tol=1e-10)
        if -res.fun >= power[k]:
            return MPPResult(float(res.x), float(-res.fun))
    return MPPResult(float(grid[k]), float(power[k]))


class PVSource:
    """Scalar, warm-started current evaluation for the time-stepping engine."""

    def __init__(self, arr: PVArray, env: EnvironmentInput = STC):
        self.arr = arr
        self._last = 0.0
        self.set_environment(env)

    def set_environment(self, env: EnvironmentInput) -> None:
        self.env = env
        self.conditions = apply_environment(self.arr.panel, env)
        self._last = self.conditions.i_ph
        self.v_oc = open_circuit_voltage(self.arr, env)

    def current(self, v: float) -> float:
        c = self.conditions
        ns = self.arr.n_series_panels
        npar = self.arr.n_parallel_strings
        vp = v / ns
        tol = RESIDUAL_TOL / npar
        i = self._last
        for _ in range(MAX_NEWTON):
            vd = vp + i * c.r_s
            x = vd / c.a_vt
            if x > 700.0:
                break
            e = math.exp(x)
            f = c.i_ph - c.i_0 * (e - 1.0) - vd / c.r_p - i
            if abs(f) < tol:
                self._last = i
                return npar * i
            i -= f / (-c.i_0 * c.r_s / c.a_vt * e - c.r_s / c.r_p - 1.0)
        result = pv_current(v, self.env, self.arr)
        self._last = result / npar
        return result


def _fit_residuals(x, ds: Datasheet, a_vt: float) -> np.ndarray:
    i_ph, log_i0, r_s, log_rp = x
    i_0 = math.exp(log_i0)
    r_p = math.exp(log_rp)
    i_mp = ds.i_mpp
    vd_sc = ds.i_sc * r_s
    vd_mp = ds.v_mpp + i_mp * r_s
    e_mp = math.exp(vd_mp / a_vt)
    g = i_0 / a_vt * e_mp + 1.0 / r_p
    return np.array([
        10.0 * (i_ph - i_0 * math.expm1(vd_sc / a_vt) - vd_sc / r_p - ds.i_sc),
        10.0 * (i_ph - i_0 * math.expm1(ds.v_oc / a_vt) - ds.v_oc / r_p),
        10.0 * (i_ph - i_0 * (e_mp - 1.0) - vd_mp / r_p - i_mp),
        i_mp - ds.v_mpp * g / (1.0 + g * r_s),
    ]) / ds.i_sc


def datasheet_errors(params: PVPanelParams, ds: Datasheet) -> tuple[float, float, float]:
    """Relative misfit at short circuit, open circuit and the rated MPP."""
    panel = PVArray(params, 1, 1)
    i_sc = pv_current(0.0, STC, panel)
    i_oc = pv_current(ds.v_oc, STC, panel)
    p_mp = ds.v_mpp * pv_current(ds.v_mpp, STC, panel)
    return (abs(i_sc - ds.i_sc) / ds.i_sc,
            abs(i_oc) / ds.i_sc,
            abs(p_mp - ds.p_max) / ds.p_max)


@functools.lru_cache(maxsize=16)
def fit_single_diode(ds: Datasheet, a: float = 1.3, ideal: bool = False) -> PVPanelParams:
    """Extract five single-diode parameters from datasheet values.

    With ``ideal=True`` the series resistance is zero and the shunt infinite,
    so short-circuit current and open-circuit voltage are reproduced exactly.
    Otherwise ``a`` is fixed, the remaining four parameters are solved from
    the short-circuit, open-circuit and MPP conditions plus dP/dV = 0 at the
    MPP, and the ideality grid is searched when the first choice does not
    reproduce the datasheet within 2 %.
    """
    if not (0 < ds.v_mpp < ds.v_oc):
        raise ExtractionError(f"need 0 < V_mpp < V_oc, got V_mpp={ds.v_mpp}, V_oc={ds.v_oc}")
    if not (0 < ds.i_mpp < ds.i_sc):
        raise ExtractionError(f"need P_max/V_mpp < I_sc, got {ds.i_mpp:.4g} >= {ds.i_sc}")

    vt = ds.n_s_cells * constants.k * _kelvin(T_REF_C) / constants.e
    if ideal:
        i_0 = ds.i_sc / math.expm1(ds.v_oc / (a * vt))
        return PVPanelParams(ds.i_sc, i_0, 0.0, math.inf, a, ds.n_s_cells, ds.k_i)

    best: tuple[float, PVPanelParams] | None = None
    for a_try in (a,) + tuple(x for x in IDEALITY_GRID if x != a):
        a_vt = a_try * vt
        i0_guess = ds.i_sc / math.expm1(ds.v_oc / a_vt)
        x0 = [ds.i_sc, math.log(i0_guess), 0.2, math.log(300.0)]
        lower = [0.9 * ds.i_sc, math.log(i0_guess) - 15.0, 0.0, 0.0]
        upper = [1.2 * ds.i_sc, math.log(i0_guess) + 15.0, 0.5 * ds.v_mpp / ds.i_mpp, math.log(1e6)]
        x0 = np.clip(x0, lower, upper)
        try:
            sol = optimize.least_squares(_fit_residuals, x0, bounds=(lower, upper), args=(ds, a_vt),
                                         xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
        except (ValueError, OverflowError) as exc:
            logger.debug("fit at a=%.2f failed: %s", a_try, exc)
            continue
        i_ph, log_i0, r_s, log_rp = sol.x
        try:
            params = PVPanelParams(i_ph, math.exp(log_i0), r_s, math.exp(log_rp), a_try, ds.n_s_cells, ds.k_i)
            misfit = max(datasheet_errors(params, ds))
        except (ConfigurationError, SolverError, OverflowError):
            continue
        logger.debug("fit a=%.2f cost=%.3e misfit=%.3e", a_try, sol.cost, misfit)
        if misfit <= 0.02 and (best is None or sol.cost < best[0]):
            best = (sol.cost, params)
        if a_try == a and best is not None and sol.cost < 1e-12:
            break
    if best is None:
        raise ExtractionError(f"no single-diode parameter set reproduces {ds} within 2 %")
    params = best[1]
    logger.info("Single-diode fit: i_ph=%.4f A i_0=%.3e A r_s=%.4f ohm r_p=%.1f ohm a=%.2f",
                params.i_ph_stc, params.i_0_stc, params.r_s, params.r_p, params.a)
    return params


def unimodal_peaks(arr: PVArray, env: EnvironmentInput, n: int = 2000) -> int:
    """Number of sign changes of the discrete dP/dv on [0, V_oc]."""
    v_oc = open_circuit_voltage(arr, env)
    v = np.linspace(0.0, v_oc, n)
    dp = np.diff(v * pv_current(v, env, arr))
    signs = np.sign(dp[dp != 0])
    return int(np.count_nonzero(np.diff(signs)))
