"""Four-state plant: PV capacitor, boost inductor, DC link and grid filter inductor.

State x = (x1 PV voltage, x2 boost current, x3 DC-link voltage, x4 grid current).
The averaged model replaces the switch functions by continuous duties; the
switched realisation feeds carrier-compared switch states through the same
equations.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

from errors import ConfigurationError, DutySaturationWarning, SizingError

logger = logging.getLogger(__name__)

DUTY_CEILING = 0.95


@dataclass(frozen=True)
class PlantParams:
    c_pv: float = 0.2e-3
    l_o: float = 100e-3
    c_dc: float = 5e-3
    l_g: float = 9e-3
    grid_v_rms: float = 220.0
    grid_freq: float = 50.0
    f_sw_boost: float = 100e3
    f_sw_inv: float = 10e3
    r_lo: float = 0.0
    r_lg: float = 0.0
    r_on: float = 0.0

    def __post_init__(self):
        for name in ("c_pv", "l_o", "c_dc", "l_g", "grid_v_rms", "grid_freq", "f_sw_boost", "f_sw_inv"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"must be positive, got {value}", name)
        for name in ("r_lo", "r_lg", "r_on"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(f"must be non-negative, got {value}", name)
        if not self.f_sw_boost > self.f_sw_inv > self.grid_freq:
            raise ConfigurationError("switching frequencies must satisfy f_sw_boost > f_sw_inv > grid_freq",
                                     "f_sw_inv")

    @property
    def grid_v_peak(self) -> float:
        return math.sqrt(2.0) * self.grid_v_rms

    @property
    def grid_period(self) -> float:
        return 1.0 / self.grid_freq

    @property
    def lossless(self) -> bool:
        return self.r_lo == 0.0 and self.r_lg == 0.0 and self.r_on == 0.0


class PlantState(NamedTuple):
    x1: float
    x2: float
    x3: float
    x4: float


class ControlInputs(NamedTuple):
    u1: float
    u2: float


class SwitchStates(NamedTuple):
    mu1: int
    mu2: int


@dataclass(frozen=True)
class BoostSizing:
    v_in: float = 203.0
    v_out: float = 400.0
    delta_i: float = 1.0
    delta_v: float = 0.1
    f_s: float = 100e3
    p_g: float = 1492.0
    omega: float = 2.0 * math.pi * 50.0
    duty: float | None = None
    t_on: float | None = None


def derivatives(x1: float, x2: float, x3: float, x4: float, u1: float, u2: float,
                i_pv: float, v_g: float, p: PlantParams) -> tuple[float, float, float, float]:
    """Right-hand side on plain floats; the engine's inner loop calls this."""
    m1 = 1.0 - u1
    return (
        (i_pv - x2) / p.c_pv,
        (x1 - (p.r_lo + u1 * p.r_on) * x2 - m1 * x3) / p.l_o,
        (m1 * x2 - u2 * x4) / p.c_dc,
        (u2 * x3 - (p.r_lg + 2.0 * p.r_on) * x4 - v_g) / p.l_g,
    )


def plant_derivatives(s: PlantState, u: ControlInputs, i_pv: float, v_g: float, p: PlantParams) -> PlantState:
    """Time derivatives of the averaged plant at state *s* under duties *u*."""
    return PlantState(*derivatives(s.x1, s.x2, s.x3, s.x4, u.u1, u.u2, i_pv, v_g, p))


def _carrier_phase(t: float, f: float) -> float:
    return (t * f) % 1.0


def pwm_switch_states(u: ControlInputs, t: float, p: PlantParams) -> SwitchStates:
    """Carrier comparison for the boost switch and the unipolar full bridge.

    The boost carrier is a unipolar triangle starting at its valley; the
    inverter carrier is a bipolar triangle starting at its peak, compared
    against +u2 for one leg and -u2 for the other.
    """
    if u.u1 >= 1.0:
        mu1 = 1
    elif u.u1 <= 0.0:
        mu1 = 0
    else:
        phase = _carrier_phase(t, p.f_sw_boost)
        carrier = 2.0 * phase if phase < 0.5 else 2.0 * (1.0 - phase)
        mu1 = 1 if carrier < u.u1 else 0

    phase = _carrier_phase(t, p.f_sw_inv)
    carrier = 4.0 * abs(phase - 0.5) - 1.0
    leg_a = 1 if u.u2 > carrier else 0
    leg_b = 1 if -u.u2 > carrier else 0
    return SwitchStates(mu1, leg_a - leg_b)


def grid_voltage(t: float, p: PlantParams) -> float:
    """Stiff sinusoidal grid at *t* seconds."""
    return p.grid_v_peak * math.sin(2.0 * math.pi * p.grid_freq * t)


def stored_energy(s: PlantState, p: PlantParams) -> float:
    """Energy held in the two capacitors and two inductors [J]."""
    return 0.5 * (p.c_pv * s.x1 ** 2 + p.l_o * s.x2 ** 2 + p.c_dc * s.x3 ** 2 + p.l_g * s.x4 ** 2)


def boost_min_inductance(z: BoostSizing) -> float:
    """Smallest boost inductance keeping the current ripple below delta_i."""
    if not z.v_in > 0:
        raise SizingError(f"input voltage must be positive, got {z.v_in}")
    if z.v_in >= z.v_out:
        raise SizingError(f"boost needs v_in < v_out, got {z.v_in} >= {z.v_out}")
    if not (z.delta_i > 0 and z.f_s > 0):
        raise SizingError("ripple current and switching frequency must be positive")
    return z.v_in * (z.v_out - z.v_in) / (z.delta_i * z.v_out * z.f_s)


def boost_output_voltage(v_in: float, duty: float) -> float:
    if duty < 0.0 or duty >= 1.0:
        raise SizingError(f"duty must lie in [0, 1), got {duty}")
    if duty >= DUTY_CEILING:
        warnings.warn(f"duty {duty} at or above the practical ceiling {DUTY_CEILING}; clamped",
                      DutySaturationWarning, stacklevel=2)
        duty = DUTY_CEILING
    return v_in / (1.0 - duty)


def boost_duty(t_on: float, f_s: float) -> float:
    """Duty cycle from switch on-time and switching frequency."""
    if not (t_on >= 0 and f_s > 0):
        raise SizingError(f"need t_on >= 0 and f_s > 0, got t_on={t_on}, f_s={f_s}")
    duty = t_on * f_s
    if duty >= 1.0:
        raise SizingError(f"on-time {t_on} s fills the whole period at {f_s} Hz")
    return duty


def dc_link_capacitance(p_g: float, delta_v_frac: float, v_dc: float, omega: float) -> float:
    """DC-link capacitance holding the double-frequency ripple to delta_v_frac of v_dc."""
    if not 0.0 < delta_v_frac <= 0.2:
        raise SizingError(f"ripple fraction must lie in (0, 0.2], got {delta_v_frac}")
    if not (p_g > 0 and v_dc > 0 and omega > 0):
        raise SizingError("power, DC-link voltage and angular frequency must be positive")
    return p_g / (delta_v_frac * v_dc * v_dc * omega)


def size_from(z: BoostSizing) -> dict[str, float]:
    """Every sizing quantity derivable from *z* (duty from t_on when given)."""
    out = {"l_min": boost_min_inductance(z),
           "c_dc": dc_link_capacitance(z.p_g, z.delta_v, z.v_out, z.omega)}
    duty = boost_duty(z.t_on, z.f_s) if z.t_on is not None else z.duty
    if duty is not None:
        out["duty"] = duty
        out["v_out"] = boost_output_voltage(z.v_in, duty)
    return out

