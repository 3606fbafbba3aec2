"""Controller configuration and the mutable per-run loop states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from errors import ConfigurationError
from frac_ops import DEFAULT_MEMORY, GLDifferintegrator, gl_compose
from power_stage import PlantParams


@dataclass(frozen=True)
class ControllerConfig:
    # Backstepping gains; err_scale_* multiply c1 and c3 on the scaled error
    c1: float = 5e5
    c2: float = 500.0
    c3: float = 5e5
    err_scale_v: float = 4e-3
    err_scale_g: float = 1e-2
    # DC-link FOPI on the squared-voltage error
    kp: float = 2.3e-6
    ki: float = 5.8e-4
    # Fractional and integer integrals carry equal gain at 1 / pi_time_unit rad/s
    pi_time_unit: float = 1e-6
    alpha1: float = 0.875
    alpha2: float = 0.6
    alpha_pi: float = 0.95
    mppt_step: float = 0.5
    mppt_period: float = 0.01
    mppt_v_init_frac: float = 0.8
    v_dc_ref: float = 400.0
    rate_voltage_loop: float = 100e3
    rate_current_loop: float = 10e3
    x3_floor: float = 50.0
    ref_filter_hz: float = 1000.0
    p_rated: float = 1492.0
    current_limit_factor: float = 1.5
    memory: int = DEFAULT_MEMORY

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "err_scale_v", "err_scale_g", "mppt_step", "mppt_period",
                     "v_dc_ref", "rate_voltage_loop", "rate_current_loop", "x3_floor", "ref_filter_hz",
                     "p_rated", "current_limit_factor", "pi_time_unit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"must be positive, got {value}", name)
        for name in ("kp", "ki"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(f"must be non-negative, got {value}", name)
        for name in ("alpha1", "alpha2", "alpha_pi"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"order must lie in (0, 1], got {value}", name)
        if not 0.0 < self.mppt_v_init_frac <= 1.0:
            raise ConfigurationError(f"must lie in (0, 1], got {self.mppt_v_init_frac}", "mppt_v_init_frac")
        if self.memory < 2:
            raise ConfigurationError(f"must be >= 2, got {self.memory}", "memory")

    @property
    def is_integer_order(self) -> bool:
        return self.alpha1 == self.alpha2 == self.alpha_pi == 1.0

    def integer_order(self) -> ControllerConfig:
        return replace(self, alpha1=1.0, alpha2=1.0, alpha_pi=1.0)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass
class MpptState:
    v_ref: float
    prev_p: float = 0.0
    prev_v: float = 0.0
    direction: int = 1
    v_min: float = 0.0
    v_max: float = math.inf

    @classmethod
    def initial(cls, v_oc: float, cfg: ControllerConfig) -> MpptState:
        """Fractional open-circuit start inside [0.5 V_oc, V_oc]."""
        st = cls(v_ref=cfg.mppt_v_init_frac * v_oc)
        st.set_bounds(v_oc)
        return st

    def set_bounds(self, v_oc: float) -> None:
        self.v_min = 0.5 * v_oc
        self.v_max = v_oc
        self.v_ref = min(max(self.v_ref, self.v_min), self.v_max)


@dataclass
class LoopState:
    """Operator histories, reference memories and last errors of all three loops."""

    h_v: float
    h_i: float
    c_pv: float
    l_o: float
    l_g: float
    beta_max: float
    ref_alpha: float
    pi_scale: float
    d_z2: GLDifferintegrator
    i_e2: GLDifferintegrator
    i2_e1: GLDifferintegrator
    d_z4: GLDifferintegrator
    i_e3: GLDifferintegrator
    i_eps: GLDifferintegrator

    prev_x1_ref: float | None = None
    x1_ref_dot: float = 0.0
    prev_x2_ref: float | None = None
    prev_x4_ref: float | None = None
    x2_ref: float = 0.0
    x4_ref: float = 0.0

    e1: float = 0.0
    e2: float = 0.0
    e3: float = 0.0
    eps: float = 0.0
    v1: float = 0.0
    v2: float = 0.0
    v3: float = 0.0
    v1_prev: float = 0.0
    v2_prev: float = 0.0
    v3_prev: float = 0.0
    voltage_steps: int = 0
    current_steps: int = 0

    u1: float = 0.0
    u2: float = 0.0
    beta: float = 0.0
    beta_saturated: bool = False
    saturated: dict[str, bool] = field(default_factory=lambda: {"u1": False, "u2": False, "beta": False})
    saturation_counts: dict[str, int] = field(default_factory=lambda: {"u1": 0, "u2": 0, "beta": 0})
    low_dc_link_count: int = 0
    below_floor: bool = False
    events: list[tuple[str, dict]] = field(default_factory=list)

    @classmethod
    def create(cls, cfg: ControllerConfig, plant: PlantParams) -> LoopState:
        h_v = 1.0 / cfg.rate_voltage_loop
        h_i = 1.0 / cfg.rate_current_loop
        mem = cfg.memory
        # Integrals keep the whole run; differences only need the short window
        return cls(
            h_v=h_v,
            h_i=h_i,
            c_pv=plant.c_pv,
            l_o=plant.l_o,
            l_g=plant.l_g,
            beta_max=cfg.current_limit_factor * cfg.p_rated / plant.grid_v_rms ** 2,
            ref_alpha=1.0 - math.exp(-2.0 * math.pi * cfg.ref_filter_hz * h_v),
            pi_scale=cfg.pi_time_unit ** (1.0 - cfg.alpha_pi),
            d_z2=GLDifferintegrator(cfg.alpha1, h_v, mem),
            i_e2=GLDifferintegrator(-cfg.alpha1, h_v, None),
            i2_e1=gl_compose(-cfg.alpha1, -cfg.alpha1, h_v, None),
            d_z4=GLDifferintegrator(cfg.alpha2, h_i, mem),
            i_e3=GLDifferintegrator(-cfg.alpha2, h_i, None),
            i_eps=GLDifferintegrator(-cfg.alpha_pi, h_i, None),
        )

    def mark_saturation(self, name: str, active: bool, raw: float) -> None:
        """Count saturated samples and queue an event on each onset."""
        if active:
            self.saturation_counts[name] += 1
            if not self.saturated[name]:
                self.events.append(("saturation", {"signal": name, "raw": raw}))
        self.saturated[name] = active

    def flag_low_dc_link(self, loop: str, x3: float) -> None:
        """Count a held output and queue an event when x3 first drops below the floor."""
        self.low_dc_link_count += 1
        if not self.below_floor:
            self.events.append(("low_dc_link", {"loop": loop, "x3": x3}))
        self.below_floor = True

    def drain_events(self) -> list[tuple[str, dict]]:
        out, self.events = self.events, []
        return out


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x
