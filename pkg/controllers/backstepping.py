"""Fractional backstepping laws for the boost duty (u1) and the inverter modulation (u2)."""

from __future__ import annotations

import logging

from controllers.state import ControllerConfig, LoopState, clamp
from power_stage import PlantState

logger = logging.getLogger(__name__)


def fobsc_u1(s: PlantState, i_pv: float, x1_ref: float, st: LoopState, cfg: ControllerConfig) -> float:
    """PV-voltage loop: boost duty that drives x1 to the MPPT reference.

    e1 = C_pv (x1 - x1*) and the virtual current x2* = i_pv + c1 e1 - C_pv dx1*/dt
    define e2 = L_o D^a (x2 - x2*); the duty closes
    u1 = 1 - (x1 + c2 D^-a e2 - L_o dx2*/dt - D^-2a e1 / L_o) / x3.
    """
    h = st.h_v
    raw_dot = 0.0 if st.prev_x1_ref is None else (x1_ref - st.prev_x1_ref) / h
    st.prev_x1_ref = x1_ref
    # x1* is a staircase; its derivative passes through a one-pole low-pass
    st.x1_ref_dot += st.ref_alpha * (raw_dot - st.x1_ref_dot)

    e1 = st.c_pv * (s.x1 - x1_ref)
    x2_ref = i_pv + cfg.c1 * cfg.err_scale_v * e1 - st.c_pv * st.x1_ref_dot
    x2_ref_dot = 0.0 if st.prev_x2_ref is None else (x2_ref - st.prev_x2_ref) / h
    st.prev_x2_ref = x2_ref
    st.x2_ref = x2_ref

    e2 = st.l_o * st.d_z2.step(s.x2 - x2_ref)
    int_e2 = st.i_e2.step(e2)
    int2_e1 = st.i2_e1.step(e1)

    st.e1, st.e2 = e1, e2
    st.v1_prev, st.v2_prev = st.v1, st.v2
    st.v1 = 0.5 * e1 * e1
    st.v2 = 0.5 * e2 * e2 + st.v1
    st.voltage_steps += 1

    if s.x3 <= cfg.x3_floor:
        st.flag_low_dc_link("voltage", s.x3)
        return st.u1

    st.below_floor = False
    raw = 1.0 - (s.x1 + cfg.c2 * int_e2 - st.l_o * x2_ref_dot - int2_e1 / st.l_o) / s.x3
    u1 = clamp(raw, 0.0, 1.0)
    st.mark_saturation("u1", u1 != raw, raw)
    st.u1 = u1
    return u1


def fobsc_u2(s: PlantState, v_g: float, beta: float, st: LoopState, cfg: ControllerConfig) -> float:
    """Grid-current loop: modulation that makes x4 follow x4* = beta * v_g."""
    h = st.h_i
    x4_ref = beta * v_g
    x4_ref_dot = 0.0 if st.prev_x4_ref is None else (x4_ref - st.prev_x4_ref) / h
    st.prev_x4_ref = x4_ref
    st.x4_ref = x4_ref

    e3 = st.l_g * st.d_z4.step(s.x4 - x4_ref)
    int_e3 = st.i_e3.step(e3)

    st.e3 = e3
    st.v3_prev = st.v3
    st.v3 = 0.5 * e3 * e3
    st.current_steps += 1

    if s.x3 <= cfg.x3_floor:
        st.flag_low_dc_link("current", s.x3)
        return st.u2

    st.below_floor = False
    raw = (v_g + st.l_g * x4_ref_dot - cfg.c3 * cfg.err_scale_g * int_e3) / s.x3
    u2 = clamp(raw, -1.0, 1.0)
    st.mark_saturation("u2", u2 != raw, raw)
    st.u2 = u2
    return u2
