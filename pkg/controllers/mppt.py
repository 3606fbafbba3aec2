"""Perturb-and-observe maximum power point tracking."""

from __future__ import annotations

from controllers.state import ControllerConfig, MpptState, clamp


def pno_update(v_pv: float, i_pv: float, st: MpptState, cfg: ControllerConfig) -> float:
    """One P&O decision; returns the new PV voltage reference.

    Moving up the P-V curve (dP and dV of equal sign) means the MPP lies at
    higher voltage, so the next perturbation is positive; otherwise negative.
    An unchanged product keeps the previous direction.
    """
    p = v_pv * i_pv
    slope = (p - st.prev_p) * (v_pv - st.prev_v)
    if slope > 0:
        st.direction = 1
    elif slope < 0:
        st.direction = -1
    st.prev_p = p
    st.prev_v = v_pv
    st.v_ref = clamp(st.v_ref + st.direction * cfg.mppt_step, st.v_min, st.v_max)
    return st.v_ref
