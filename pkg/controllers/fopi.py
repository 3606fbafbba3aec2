"""Fractional PI on the squared DC-link voltage error."""

from __future__ import annotations

from controllers.state import ControllerConfig, LoopState, clamp


def fopi_beta(x3: float, x3_ref: float, st: LoopState, cfg: ControllerConfig) -> float:
    """Grid-current scale beta = kp eps + ki T^(1-a) D^-a eps with eps = x3^2 - x3*^2.

    T is cfg.pi_time_unit, so at a = 1 this is the ordinary PI law.

    Positive beta exports power. While the output sits on its limit and the
    error pushes further into it, zero is integrated instead of eps.
    """
    eps = x3 * x3 - x3_ref * x3_ref
    winding_up = st.beta_saturated and (eps > 0) == (st.beta > 0)
    integral = st.i_eps.step(0.0 if winding_up else eps)
    raw = cfg.kp * eps + cfg.ki * st.pi_scale * integral
    beta = clamp(raw, -st.beta_max, st.beta_max)
    st.beta_saturated = beta != raw
    st.mark_saturation("beta", st.beta_saturated, raw)
    st.eps = eps
    st.beta = beta
    return beta
