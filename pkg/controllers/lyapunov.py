"""Lyapunov candidate values of the backstepping loops, for monitoring."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from controllers.state import LoopState

# Differences within this many ulps of the larger value count as zero
ROUNDOFF_ULPS = 8


class LyapunovProbe(NamedTuple):
    v1: float
    v2: float
    v3: float
    v1_dot: float
    v2_dot: float
    v3_dot: float


def _rate(v: float, v_prev: float, h: float) -> float:
    d = v - v_prev
    if abs(d) <= ROUNDOFF_ULPS * np.spacing(max(v, v_prev)):
        return 0.0
    return d / h


def lyapunov_probe(st: LoopState) -> LyapunovProbe:
    """V1 = e1^2/2, V2 = e2^2/2 + V1, V3 = e3^2/2 and their backward differences.

    Rates are NaN until the owning loop has run twice.
    """
    if st.voltage_steps >= 2:
        v1_dot = _rate(st.v1, st.v1_prev, st.h_v)
        v2_dot = _rate(st.v2, st.v2_prev, st.h_v)
    else:
        v1_dot = v2_dot = math.nan
    v3_dot = _rate(st.v3, st.v3_prev, st.h_i) if st.current_steps >= 2 else math.nan
    return LyapunovProbe(st.v1, st.v2, st.v3, v1_dot, v2_dot, v3_dot)
