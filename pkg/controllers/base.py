"""Abstract controller stack shared by the fractional and integer-order variants."""

from __future__ import annotations

from abc import ABC, abstractmethod

from controllers.backstepping import fobsc_u1, fobsc_u2
from controllers.fopi import fopi_beta
from controllers.lyapunov import LyapunovProbe, lyapunov_probe
from controllers.mppt import pno_update
from controllers.state import ControllerConfig, LoopState, MpptState
from power_stage import PlantParams, PlantState


class ControllerStack(ABC):
    """MPPT, PV-voltage loop, DC-link loop and grid-current loop.

    Subclasses must implement:
        - name (class attribute)
        - configure(cfg): the configuration this variant actually runs with

    The engine calls the loops in the fixed order mppt -> voltage_loop ->
    dc_link -> current_loop whenever their rate grids coincide.
    """

    name: str

    def __init__(self, cfg: ControllerConfig, plant: PlantParams, v_oc: float):
        self.cfg = self.configure(cfg)
        self.plant = plant
        self.loops = LoopState.create(self.cfg, plant)
        self.tracker = MpptState.initial(v_oc, self.cfg)

    @abstractmethod
    def configure(self, cfg: ControllerConfig) -> ControllerConfig:
        """Return the configuration this stack runs with."""
        ...

    @property
    def x1_ref(self) -> float:
        return self.tracker.v_ref

    def set_open_circuit_voltage(self, v_oc: float) -> None:
        self.tracker.set_bounds(v_oc)

    def mppt(self, v_pv: float, i_pv: float) -> float:
        return pno_update(v_pv, i_pv, self.tracker, self.cfg)

    def voltage_loop(self, s: PlantState, i_pv: float) -> float:
        return fobsc_u1(s, i_pv, self.tracker.v_ref, self.loops, self.cfg)

    def dc_link(self, x3: float) -> float:
        return fopi_beta(x3, self.cfg.v_dc_ref, self.loops, self.cfg)

    def current_loop(self, s: PlantState, v_g: float, beta: float) -> float:
        return fobsc_u2(s, v_g, beta, self.loops, self.cfg)

    def probe(self) -> LyapunovProbe:
        return lyapunov_probe(self.loops)

    def drain_events(self) -> list[tuple[str, dict]]:
        return self.loops.drain_events()
