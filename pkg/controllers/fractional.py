"""Fractional-order stack: backstepping and FOPI at their configured orders."""

from controllers.base import ControllerStack
from controllers.state import ControllerConfig


class FractionalStack(ControllerStack):
    name = "fo"

    def configure(self, cfg: ControllerConfig) -> ControllerConfig:
        return cfg
