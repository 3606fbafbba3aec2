"""Integer-order baseline: the same laws with every order set to one."""

from controllers.base import ControllerStack
from controllers.state import ControllerConfig


class IntegerStack(ControllerStack):
    name = "io"

    def configure(self, cfg: ControllerConfig) -> ControllerConfig:
        return cfg.integer_order()
