"""Controller stack registry."""

from controllers.backstepping import fobsc_u1, fobsc_u2
from controllers.base import ControllerStack
from controllers.fopi import fopi_beta
from controllers.fractional import FractionalStack
from controllers.integer import IntegerStack
from controllers.lyapunov import LyapunovProbe, lyapunov_probe
from controllers.mppt import pno_update
from controllers.state import ControllerConfig, LoopState, MpptState
from errors import ConfigurationError

STACK_REGISTRY = {
    "fo": FractionalStack,
    "io": IntegerStack,
}


def get_stack(name: str) -> type[ControllerStack]:
    cls = STACK_REGISTRY.get(name)
    if not cls:
        available = ", ".join(STACK_REGISTRY.keys())
        raise ConfigurationError(f"Unknown controller stack '{name}'. Available: {available}", "mode")
    return cls


__all__ = [
    "STACK_REGISTRY", "ControllerConfig", "ControllerStack", "FractionalStack", "IntegerStack",
    "LoopState", "LyapunovProbe", "MpptState", "fobsc_u1", "fobsc_u2", "fopi_beta", "get_stack",
    "lyapunov_probe", "pno_update",
]
