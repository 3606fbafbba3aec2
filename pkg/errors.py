"""Exception hierarchy shared by the simulator modules."""

from __future__ import annotations


class FracGridError(Exception):
    """Base class for every error raised by fracgrid."""


class ConfigurationError(FracGridError, ValueError):
    """A parameter, order, step size or rate ratio is out of range."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericInputError(FracGridError, ValueError):
    """A non-finite sample reached a stateful operator."""


class SolverError(FracGridError, RuntimeError):
    """The implicit PV current solve did not converge."""


class ExtractionError(FracGridError, RuntimeError):
    """Datasheet values admit no single-diode parameter set."""


class SizingError(FracGridError, ValueError):
    """A converter sizing request is physically infeasible."""


class DivergenceError(FracGridError, RuntimeError):
    """The simulated state left the admissible region."""

    def __init__(self, time: float, state: tuple[float, ...]):
        self.time = time
        self.state = state
        values = ", ".join(f"{x:.4g}" for x in state)
        super().__init__(f"state diverged at t={time:.6f} s: ({values})")


class MetricError(FracGridError, ValueError):
    """A signal metric is undefined for the given window."""


class ScenarioError(ConfigurationError):
    """A scenario file could not be parsed or failed validation."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, field)


class DutySaturationWarning(UserWarning):
    """Requested boost duty reached the practical ceiling."""
