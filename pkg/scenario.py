"""Scenario definition, YAML loading/dumping and the built-in scenarios.

Every field has a default, so an empty document describes the published
three-case run of the FO stack on the reference plant.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import yaml

from controllers import STACK_REGISTRY, ControllerConfig
from errors import ConfigurationError, ScenarioError
from power_stage import PlantParams, PlantState
from pv_model import Datasheet, EnvironmentInput, PVArray, fit_single_diode

logger = logging.getLogger(__name__)

FIDELITIES = ("averaged", "switched")
DEFAULT_DT = {"averaged": 1e-6, "switched": 1e-7}
SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"


@dataclass(frozen=True)
class Segment:
    duration: float
    irradiance: float = 1000.0
    temperature: float = 25.0

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ConfigurationError(f"must be positive, got {self.duration}", "duration")
        EnvironmentInput(self.irradiance, self.temperature)

    @property
    def env(self) -> EnvironmentInput:
        return EnvironmentInput(self.irradiance, self.temperature)


@dataclass(frozen=True)
class PVConfig:
    datasheet: Datasheet = Datasheet()
    n_series_panels: int = 7
    n_parallel_strings: int = 1
    ideality: float = 1.3
    ideal_model: bool = False

    def build_array(self) -> PVArray:
        panel = fit_single_diode(self.datasheet, self.ideality, self.ideal_model)
        return PVArray(panel, self.n_series_panels, self.n_parallel_strings)


REFERENCE_SCHEDULE = (
    Segment(0.5, 1000.0, 25.0),
    Segment(0.3, 800.0, 30.0),
    Segment(0.2, 700.0, 35.0),
)
REFERENCE_PARASITICS = {"r_lo": 0.8, "r_lg": 0.6, "r_on": 0.1}


@dataclass(frozen=True)
class Scenario:
    name: str = "paper"
    schedule: tuple[Segment, ...] = REFERENCE_SCHEDULE
    plant: PlantParams = PlantParams(**REFERENCE_PARASITICS)
    controller: ControllerConfig = ControllerConfig()
    pv: PVConfig = PVConfig()
    mode: str = "fo"
    fidelity: str = "averaged"
    dt: float | None = None
    decimation: int = 10
    initial_state: PlantState | None = None

    @property
    def effective_dt(self) -> float:
        return self.dt if self.dt is not None else DEFAULT_DT[self.fidelity]

    @property
    def duration(self) -> float:
        return sum(seg.duration for seg in self.schedule)

    def with_overrides(self, **changes) -> Scenario:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def step_count(span: float, dt: float, what: str) -> int:
    n = span / dt
    if abs(n - round(n)) > 1e-6 * max(1.0, n):
        raise ConfigurationError(f"{what} ({span:g} s) is not an integer multiple of dt={dt:g} s", "dt")
    return round(n)


def validate_scenario(sc: Scenario) -> Scenario:
    """Check the cross-field invariants the dataclasses cannot check alone."""
    if sc.mode not in STACK_REGISTRY:
        raise ConfigurationError(f"unknown mode '{sc.mode}'; expected one of {sorted(STACK_REGISTRY)}", "mode")
    if sc.fidelity not in FIDELITIES:
        raise ConfigurationError(f"unknown fidelity '{sc.fidelity}'; expected one of {FIDELITIES}", "fidelity")
    dt = sc.effective_dt
    if not (math.isfinite(dt) and dt > 0):
        raise ConfigurationError(f"must be positive, got {dt}", "dt")
    carrier = sc.plant.f_sw_boost if sc.fidelity == "switched" else sc.plant.f_sw_inv
    if dt > 1.0 / (10.0 * carrier) * (1 + 1e-9):
        raise ConfigurationError(f"{sc.fidelity} mode needs dt <= {1.0 / (10.0 * carrier):g} s, got {dt:g}", "dt")
    if sc.decimation < 1:
        raise ConfigurationError(f"must be >= 1, got {sc.decimation}", "decimation")
    cfg = sc.controller
    step_count(1.0 / cfg.rate_voltage_loop, dt, "voltage-loop period")
    step_count(1.0 / cfg.rate_current_loop, dt, "current-loop period")
    step_count(cfg.mppt_period, dt, "MPPT period")
    step_count(sc.plant.grid_period, dt, "grid period")
    for seg in sc.schedule:
        step_count(seg.duration, dt, "segment duration")
    return sc


def builtin_scenario(name: str) -> Scenario:
    if name == "paper":
        return Scenario()
    if name == "ideal-stc":
        return Scenario(name="ideal-stc", schedule=(Segment(0.5, 1000.0, 25.0),), plant=PlantParams())
    raise ScenarioError(f"unknown built-in scenario '{name}'; available: {', '.join(BUILTIN_NAMES)}", "scenario")


BUILTIN_NAMES = ("paper", "ideal-stc")


# --- YAML mapping ---

def _line_of(node, path: tuple[str, ...]) -> int | None:
    """1-based line of *path* in a composed YAML node tree."""
    line = None
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k_node, v_node in node.value:
            if k_node.value == key:
                line = k_node.start_mark.line + 1
                node = v_node
                break
        else:
            break
    return line


def _coerce(value: Any, ftype: str, where: str) -> Any:
    try:
        if "bool" in ftype:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if ftype.startswith("int"):
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError
            return int(float(value))
        if "float" in ftype:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if ftype.startswith("str"):
            return str(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"expected {ftype}, got {value!r}", where) from None
    return value


def _build(cls, data: Any, where: str, root) -> Any:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"expected a mapping, got {type(data).__name__}", where,
                            _line_of(root, tuple(where.split("."))))
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}" if where else str(key)
        if key not in known:
            raise ScenarioError(f"unknown field; expected one of {sorted(known)}", path,
                                _line_of(root, tuple(path.split("."))))
        kwargs[key] = _coerce(value, str(known[key].type), path)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        path = f"{where}.{exc.field}" if where and exc.field else (exc.field or where)
        raise ScenarioError(str(exc).split(": ", 1)[-1], path, _line_of(root, tuple(path.split(".")))) from None
    except TypeError as exc:
        raise ScenarioError(str(exc), where, _line_of(root, tuple(where.split(".")))) from None


def scenario_from_dict(data: dict | None, root=None) -> Scenario:
    data = dict(data or {})
    base = Scenario()
    allowed = {f.name for f in fields(Scenario)}
    for key in data:
        if key not in allowed:
            raise ScenarioError(f"unknown field; expected one of {sorted(allowed)}", str(key),
                                _line_of(root, (str(key),)))
    kwargs: dict[str, Any] = {}
    for key in ("name", "mode", "fidelity"):
        if key in data:
            kwargs[key] = _coerce(data[key], "str", key)
    if data.get("dt") is not None:
        kwargs["dt"] = _coerce(data["dt"], "float", "dt")
    if "decimation" in data:
        kwargs["decimation"] = _coerce(data["decimation"], "int", "decimation")
    if "schedule" in data:
        items = data["schedule"] or []
        if not isinstance(items, list):
            raise ScenarioError("expected a list of segments", "schedule", _line_of(root, ("schedule",)))
        kwargs["schedule"] = tuple(_build(Segment, item, f"schedule[{n}]", root) for n, item in enumerate(items))
    if "plant" in data:
        kwargs["plant"] = _build(PlantParams, data["plant"], "plant", root)
    if "controller" in data:
        kwargs["controller"] = _build(ControllerConfig, data["controller"], "controller", root)
    if "pv" in data:
        pv = dict(data["pv"] or {})
        sheet = _build(Datasheet, pv.pop("datasheet", None), "pv.datasheet", root)
        kwargs["pv"] = replace(_build(PVConfig, pv, "pv", root), datasheet=sheet)
    if data.get("initial_state") is not None:
        kwargs["initial_state"] = PlantState(**{
            k: _coerce(v, "float", f"initial_state.{k}")
            for k, v in _build_state(data["initial_state"], root).items()})
    sc = replace(base, **kwargs)
    try:
        return validate_scenario(sc)
    except ScenarioError:
        raise
    except ConfigurationError as exc:
        raise ScenarioError(str(exc).split(": ", 1)[-1], exc.field, _line_of(root, (exc.field or "",))) from None


def _build_state(data: Any, root) -> dict:
    if not isinstance(data, dict) or set(data) != set(PlantState._fields):
        raise ScenarioError(f"expected keys {PlantState._fields}", "initial_state",
                            _line_of(root, ("initial_state",)))
    return data


def load_scenario(source: str | Path) -> Scenario:
    """Built-in name or path to a YAML scenario file."""
    if isinstance(source, str) and source in BUILTIN_NAMES:
        return validate_scenario(builtin_scenario(source))
    path = Path(source)
    if not path.is_file():
        raise ScenarioError(f"no built-in scenario or file named '{source}'", "scenario")
    text = path.read_text(encoding="utf-8")
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(f"{path}: {getattr(exc, 'problem', None) or exc}", None,
                            mark.line + 1 if mark else None) from None
    if data is not None and not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping", None, 1)
    sc = scenario_from_dict(data, root)
    logger.info("Loaded scenario '%s' from %s", sc.name, path)
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    out = {
        "name": sc.name,
        "mode": sc.mode,
        "fidelity": sc.fidelity,
        "dt": sc.dt,
        "decimation": sc.decimation,
        "schedule": [dataclasses.asdict(seg) for seg in sc.schedule],
        "plant": dataclasses.asdict(sc.plant),
        "controller": dataclasses.asdict(sc.controller),
        "pv": dataclasses.asdict(sc.pv),
        "initial_state": sc.initial_state._asdict() if sc.initial_state is not None else None,
    }
    return out


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def save_scenario(sc: Scenario, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dump_scenario(sc), encoding="utf-8")
    return path


__all__ = [
    "BUILTIN_NAMES", "DEFAULT_DT", "REFERENCE_SCHEDULE", "PVConfig", "Scenario", "Segment", "builtin_scenario",
    "dump_scenario", "load_scenario", "save_scenario", "scenario_from_dict", "scenario_to_dict", "step_count",
    "validate_scenario",
]
