"""Static PNG figures: run traces, PV characteristics and fractional relaxation energy."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from controllers import ControllerConfig  # noqa: E402
from frac_ops import fractional_relaxation, relaxation_energy  # noqa: E402
from metrics import rolling_power_quality  # noqa: E402
from pv_model import EnvironmentInput, PVArray, open_circuit_voltage, pv_current, unimodal_peaks  # noqa: E402
from sim_engine import SimLog  # noqa: E402

logger = logging.getLogger(__name__)

Series = Callable[[SimLog], tuple[np.ndarray, np.ndarray]]


def _column(name: str) -> Series:
    return lambda log: (log.columns["time_s"], log.columns[name])


def _rolling(key: str) -> Series:
    def series(log: SimLog):
        pq = rolling_power_quality(log)
        return pq["t"], pq[key]
    return series


def _efficiency(log: SimLog):
    pq = rolling_power_quality(log)
    with np.errstate(divide="ignore", invalid="ignore"):
        eff = np.where(pq["p_pv"] > 0, 100.0 * pq["p"] / pq["p_pv"], np.nan)
    return pq["t"], eff


# name -> (title, y label, series)
FIGURES: dict[str, tuple[str, str, Series]] = {
    "mppt_reference": ("P&O voltage reference", "x1* (V)", _column("x1ref_v")),
    "pv_power": ("PV array power", "P_pv (W)", _column("ppv_w")),
    "inductor_current": ("Boost inductor current", "x2 (A)", _column("x2_a")),
    "pv_voltage": ("PV array voltage", "x1 (V)", _column("x1_v")),
    "grid_current": ("Grid current", "x4 (A)", _column("x4_a")),
    "real_power": ("Real power injected into the grid", "P (W)", _rolling("p")),
    "reactive_power": ("Reactive power", "Q (VAR)", _rolling("q")),
    "power_factor": ("Power factor", "PF", _rolling("pf")),
    "efficiency": ("Grid-to-PV efficiency", "efficiency (%)", _efficiency),
    "dc_link_voltage": ("DC-link voltage", "x3 (V)", _column("x3_v")),
    "boost_duty": ("Boost duty ratio", "u1", _column("u1")),
    "inverter_modulation": ("Inverter modulation index", "u2", _column("u2")),
    "lyapunov_v1": ("PV-voltage loop Lyapunov function", "V1", _column("V1")),
    "lyapunov_v3": ("Grid-current loop Lyapunov function", "V3", _column("V3")),
}

IRRADIANCE_SWEEP = (1000.0, 800.0, 600.0, 400.0)
TEMPERATURE_SWEEP = (0.0, 25.0, 50.0, 75.0)


def plot_figure(name: str, logs: dict[str, SimLog], out_dir: Path) -> Path:
    title, ylabel, series = FIGURES[name]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label, log in logs.items():
        t, y = series(log)
        ax.plot(t, y, linewidth=0.8, label=label.upper())
    if name == "grid_current":
        for label, log in logs.items():
            ax.plot(log.columns["time_s"], log.columns["x4ref_a"], linewidth=0.6, linestyle="--",
                    label=f"{label.upper()} reference")
    first = next(iter(logs.values()), None)
    for span in (first.cases[1:] if first else ()):
        ax.axvline(span.t_start, color="grey", linewidth=0.5, alpha=0.5)
    ax.set_xlabel("time (s)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    return _save(fig, out_dir / f"{name}.png")


def save_figures(logs: dict[str, SimLog], out_dir: str | Path) -> list[Path]:
    """Write every figure for *logs* (label -> log) into *out_dir*."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [plot_figure(name, logs, out_dir) for name in FIGURES]
    logger.info("Wrote %d figures to %s", len(paths), out_dir)
    return paths


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_pv_curves(arr: PVArray, envs: list[EnvironmentInput], label: Callable[[EnvironmentInput], str],
                   path: Path) -> Path:
    """I-V and P-V curves of *arr*, one trace per environment, MPP marked."""
    fig, (ax_i, ax_p) = plt.subplots(1, 2, figsize=(11, 4.5))
    for env in envs:
        v = np.linspace(0.0, open_circuit_voltage(arr, env), 400)
        i = pv_current(v, env, arr)
        p = v * i
        k = int(np.argmax(p))
        peaks = unimodal_peaks(arr, env)
        text = f"{label(env)} ({peaks} peak{'s' if peaks != 1 else ''})"
        ax_i.plot(v, i, linewidth=0.9, label=text)
        line, = ax_p.plot(v, p, linewidth=0.9, label=text)
        ax_p.plot(v[k], p[k], "o", color=line.get_color(), markersize=4)
    ax_i.set_xlabel("array voltage (V)")
    ax_i.set_ylabel("array current (A)")
    ax_p.set_xlabel("array voltage (V)")
    ax_p.set_ylabel("array power (W)")
    for ax in (ax_i, ax_p):
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_relaxation_energy(orders: list[float], path: Path, lam: float = 1.0, h: float = 0.01,
                           n: int = 500) -> Path:
    """Energy of D^a x = -lam x from x(0) = 1 for each order in *orders*."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    t = np.arange(n + 1) * h
    for alpha in sorted(set(orders), reverse=True):
        energy = relaxation_energy(fractional_relaxation(alpha, lam, h, n))
        ax.semilogy(t, energy, linewidth=0.9, label="integer order" if alpha == 1.0 else f"order {alpha:g}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("x^2 / 2")
    ax.set_title("Energy decay of the relaxation equation")
    ax.grid(True, alpha=0.3, which="both")
    ax.legend(loc="best", fontsize=9)
    return _save(fig, path)


def save_characteristics(arr: PVArray, cfg: ControllerConfig, out_dir: str | Path) -> list[Path]:
    """PV curves against irradiance and temperature, and relaxation energy at the controller orders."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_pv_curves(arr, [EnvironmentInput(g, 25.0) for g in IRRADIANCE_SWEEP],
                       lambda env: f"{env.irradiance:g} W/m2", out_dir / "pv_curves_irradiance.png"),
        plot_pv_curves(arr, [EnvironmentInput(1000.0, t) for t in TEMPERATURE_SWEEP],
                       lambda env: f"{env.temperature:g} C", out_dir / "pv_curves_temperature.png"),
        plot_relaxation_energy([cfg.alpha1, cfg.alpha2, cfg.alpha_pi, 1.0], out_dir / "relaxation_energy.png"),
    ]
    logger.info("Wrote %d characteristic figures to %s", len(paths), out_dir)
    return paths
