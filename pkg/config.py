"""Configuration loading: defaults -> .env -> CLI args."""

import logging
import os

from dotenv import load_dotenv

from errors import ConfigurationError

load_dotenv()

DEFAULTS = {
    "scenario": "paper",
    "controller": "both",
    "fidelity": None,
    "dt": None,
    "out": "runs",
    "workers": 1,
    "log_level": "WARNING",
    "csv": False,
    "plots": False,
    "report": False,
    "check": False,
}


def load_config(cli_args: dict | None = None) -> dict:
    """Merge defaults, env vars, and CLI args into a config dict."""
    config = {**DEFAULTS}

    # Env overrides
    if os.getenv("FRACGRID_OUT_DIR"):
        config["out"] = os.getenv("FRACGRID_OUT_DIR")
    if os.getenv("FRACGRID_SCENARIO"):
        config["scenario"] = os.getenv("FRACGRID_SCENARIO")
    if os.getenv("FRACGRID_LOG_LEVEL"):
        config["log_level"] = os.getenv("FRACGRID_LOG_LEVEL")
    if os.getenv("FRACGRID_WORKERS"):
        try:
            config["workers"] = int(os.getenv("FRACGRID_WORKERS"))
        except ValueError:
            raise ConfigurationError("must be an integer", "FRACGRID_WORKERS") from None

    # CLI overrides (only non-None values)
    if cli_args:
        for k, v in cli_args.items():
            if v is not None:
                config[k] = v

    return config


def configure_logging(level: str = "WARNING") -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
    )
