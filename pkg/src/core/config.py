"""YAML-based configuration management."""

from __future__ import annotations

import copy
import logging
import os
from pathlib import Path
from typing import Any

import yaml

logger = logging.getLogger("hssolve.config")

_CONFIG_DIR = Path.home() / ".hssolve"
_CONFIG_FILE = _CONFIG_DIR / "config.yaml"
_ENV_VAR = "HSSOLVE_CONFIG"

_DEFAULT_CONFIG: dict[str, Any] = {
    "sampling": {
        "d0": 64,
        "delta_d": 64,
        "oversampling": 10,
        "gap": None,
        "max_d": 2048,
        "seed": 0,
    },
    "compression": {
        "eps": 1e-8,
        "leaf_size": 128,
        "source_probes": 4,
    },
    "kernels": {
        "singular_threshold": 1e-14,
    },
    "solve": {
        "ir_tol": 1e-10,
        "ir_max_iters": 25,
        "divergence_window": 3,
        "dense_agreement": 1e-8,
    },
    "power": {
        "tol": 1e-6,
        "max_iters": 10000,
    },
    "mapping": {
        "procs": 64,
    },
    "generators": {
        "qchem_spacing": 1.0,
        "synthetic_rank": 8,
    },
    "logging": {
        "level": "INFO",
        "format": "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge *override* into *base*, returning a new dict."""
    result = copy.deepcopy(base)
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _deep_merge(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def config_path(path: str | Path | None = None) -> Path:
    """Resolve the user config file: explicit path, then $HSSOLVE_CONFIG, then home."""
    if path is not None:
        return Path(path)
    env = os.environ.get(_ENV_VAR)
    if env:
        return Path(env)
    return _CONFIG_FILE


def load_config(path: str | Path | None = None) -> dict[str, Any]:
    """Load configuration from disk. Returns merged config (defaults + user)."""
    target = config_path(path)
    try:
        if target.exists():
            with open(target, "r", encoding="utf-8") as f:
                user_config = yaml.safe_load(f) or {}
            if not isinstance(user_config, dict):
                raise ValueError("top level must be a mapping")
            return _deep_merge(_DEFAULT_CONFIG, user_config)
    except Exception as e:
        logger.warning("ignoring config file %s: %s", target, e)
    return copy.deepcopy(_DEFAULT_CONFIG)


def save_config(config: dict[str, Any], path: str | Path | None = None) -> None:
    """Persist configuration to a YAML file."""
    target = config_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as f:
        yaml.safe_dump(config, f, allow_unicode=True, default_flow_style=False, sort_keys=False)


def default_config() -> dict[str, Any]:
    return copy.deepcopy(_DEFAULT_CONFIG)
