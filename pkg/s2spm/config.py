"""Flat TOML configuration with CLI-flag overrides.

Defaults mirror the published training and analysis settings; the resolved
mapping is echoed into every run manifest.
"""
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import toml

from .errors import DomainError

TRAIN_DEFAULTS: Dict[str, Any] = {
    "k_pos": 8,
    "k_neg": 8,
    "lr": 0.05,
    "iterations": 5000,
    "seed": 0,
    "sampling": "auto",
    "nonedge_multiplier": 10,
    "checkpoint_every": 100,
    "full_ceiling": 2000,
    "shared_space": False,
}

SPLIT_DEFAULTS: Dict[str, Any] = {
    "fraction": 0.1,
    "zero_multiplier": 1.0,
}

EVAL_DEFAULTS: Dict[str, Any] = {
    "l2": 1e-4,
}

BNMI_DEFAULTS: Dict[str, Any] = {
    "runs": 5,
    "n_perm": 100,
}

ENRICH_DEFAULTS: Dict[str, Any] = {
    "min_proteins": 20,
    "p_threshold": 0.002,
    "alpha": 0.05,
    "p_max_threshold": 0.5,
    "sar_threshold": 0.5,
    "n_boot": 1000,
}

ALL_DEFAULTS: Dict[str, Any] = {
    **TRAIN_DEFAULTS,
    **SPLIT_DEFAULTS,
    **EVAL_DEFAULTS,
    **BNMI_DEFAULTS,
    **ENRICH_DEFAULTS,
}


def load_config(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        values = toml.load(str(path))
    except toml.TomlDecodeError as e:
        raise DomainError(f"Invalid config file {path}: {e}") from e
    for key, value in values.items():
        if isinstance(value, dict):
            raise DomainError(f"Config must be flat; found table [{key}]")
        if key not in ALL_DEFAULTS:
            raise DomainError(f"Unknown config key: {key}")
    return values


def resolve(defaults: Mapping[str, Any], file_values: Mapping[str, Any],
            overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """defaults < config file < flags; ``None`` flags mean "not given"."""
    resolved = dict(defaults)
    for key, value in file_values.items():
        if key in defaults:
            resolved[key] = value
    for key, value in overrides.items():
        if value is not None and key in defaults:
            resolved[key] = value
    return resolved
