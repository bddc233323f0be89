"""Scenario files: YAML mappings onto SystemConfig with unit-tagged powers.

Power-like fields accept a bare number (watts) or a string with an explicit
unit suffix, e.g. ``"20 dBW"``, ``"30 dBm"``, ``"5 mW"``, ``"0.1 W"``.
Units are converted once, here; nothing downstream guesses units.
"""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path
from typing import Any, Mapping

import yaml

from .model import SystemConfig

POWER_FIELDS = ("P_max", "sigma2", "P_BS", "P_UE", "P_n", "P_R", "P_R_max", "relay_noise")

_POWER_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(dBm|dBW|mW|W)\s*$")


def parse_power(value) -> float:
    """Watts from a number or a unit-suffixed string."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"cannot parse power from {value!r}")
    m = _POWER_RE.match(value)
    if m is None:
        raise ValueError(f"power {value!r} needs a unit suffix (dBm, dBW, mW or W)")
    x, unit = float(m.group(1)), m.group(2)
    if unit == "dBm":
        return 10.0 ** (x / 10.0) * 1e-3
    if unit == "dBW":
        return 10.0 ** (x / 10.0)
    if unit == "mW":
        return x * 1e-3
    return x


def dbm(x: float) -> float:
    return parse_power(f"{x} dBm")


def config_from_mapping(data: Mapping[str, Any]) -> SystemConfig:
    names = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
    kwargs = dict(data)
    for name in POWER_FIELDS:
        if kwargs.get(name) is not None:
            kwargs[name] = parse_power(kwargs[name])
    return SystemConfig(**kwargs)


def load_yaml(path) -> dict:
    with open(Path(path), encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def load_config(path) -> SystemConfig:
    data = load_yaml(path)
    return config_from_mapping(data.get("scenario", data))
