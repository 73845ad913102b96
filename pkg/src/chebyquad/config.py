"""Frozen numerical constants with an environment-variable override.

Constants live in data/constants.json inside the package.  Setting
CHEBYQUAD_CONFIG to a path replaces the file wholesale; missing keys fall
back to the packaged defaults.
"""

from __future__ import annotations

import json
import os
from functools import lru_cache
from importlib import resources

__all__ = ["frozen_constants", "partition_constants", "config_path"]

ENV_VAR = "CHEBYQUAD_CONFIG"


def config_path() -> str | None:
    """The override path from the environment, if set."""
    return os.environ.get(ENV_VAR) or None


def _load(path: str | None) -> dict:
    with resources.files("chebyquad.data").joinpath("constants.json").open() as fh:
        base = json.load(fh)
    if path is not None:
        with open(path) as fh:
            override = json.load(fh)
        _merge(base, override)
    return base


def _merge(base: dict, override: dict) -> None:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


@lru_cache(maxsize=4)
def _cached(path: str | None) -> dict:
    return _load(path)


def frozen_constants() -> dict:
    """The constants dictionary, honoring the CHEBYQUAD_CONFIG override."""
    return _cached(config_path())


def partition_constants(d: int) -> tuple[float, float, float]:
    """(C, c, Kcoef) for sphere dimension d: diameter factor, mass factor,
    count coefficient.  Raises KeyError if d is not frozen."""
    part = frozen_constants()["partition"]
    key = str(d)
    return part["C"][key], part["c"][key], part["Kcoef"][key]
