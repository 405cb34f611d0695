"""Configuration loading and defaults.

The shipped default configuration reproduces the 32-beam sensor layout,
the two H2O transitions, and the phantom/training parameters used by the
reference experiments. User config files are plain JSON; any key present
overrides the default, missing keys fall back to the shipped values.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path


def default_config() -> dict:
    """Return a deep copy of the shipped default configuration."""
    text = resources.files("hiertomo.data").joinpath("default_config.json").read_text()
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            out[key] = _merge(base[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | Path | None = None) -> dict:
    """Load a JSON config file merged over the shipped defaults."""
    cfg = default_config()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            user = json.load(fh)
        cfg = _merge(cfg, user)
    return cfg
