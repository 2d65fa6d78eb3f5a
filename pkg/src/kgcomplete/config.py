"""Flat ``key = value`` configuration with environment and flag overrides.

Precedence, lowest to highest: built-in defaults, config file, environment
variables prefixed ``KGCOMPLETE_``, command-line flags. Keys are shared by
all three sources (``learning_rate`` in a file, ``KGCOMPLETE_LEARNING_RATE``
in the environment, ``--learning-rate`` on the command line).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Mapping

ENV_PREFIX = "KGCOMPLETE_"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a flat config file; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = normalize_key(key)
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            out[key] = value.strip().strip('"').strip("'")
    return out


def env_overrides(environ: Mapping[str, str] | None = None, prefix: str = ENV_PREFIX) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    return {normalize_key(k[len(prefix) :]): v for k, v in environ.items() if k.startswith(prefix)}


def coerce(value: Any, like: Any, key: str = "") -> Any:
    """Convert a string ``value`` to the type of the default ``like``."""
    if not isinstance(value, str) or like is None:
        return value
    try:
        if isinstance(like, bool):
            v = value.strip().lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"invalid value {value!r} for {key or 'option'} ({type(like).__name__} expected)") from None
    return value


def resolve(
    defaults: Mapping[str, Any],
    config_file: str | Path | None = None,
    flags: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Merge the four sources; unknown keys from the file or environment are errors.

    ``flags`` entries equal to ``None`` mean "not given" and do not override.
    """
    merged = dict(defaults)
    layers = []
    if config_file is not None:
        layers.append(("config file", read_config(config_file)))
    layers.append(("environment", {k: v for k, v in env_overrides(environ).items() if k != "config"}))
    for source, values in layers:
        for k, v in values.items():
            if k not in defaults:
                if source == "environment":
                    continue
                raise ConfigError(f"unknown key {k!r} in {source}")
            merged[k] = coerce(v, defaults[k], k)
    for k, v in (flags or {}).items():
        if v is not None:
            merged[normalize_key(k)] = coerce(v, defaults.get(normalize_key(k)), k)
    return merged
