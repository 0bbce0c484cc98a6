"""JSON configuration loading with strict dataclass coercion.

Configs mirror the library dataclasses one to one, so the loader walks a
dataclass's declared fields and coerces the JSON payload recursively.
Unknown keys are rejected rather than ignored: a typo in a config must fail
loudly, not silently run the defaults.
"""

from __future__ import annotations

import dataclasses
import json
import types
from pathlib import Path
from typing import Any, Union, get_args, get_origin, get_type_hints

__all__ = ["ConfigError", "build_config", "coerce_fields", "load_json_config"]


class ConfigError(ValueError):
    """A configuration file is malformed or inconsistent."""


def load_json_config(path) -> dict:
    """Parse a JSON config file; the top level must be an object."""
    path = Path(path)
    try:
        with path.open() as handle:
            payload = json.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return payload


def _coerce(tp: Any, value: Any, context: str) -> Any:
    origin = get_origin(tp)
    if origin in (Union, types.UnionType):
        arms = get_args(tp)
        if value is None:
            if type(None) in arms:
                return None
            raise ConfigError(f"{context}: null is not allowed")
        last_error = None
        for arm in arms:
            if arm is type(None):
                continue
            try:
                return _coerce(arm, value, context)
            except ConfigError as exc:
                last_error = exc
        raise last_error if last_error else ConfigError(f"{context}: unusable value")
    if origin is tuple:
        args = get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{context}: expected a list, got {type(value).__name__}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(
                _coerce(args[0], item, f"{context}[{i}]") for i, item in enumerate(value)
            )
        if len(value) != len(args):
            raise ConfigError(f"{context}: expected {len(args)} entries, got {len(value)}")
        return tuple(
            _coerce(arg, item, f"{context}[{i}]")
            for i, (arg, item) in enumerate(zip(args, value))
        )
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{context}: expected an object, got {type(value).__name__}")
        return build_config(tp, value, context)
    if tp is float:
        # bool is an int subclass; reject it for numeric fields.
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{context}: expected a number, got {type(value).__name__}")
    if tp is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"{context}: expected an integer, got {type(value).__name__}")
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{context}: expected a boolean, got {type(value).__name__}")
    if tp is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"{context}: expected a string, got {type(value).__name__}")
    raise ConfigError(f"{context}: unsupported field type {tp!r}")


def coerce_fields(cls, payload: dict, context: str = "config") -> dict:
    """Validate and coerce a payload's keys against a dataclass's fields."""
    if not dataclasses.is_dataclass(cls):
        raise TypeError(f"{cls!r} is not a dataclass")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(payload) - names)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")
    return {
        name: _coerce(hints[name], value, f"{context}.{name}")
        for name, value in payload.items()
    }


def build_config(cls, payload: dict, context: str = "config"):
    """Construct a dataclass from a JSON payload, rejecting unknown keys."""
    kwargs = coerce_fields(cls, payload, context)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from None
