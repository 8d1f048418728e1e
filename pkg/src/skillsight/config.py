"""Experiment configuration: schema generation, validation, construction.

The config file is one JSON document with optional ``teacher``, ``student``
and ``power`` sections mirroring the corresponding dataclasses. A JSON
schema is derived from the dataclasses themselves, so validation (including
rejection of unknown keys) stays in sync with the code. Validation runs
before any compute; violations exit with the offending field path.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .power import PowerConstants
from .student import StudentConfig
from .teacher import TeacherConfig

_SCALARS = {
    int: {"type": "integer"},
    float: {"type": "number"},
    str: {"type": "string"},
    bool: {"type": "boolean"},
}


def _schema_for_type(hint) -> dict:
    if dataclasses.is_dataclass(hint):
        return schema_for(hint)
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        non_none = [a for a in args if a is not type(None)]
        sub = _schema_for_type(non_none[0])
        if len(non_none) < len(args):
            return {"anyOf": [sub, {"type": "null"}]}
        return sub
    if origin is dict:
        return {"type": "object", "additionalProperties": _schema_for_type(args[1])}
    if origin in (list, tuple):
        item = args[0] if args else float
        return {"type": "array", "items": _schema_for_type(item)}
    if hint in _SCALARS:
        return dict(_SCALARS[hint])
    return {}


def schema_for(cls) -> dict:
    hints = typing.get_type_hints(cls)
    props = {
        f.name: _schema_for_type(hints[f.name]) for f in dataclasses.fields(cls)
    }
    return {"type": "object", "properties": props, "additionalProperties": False}


def experiment_schema() -> dict:
    return {
        "type": "object",
        "properties": {
            "seed": {"type": "integer"},
            "n_clips": {"type": "integer", "minimum": 1},
            "teacher": schema_for(TeacherConfig),
            "student": schema_for(StudentConfig),
            "power": schema_for(PowerConstants),
        },
        "additionalProperties": False,
    }


def validate_config(data: dict) -> None:
    """Schema-check a raw config dict; raises ConfigError with the path."""
    try:
        jsonschema.validate(data, experiment_schema())
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config field '{path}': {e.message}") from e


def build_dataclass(cls, data: dict | None, path: str = ""):
    """Recursively build a dataclass from plain dicts (unknown keys rejected)."""
    if data is None:
        return cls()
    if dataclasses.is_dataclass(data.__class__) and not isinstance(data, dict):
        return data
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key '{path}{key}'")
        hint = hints[key]
        origin = typing.get_origin(hint)
        args = typing.get_args(hint)
        if origin in (typing.Union, types.UnionType):
            non_none = [a for a in args if a is not type(None)]
            if value is None:
                kwargs[key] = None
                continue
            hint = non_none[0]
            origin = typing.get_origin(hint)
            args = typing.get_args(hint)
        if dataclasses.is_dataclass(hint) and isinstance(value, dict):
            kwargs[key] = build_dataclass(hint, value, path=f"{path}{key}.")
        elif origin is tuple:
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config_file(path: str | Path | None) -> dict:
    if path is None:
        return {}
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a JSON object")
    validate_config(data)
    return data
