"""Config file loading and flag/file/default precedence.

The config file is a JSON object whose keys mirror DecodeConfig field names
exactly; unknown keys are hard errors so a typo in a hyperparameter name
cannot silently fall back to a default.  Precedence: command-line flags
override file values override built-in defaults.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from codedec.core import DecodeConfig

_INT_FIELDS = {"num_beams", "max_tokens", "rng_seed"}
_FLOAT_FIELDS = {"alpha", "beta", "k", "top_p", "temperature"}
_STR_FIELDS = {"strategy", "selector"}


class ConfigError(Exception):
    """Invalid configuration; the message lists every violated field."""


def _coerce(field: str, value: Any) -> Any:
    if field in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{field}: expected an integer, got {value!r}")
        return value
    if field in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{field}: expected a number, got {value!r}")
        return float(value)
    if field in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{field}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"unknown config field {field!r}")  # pragma: no cover


def load_config_file(path: str) -> dict[str, Any]:
    """Read a JSON config file and reject unknown or ill-typed keys."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = set(DecodeConfig.field_names())
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(
            f"config file {path} has unknown keys: {', '.join(unknown)} "
            f"(known: {', '.join(sorted(known))})"
        )
    return {field: _coerce(field, value) for field, value in raw.items()}


def build_config(
    file_values: Optional[dict[str, Any]] = None,
    flag_values: Optional[dict[str, Any]] = None,
) -> tuple[DecodeConfig, frozenset[str]]:
    """Merge defaults < file < flags; also return which fields were explicit.

    Raises ConfigError listing every violated field at once.  Explicitly
    combining num_beams with the dynamic-contrast strategy is rejected:
    its loop is defined stepwise and cannot maintain per-hypothesis
    description contexts.
    """
    file_values = file_values or {}
    flag_values = flag_values or {}
    merged = dict(file_values)
    merged.update(flag_values)
    explicit = frozenset(merged)
    config = DecodeConfig().with_overrides(**merged)
    problems = config.validate()
    if config.strategy == "code" and "num_beams" in explicit:
        problems.append(
            "num_beams: beam search cannot be combined with strategy 'code'"
        )
    if problems:
        raise ConfigError("\n".join(problems))
    return config, explicit


def parse_strategy_item(item: str) -> tuple[str, dict[str, Any]]:
    """Parse a strategy list entry like ``code`` or ``code@k=10,alpha=0.5``.

    Returns (strategy name, override fields).  Overrides use DecodeConfig
    field names and are type-coerced; 'strategy' itself cannot appear.
    """
    name, sep, rest = item.partition("@")
    name = name.strip()
    if not name:
        raise ConfigError(f"empty strategy name in {item!r}")
    overrides: dict[str, Any] = {}
    if sep:
        if not rest:
            raise ConfigError(f"{item!r}: expected field=value after '@'")
        for chunk in rest.split(","):
            field, eq, text = chunk.partition("=")
            field = field.strip()
            if not eq or not field or not text.strip():
                raise ConfigError(f"{item!r}: bad override {chunk!r}, expected field=value")
            if field == "strategy":
                raise ConfigError(f"{item!r}: cannot override 'strategy' inside an item")
            if field not in DecodeConfig.field_names():
                raise ConfigError(f"{item!r}: unknown config field {field!r}")
            text = text.strip()
            try:
                if field in _INT_FIELDS:
                    value: Any = int(text)
                elif field in _FLOAT_FIELDS:
                    value = float(text)
                else:
                    value = text
            except ValueError as exc:
                raise ConfigError(f"{item!r}: cannot parse {field}={text!r}") from exc
            overrides[field] = value
    return name, overrides
