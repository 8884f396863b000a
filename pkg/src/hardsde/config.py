"""Experiment configuration: INI-style ``key = value`` files, one section per experiment.

Grammar (UTF-8)::

    [section]          ; one of SCHEMA's keys
    key = value        ; value types: int, float, str, or comma separated lists

Unknown sections or keys are errors. ``normalize`` renders a parsed config
with every key present, keys sorted, and numbers in a canonical spelling, so
parse -> normalize -> parse is a fixed point.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Any, Callable


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(int(t) for t in items)


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def _optional_float(text: str):
    t = str(text).strip()
    return None if t.lower() in ("", "auto", "none") else float(t)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return v


def _fmt(value: Any) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    choices: tuple[str, ...] = ()


U_CHOICES = ("exp3", "identity", "one-plus-x")

SCHEMA: dict[str, dict[str, Key]] = {
    "verify": {
        "tol": Key(float, 1e-10),
        "grid_points": Key(int, 10_000),
        "n": Key(_int_list, (1, 2)),
    },
    "oracle": {
        "n_samples": Key(int, 1_000_000),
        "instances": Key(_str_list, ("easy", "linear", "quadratic", "negated-easy", "hard")),
        "seed": Key(_seed, 0),
    },
    "euler": {
        "n_steps": Key(_int_list, (64, 256, 1024)),
        "replications": Key(int, 10_000),
        "instances": Key(_str_list, ("easy", "hard")),
        "u": Key(str, "exp3", U_CHOICES),
        "delta": Key(float, 1.0),
        "x_delta": Key(float, 1.0),
        "seed": Key(_seed, 0),
    },
    "fool-sde": {
        "n": Key(_int_list, (1, 2)),
        "rule": Key(str, "equidistant", ("equidistant", "midpoint", "gauss", "empty")),
        "lo": Key(float, 0.0),
        "hi": Key(float, 0.5),
        "v": Key(str, "hard", ("hard", "easy")),
        "u": Key(str, "exp3", U_CHOICES),
        "delta": Key(float, 1.0),
        "x_delta": Key(float, 1.0),
    },
    "fool-quad": {
        "n": Key(_int_list, (1, 2, 3)),
        "rule": Key(str, "equidistant", ("equidistant", "midpoint", "gauss", "empty")),
        "lo": Key(_optional_float, None),
        "hi": Key(_optional_float, None),
        "u": Key(str, "identity", U_CHOICES),
    },
    "bounds": {
        "n": Key(_int_list, (1, 2, 4, 8, 16)),
        "u": Key(str, "exp3", U_CHOICES),
        "delta": Key(float, 1.0),
        "x_delta": Key(float, 1.0),
    },
}


def defaults(section: str) -> dict[str, Any]:
    return {k: spec.default for k, spec in SCHEMA[section].items()}


def parse_text(text: str) -> dict[str, dict[str, Any]]:
    """Parse config text into ``{section: {key: value}}`` with defaults filled in."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    out: dict[str, dict[str, Any]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; known: {', '.join(SCHEMA)}")
        values = defaults(section)
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            spec = SCHEMA[section][key]
            try:
                val = spec.parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
            if spec.choices and val not in spec.choices:
                raise ConfigError(f"[{section}] {key} must be one of {spec.choices}, got {val!r}")
            values[key] = val
        out[section] = values
    return out


def load(path: str | None) -> dict[str, dict[str, Any]]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def section(cfg: dict[str, dict[str, Any]], name: str) -> dict[str, Any]:
    return dict(cfg.get(name, defaults(name)))


def normalize(cfg: dict[str, dict[str, Any]]) -> str:
    lines: list[str] = []
    for name in sorted(cfg):
        lines.append(f"[{name}]")
        for key in sorted(cfg[name]):
            lines.append(f"{key} = {_fmt(cfg[name][key])}")
        lines.append("")
    return "\n".join(lines)
