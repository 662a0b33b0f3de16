"""Declarative key-value run configuration files.

One `dotted.key = value` assignment per line; '#' starts a comment.
Keys mirror the RunConfig field tree (dataset.family, encoder.dim,
training.learning_rate, ...). Values are parsed as bool/int/float when
they look like one, strings otherwise; comma-separated lists are only
legal for grid axes and ablation dataset lists.
"""
from __future__ import annotations

from .errors import ConfigError


def parse_scalar(token: str):
    t = token.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat dict of dotted key -> scalar (or list for grid./ablate. keys)."""
    out: dict = {}
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{line_no}: empty key or value")
        if key in out:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        if key.startswith("grid.") or key == "ablate.datasets":
            out[key] = [parse_scalar(v) for v in value.split(",")]
        else:
            out[key] = parse_scalar(value)
    return out


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(flat: dict) -> str:
    """Canonical text form: sorted dotted keys, one per line."""
    lines = []
    for key in sorted(flat):
        v = flat[key]
        if isinstance(v, (list, tuple)):
            lines.append(f"{key} = {', '.join(format_value(x) for x in v)}")
        else:
            lines.append(f"{key} = {format_value(v)}")
    return "\n".join(lines) + "\n"
