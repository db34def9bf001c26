"""Flat ``key = value`` configuration files.

Grammar, one entry per line::

    # comment (also allowed after a value)
    key = value
    key = v1, v2, v3      # list

Keys are identifiers (``[A-Za-z_][A-Za-z0-9_]*``).  Values are parsed as
int, then float, then the literals ``true``/``false``/``none``, else kept
as strings.  A value containing a comma becomes a list.  Repeated keys are
an error.
"""

from __future__ import annotations

import re
from pathlib import Path

from .exceptions import ParameterError

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def parse_value(text: str):
    if "," in text:
        return [parse_scalar(p) for p in text.split(",") if p.strip()]
    return parse_scalar(text)


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if not _KEY.match(key):
            raise ParameterError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ParameterError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(val)
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def as_list(value) -> list:
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]
