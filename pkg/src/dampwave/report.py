"""Structured plain-text reports: ``[section]`` headers and ``key = value`` lines.

Nested mappings become dotted section names, so a report reads like a
flat INI file and can be parsed back with :func:`parse_report`.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Mapping

import numpy as np


def _scalar(value: Any) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_scalar(v) for v in value) + "]"
    return str(value).replace("\n", " ")


def render_report(data: Mapping[str, Any]) -> str:
    """Render a nested mapping; top-level scalars come first, without a header."""
    lines: list[str] = []

    def emit(section: str, body: Mapping[str, Any]):
        scalars = [(k, v) for k, v in body.items() if not isinstance(v, Mapping)]
        nested = [(k, v) for k, v in body.items() if isinstance(v, Mapping)]
        if section and (scalars or not nested):
            if lines:
                lines.append("")
            lines.append(f"[{section}]")
        for k, v in scalars:
            if isinstance(v, (list, tuple)) and any(isinstance(x, str) for x in v):
                # free-text items may contain commas, so give each its own line
                lines.extend(f"{k}[{i}] = {_scalar(x)}" for i, x in enumerate(v))
            else:
                lines.append(f"{k} = {_scalar(v)}")
        for k, v in nested:
            emit(f"{section}.{k}" if section else str(k), v)

    emit("", data)
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, dict[str, str]]:
    """Inverse of :func:`render_report` up to value types (values stay strings)."""
    out: dict[str, dict[str, str]] = {"": {}}
    section = ""
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]") and " = " not in line:
            section = line[1:-1]
            out.setdefault(section, {})
            continue
        key, _, value = line.partition(" = ")
        out[section][key] = value
    return out
