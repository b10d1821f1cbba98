"""JSON serialization with fixed-width float formatting.

Persisted artifacts (cluster spaces, coverage states) must survive a
save/load round trip bit-exactly, so every float is written with 17
significant decimal digits -- enough to reproduce any IEEE-754 double.
"""
from __future__ import annotations

import json
import math
from typing import Any

from .errors import NonFiniteError


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise NonFiniteError(f"cannot serialize non-finite value {x!r}")
    return format(float(x), ".17g")


def dumps(obj: Any, indent: int | None = None) -> str:
    """Serialize ``obj`` to JSON with all floats at 17 significant digits."""
    return _write(obj, indent, 0)


def _write(obj: Any, indent: int | None, depth: int) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [
            f"{json.dumps(str(k))}: {_write(v, indent, depth + 1)}"
            for k, v in obj.items()
        ]
        return _join("{", items, "}", indent, depth)
    if isinstance(obj, (list, tuple)):
        items = [_write(v, indent, depth + 1) for v in obj]
        return _join("[", items, "]", indent, depth)
    if hasattr(obj, "item") and callable(obj.item) and getattr(obj, "ndim", None) == 0:
        return _write(obj.item(), indent, depth)  # numpy scalar
    if hasattr(obj, "tolist"):
        return _write(obj.tolist(), indent, depth)  # numpy array
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def _join(opening: str, items: list[str], closing: str, indent: int | None, depth: int) -> str:
    if not items:
        return opening + closing
    if indent is None:
        return opening + ", ".join(items) + closing
    pad = " " * (indent * (depth + 1))
    body = (",\n" + pad).join(items)
    return f"{opening}\n{pad}{body}\n{' ' * (indent * depth)}{closing}"
