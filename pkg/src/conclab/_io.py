"""JSON/CSV emission with fixed 17-significant-digit floats."""
from __future__ import annotations

import json
import math

import numpy as np

SCHEMA_VERSION = "v1"


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "inf" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    """Serialize ``obj`` like ``json.dumps`` but with every float at 17 significant digits."""
    pieces: list[str] = []
    _emit(obj, pieces, indent, 0)
    return "".join(pieces)


def _emit(obj, out, indent, level):
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, indent, level)
    elif isinstance(obj, dict):
        _emit_container(list(obj.items()), "{", "}", out, indent, level, is_dict=True)
    elif isinstance(obj, (list, tuple)):
        _emit_container(list(obj), "[", "]", out, indent, level, is_dict=False)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_container(items, open_, close, out, indent, level, is_dict):
    if not items:
        out.append(open_ + close)
        return
    # arrays of scalars stay on one line even when indenting
    flat = not is_dict and all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items)
    out.append(open_)
    for i, item in enumerate(items):
        if i:
            out.append(",")
        if indent is not None and not flat:
            out.append("\n" + " " * (indent * (level + 1)))
        elif i:
            out.append(" ")
        if is_dict:
            key, value = item
            out.append(json.dumps(str(key)) + ": ")
            _emit(value, out, indent, level + 1)
        else:
            _emit(item, out, indent, level + 1)
    if indent is not None and not flat:
        out.append("\n" + " " * (indent * level))
    out.append(close)


def encode_array(a: np.ndarray) -> list:
    """Nested lists; complex entries become ``[re, im]`` pairs."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.tolist()


def decode_array(data, complex_: bool) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if complex_:
        return a[..., 0] + 1j * a[..., 1]
    return a
