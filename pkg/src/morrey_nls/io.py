"""GFLD1 field files and JSON report helpers.

A GFLD1 file is one JSON header line ``{"format", "dim", "n_per_axis",
"extent", "space"}`` followed by little-endian float64 ``(re, im)`` pairs in
row-major order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import FOURIER, PHYSICAL, GridField

MAGIC = "GFLD1"


def write_field(path: str | os.PathLike, f: GridField) -> Path:
    path = Path(path)
    header = {"format": MAGIC, "dim": f.dim, "n_per_axis": f.n, "extent": f.extent, "space": f.space}
    data = np.ascontiguousarray(f.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        fh.write(data.tobytes(order="C"))
    return path


def read_field(path: str | os.PathLike) -> GridField:
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line.decode("ascii"))
        dim, n = int(header["dim"]), int(header["n_per_axis"])
        extent, space = float(header["extent"]), header["space"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: not a GFLD1 file ({exc})") from exc
    if header.get("format", MAGIC) != MAGIC:
        raise ValidationError(f"{path}: unknown format {header.get('format')!r}")
    if space not in (PHYSICAL, FOURIER):
        raise ValidationError(f"{path}: bad space {space!r}")
    expected = 16 * n**dim
    if len(payload) != expected:
        raise ValidationError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    vals = np.frombuffer(payload, dtype="<c16").reshape((n,) * dim)
    return GridField(vals, extent, space)


def _clean(obj):
    """Turn numpy scalars/arrays and non-finite floats into plain JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "to_json"):
        return _clean(obj.to_json())
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def write_json(path: str | os.PathLike, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def digest(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()
