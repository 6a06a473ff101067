"""IGF1 / FGF1 field files and atomic file output.

Layout (little-endian): 4 magic bytes, five int64 header words
``x0, y0, width, height, reserved=0``, then ``width * height`` payload words,
row-major with rows in increasing y.  IGF1 payloads are int64, FGF1 float64.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import DomainError, IntField, Window

IGF_MAGIC = b"IGF1"
FGF_MAGIC = b"FGF1"
_HEADER = struct.Struct("<4s5q")


def _encode(magic: bytes, window: Window, values: np.ndarray, dtype: str) -> bytes:
    head = _HEADER.pack(magic, window.x0, window.y0, window.width, window.height, 0)
    return head + np.ascontiguousarray(values, dtype=dtype).tobytes()


def _decode(data: bytes, magic: bytes, dtype: str) -> tuple[Window, np.ndarray]:
    if len(data) < _HEADER.size:
        raise DomainError("truncated field file")
    got, x0, y0, w, h, reserved = _HEADER.unpack_from(data)
    if got != magic:
        raise DomainError(f"bad magic {got!r}, expected {magic!r}")
    if reserved != 0:
        raise DomainError("reserved header word must be 0")
    window = Window(x0, y0, w, h)
    expected = _HEADER.size + 8 * w * h
    if len(data) != expected:
        raise DomainError(f"field payload size mismatch ({len(data)} != {expected})")
    vals = np.frombuffer(data, dtype=dtype, offset=_HEADER.size).reshape(h, w)
    return window, vals.astype(dtype[1:], copy=True)


def encode_igf(field: IntField) -> bytes:
    return _encode(IGF_MAGIC, field.window, field.values, "<i8")


def decode_igf(data: bytes) -> IntField:
    window, vals = _decode(data, IGF_MAGIC, "<i8")
    return IntField(window, vals)


def encode_fgf(window: Window, values: np.ndarray) -> bytes:
    return _encode(FGF_MAGIC, window, values, "<f8")


def decode_fgf(data: bytes) -> tuple[Window, np.ndarray]:
    return _decode(data, FGF_MAGIC, "<f8")


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_igf(path, field: IntField) -> None:
    atomic_write(path, encode_igf(field))


def read_igf(path) -> IntField:
    return decode_igf(Path(path).read_bytes())


def write_fgf(path, window: Window, values: np.ndarray) -> None:
    atomic_write(path, encode_fgf(window, values))


def read_fgf(path) -> tuple[Window, np.ndarray]:
    return decode_fgf(Path(path).read_bytes())
