"""Bit-exact binary serialization of named float64 matrices.

Layout: 8-byte magic ``DDNMROM1``, then one record per matrix:
``u32`` name length, UTF-8 name bytes, ``u64`` rows, ``u64`` cols, and
``rows*cols`` little-endian float64 values in column-major order.  All
integers are little-endian.  The format is deliberately dumb so that any
language can read it back bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"DDNMROM1"


def write_matrices(path, matrices) -> None:
    """Write an ordered mapping ``{name: array}`` to ``path``.

    1-D arrays are stored as single-column matrices.
    """
    items = matrices.items() if hasattr(matrices, "items") else matrices
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in items:
            a = np.asarray(arr, dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2:
                raise ValueError(f"matrix {name!r} must be 1-D or 2-D")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
            fh.write(a.astype("<f8", copy=False).tobytes(order="F"))


def read_matrices(path) -> dict:
    """Read a file written by :func:`write_matrices`; returns ``{name: 2-D array}``."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    out = {}
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(raw):
            raise FormatError(f"{path}: truncated at byte {pos}")
        chunk = raw[pos:pos + n]
        pos += n
        return chunk

    while pos < len(raw):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        rows, cols = struct.unpack("<QQ", take(16))
        if rows * cols > (len(raw) - pos) // 8:
            raise FormatError(f"{path}: record {name!r} overruns file")
        data = np.frombuffer(take(8 * rows * cols), dtype="<f8")
        out[name] = data.reshape((rows, cols), order="F").astype(float)
    return out


def write_meta(path, entries: dict) -> None:
    """Write a flat ``key = value`` text file (strings, repr-stable)."""
    lines = [f"{k} = {v}\n" for k, v in entries.items()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_meta(path) -> dict:
    """Parse a flat key-value file written by :func:`write_meta`."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
