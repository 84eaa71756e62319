"""Binary tensor fixture files.

Layout (all little-endian):

    magic   4 bytes  b"PHCT"
    version u8       1
    dtype   u8       0 = float32, 1 = float64
    rank    u8
    dims    rank * u64
    payload prod(dims) scalars, row-major

The reader rejects anything that deviates: wrong magic, unknown version or
dtype code, truncated headers, and payloads whose byte length is not exactly
prod(dims) * scalar width.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FixtureFormatError

__all__ = ["read_fixture", "write_fixture", "MAGIC", "VERSION"]

MAGIC = b"PHCT"
VERSION = 1

_DTYPE_BY_CODE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_BY_KIND = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_fixture(path, tensor) -> None:
    """Serialize a real tensor; lossless against ``read_fixture``."""
    tensor = np.asarray(tensor)
    code = _CODE_BY_KIND.get(tensor.dtype.newbyteorder("="))
    if code is None:
        raise FixtureFormatError(
            f"unsupported tensor dtype {tensor.dtype}; use float32 or float64"
        )
    if tensor.ndim > 255:
        raise FixtureFormatError("rank exceeds the u8 rank field")
    header = MAGIC + struct.pack("<BBB", VERSION, code, tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}Q", *tensor.shape)
    payload = np.ascontiguousarray(tensor, dtype=_DTYPE_BY_CODE[code]).tobytes()
    Path(path).write_bytes(header + payload)


def read_fixture(path) -> np.ndarray:
    """Parse a fixture file back into an ndarray."""
    raw = Path(path).read_bytes()
    if len(raw) < 7:
        raise FixtureFormatError("file shorter than the fixed header")
    if raw[:4] != MAGIC:
        raise FixtureFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, dtype_code, rank = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise FixtureFormatError(f"unknown version {version}")
    dtype = _DTYPE_BY_CODE.get(dtype_code)
    if dtype is None:
        raise FixtureFormatError(f"unknown dtype code {dtype_code}")
    dims_end = 7 + 8 * rank
    if len(raw) < dims_end:
        raise FixtureFormatError("truncated dims header")
    dims = struct.unpack_from(f"<{rank}Q", raw, 7)
    count = 1
    for d in dims:
        count *= d
    expected = dims_end + count * dtype.itemsize
    if len(raw) != expected:
        raise FixtureFormatError(
            f"payload length mismatch: file has {len(raw) - dims_end} payload "
            f"bytes, dims {dims} require {count * dtype.itemsize}"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=dims_end)
    return data.reshape(dims).astype(dtype.newbyteorder("="), copy=True)
