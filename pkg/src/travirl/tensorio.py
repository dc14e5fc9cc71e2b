"""Binary tensor container used for datasets and checkpoints.

Record layout, all little-endian:

    magic   5 bytes  b"TRAV1"
    dtype   u8       1 = float32, 2 = float64
    ndim    u8
    dims    u32 * ndim
    payload row-major raw values

Round trips are bit-exact for both dtypes.  Files may hold a single record
(``write_tensor``/``read_tensor``) or a stream of records appended to an open
file object (``write_record``/``read_record``).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataFormatError

MAGIC = b"TRAV1"
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_OF = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def write_record(fh, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _CODE_OF:
        raise DataFormatError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    fh.write(MAGIC)
    fh.write(struct.pack("<BB", _CODE_OF[arr.dtype], arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataFormatError(f"truncated {what} at offset {fh.tell() - len(buf)}")
    return buf


def read_record(fh) -> np.ndarray:
    start = fh.tell()
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise DataFormatError(f"bad magic {magic!r} at offset {start}")
    code, ndim = struct.unpack("<BB", _read_exact(fh, 2, "header"))
    if code not in _DTYPE_CODES:
        raise DataFormatError(f"unknown dtype code {code} at offset {start + len(MAGIC)}")
    dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "dims"))
    count = 1
    for d in dims:
        count *= d
    dtype = _DTYPE_CODES[code]
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise DataFormatError(
            f"payload length {len(payload)} does not match dims {dims} "
            f"({count} elements) at offset {fh.tell() - len(payload)}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def write_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_record(fh, array)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        arr = read_record(fh)
        trailing = fh.read(1)
        if trailing:
            raise DataFormatError(f"trailing bytes at offset {fh.tell() - 1}")
    return arr
