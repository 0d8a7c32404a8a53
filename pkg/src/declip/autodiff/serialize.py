"""Self-describing little-endian tensor blobs.

Layout: ``b"DTEN"`` magic, uint32 rank, ``rank`` uint64 dims, then the
values as float64 in C order.
"""
from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

MAGIC = b"DTEN"


def tensor_to_bytes(values) -> bytes:
    arr = np.ascontiguousarray(values, dtype="<f8")
    header = MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; returns ``(array, next_offset)``."""
    if buf[offset:offset + 4] != MAGIC:
        raise ValueError(f"bad tensor magic at offset {offset}: {buf[offset:offset + 4]!r}")
    (rank,) = struct.unpack_from("<I", buf, offset + 4)
    pos = offset + 8
    dims = struct.unpack_from(f"<{rank}Q", buf, pos)
    pos += 8 * rank
    count = int(np.prod(dims)) if rank else 1
    end = pos + 8 * count
    if end > len(buf):
        raise ValueError(f"truncated tensor: need {end} bytes, have {len(buf)}")
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(dims).astype(np.float64)
    return arr, end


def dump_tensor(values, fh: BinaryIO) -> None:
    fh.write(tensor_to_bytes(values))


def load_tensor(fh: BinaryIO) -> np.ndarray:
    arr, _ = tensor_from_bytes(fh.read())
    return arr
