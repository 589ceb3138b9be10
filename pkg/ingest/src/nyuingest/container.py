"""Writer for the shared binary tensor container format.

Independent implementation of the published layout (the consuming pipeline
ships the reader): magic "RGDT", u32 version=1, u32 rank, u64 extents,
u8 dtype code (1=f64, 2=f32, 3=u16, 4=u8), little-endian row-major payload.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RGDT"
VERSION = 1

_DTYPES = {
    np.dtype("float64"): (1, "<f8"),
    np.dtype("float32"): (2, "<f4"),
    np.dtype("uint16"): (3, "<u2"),
    np.dtype("uint8"): (4, "u1"),
}


def tensor_bytes(arr: np.ndarray) -> bytes:
    if arr.dtype not in _DTYPES:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    code, wire = _DTYPES[arr.dtype]
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    header += struct.pack("<B", code)
    return header + np.ascontiguousarray(arr).astype(wire, copy=False).tobytes()


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_bytes(arr))
