"""Binary tensor container and checkpoint I/O.

Container layout (all integers little-endian):

    magic   4 bytes  b"RGDT"
    version u32      1
    rank    u32
    extents u64 * rank
    dtype   u8       1=f64  2=f32  3=u16  4=u8
    payload          row-major little-endian values

A checkpoint is a sequence of named containers, each prefixed by a u16 name
length and the UTF-8 name.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RGDT"
VERSION = 1

_DTYPE_BY_CODE = {1: np.dtype("<f8"), 2: np.dtype("<f4"), 3: np.dtype("<u2"), 4: np.dtype("u1")}
_CODE_BY_KIND = {("f", 8): 1, ("f", 4): 2, ("u", 2): 3, ("u", 1): 4}


class DataError(RuntimeError):
    """Malformed container, checkpoint, dataset, or config input."""


def _dtype_code(arr: np.ndarray) -> int:
    key = (arr.dtype.kind, arr.dtype.itemsize)
    if key not in _CODE_BY_KIND:
        raise DataError(f"unsupported container dtype {arr.dtype}")
    return _CODE_BY_KIND[key]


def tensor_bytes(arr: np.ndarray) -> bytes:
    code = _dtype_code(arr)
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    header += struct.pack("<B", code)
    payload = np.ascontiguousarray(arr).astype(_DTYPE_BY_CODE[code], copy=False).tobytes()
    return header + payload


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_bytes(arr))


def _read_tensor_at(buf: bytes, offset: int, where: str) -> tuple[np.ndarray, int]:
    if buf[offset:offset + 4] != MAGIC:
        raise DataError(f"{where}: bad magic bytes")
    offset += 4
    try:
        version, rank = struct.unpack_from("<II", buf, offset)
        offset += 8
        extents = struct.unpack_from(f"<{rank}Q", buf, offset)
        offset += 8 * rank
        (code,) = struct.unpack_from("<B", buf, offset)
        offset += 1
    except struct.error as exc:
        raise DataError(f"{where}: truncated header") from exc
    if version != VERSION:
        raise DataError(f"{where}: unsupported version {version}")
    if code not in _DTYPE_BY_CODE:
        raise DataError(f"{where}: unknown dtype code {code}")
    dtype = _DTYPE_BY_CODE[code]
    count = 1
    for e in extents:
        count *= e
    nbytes = count * dtype.itemsize
    if len(buf) - offset < nbytes:
        raise DataError(f"{where}: payload shorter than {nbytes} bytes")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=offset).reshape(extents)
    return arr.copy(), offset + nbytes


def read_tensor(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    arr, end = _read_tensor_at(buf, 0, str(path))
    if end != len(buf):
        raise DataError(f"{path}: {len(buf) - end} trailing bytes")
    return arr


def write_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    parts = []
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DataError(f"checkpoint entry name too long: {name!r}")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(tensor_bytes(arr))
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    while offset < len(buf):
        if len(buf) - offset < 2:
            raise DataError(f"{path}: truncated entry header")
        (name_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        tensors[name], offset = _read_tensor_at(buf, offset, f"{path}:{name}")
    return tensors
