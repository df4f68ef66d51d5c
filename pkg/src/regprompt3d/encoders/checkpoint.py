"""Versioned flat binary checkpoints for named float64 arrays.

Layout (all little-endian)::

    magic   4 bytes  b"RP3D"
    version u16
    branch  u16 length + utf-8 bytes   ("point", "text", "dual", "prompt")
    count   u32
    count x { name: u16 length + utf-8, ndim: u8, dims: ndim x u32 }
    payload: float64 values of every array, in table order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RP3D"
VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def dumps(arrays: dict[str, np.ndarray], branch: str) -> bytes:
    head = [MAGIC, struct.pack("<H", VERSION), _pack_str(branch), struct.pack("<I", len(arrays))]
    payload = []
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        head.append(_pack_str(name))
        head.append(struct.pack("<B", arr.ndim))
        head.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        payload.append(arr.astype("<f8").tobytes())
    return b"".join(head + payload)


def loads(buf: bytes) -> tuple[str, dict[str, np.ndarray]]:
    if buf[:4] != MAGIC:
        raise ValueError(f"bad checkpoint magic {buf[:4]!r}")
    pos = 4
    (version,) = struct.unpack_from("<H", buf, pos)
    pos += 2
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")

    def read_str():
        nonlocal pos
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        s = buf[pos:pos + n].decode("utf-8")
        pos += n
        return s

    branch = read_str()
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    table = []
    for _ in range(count):
        name = read_str()
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        table.append((name, shape))
    arrays = {}
    for name, shape in table:
        n = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
        pos += 8 * n
    if pos != len(buf):
        raise ValueError(f"checkpoint has {len(buf) - pos} trailing bytes")
    return branch, arrays


def save(path, arrays: dict[str, np.ndarray], branch: str) -> None:
    Path(path).write_bytes(dumps(arrays, branch))


def load(path) -> tuple[str, dict[str, np.ndarray]]:
    return loads(Path(path).read_bytes())
