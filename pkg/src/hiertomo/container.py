"""Binary artifact container: datasets, checkpoints, matrices.

Layout (all integers little-endian):

    magic            8 bytes  b"HTCONT\\x00\\x01"  (trailing byte = version)
    kind length      u32, then UTF-8 kind tag ("dataset" | "checkpoint" | "matrix")
    metadata length  u64, then UTF-8 JSON text
    tensor count     u32
    per tensor:      u32 name length, UTF-8 name,
                     u32 rank, rank x u64 dims,
                     raw float64 little-endian data

Round trips are bit-exact; writes go to a temp file renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"HTCONT\x00"
VERSION = 1
KINDS = ("dataset", "checkpoint", "matrix")


class ContainerError(ValueError):
    pass


def save_container(path, kind: str, metadata: dict, tensors: dict) -> None:
    """Write named float64 tensors plus JSON metadata atomically."""
    if kind not in KINDS:
        raise ContainerError(f"unknown container kind {kind!r}")
    path = Path(path)
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC + bytes([VERSION]))
            kb = kind.encode("utf-8")
            fh.write(struct.pack("<I", len(kb)) + kb)
            fh.write(struct.pack("<Q", len(meta)) + meta)
            fh.write(struct.pack("<I", len(tensors)))
            for name, arr in tensors.items():
                # asarray, not ascontiguousarray: the latter promotes
                # 0-d arrays to 1-d and would corrupt scalar ranks
                arr = np.asarray(arr, dtype="<f8")
                nb = name.encode("utf-8")
                fh.write(struct.pack("<I", len(nb)) + nb)
                fh.write(struct.pack("<I", arr.ndim))
                for d in arr.shape:
                    fh.write(struct.pack("<Q", d))
                fh.write(arr.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise ContainerError(
                f"{self.path}: truncated container at offset {self.off}")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_container(path, expect_kind: str | None = None):
    """Read a container; returns (kind, metadata, tensors dict)."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read(), path)
    magic = rd.take(8)
    if magic[:7] != MAGIC:
        raise ContainerError(f"{path}: bad magic at offset 0")
    version = magic[7]
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported container version {version}")
    kind = rd.take(rd.u32()).decode("utf-8")
    if kind not in KINDS:
        raise ContainerError(f"{path}: unknown container kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise ContainerError(
            f"{path}: container kind {kind!r} does not match expected {expect_kind!r}")
    metadata = json.loads(rd.take(rd.u64()).decode("utf-8"))
    tensors = {}
    for _ in range(rd.u32()):
        name = rd.take(rd.u32()).decode("utf-8")
        rank = rd.u32()
        dims = tuple(rd.u64() for _ in range(rank))
        count = int(np.prod(dims, dtype=np.int64)) if dims else 1
        raw = rd.take(count * 8)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).copy()
    return kind, metadata, tensors
