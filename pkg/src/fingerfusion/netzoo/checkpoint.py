"""FTCK checkpoint files.

Layout (little-endian)::

    b"FTCK"  u32 version
    u16 len + utf-8 arch_id
    u32 len + utf-8 JSON metadata (iterations, seed, include_palm, ...)
    u32 tensor count
    per tensor: u16 len + utf-8 name, u8 ndim, u32 dims[ndim], f32 data
    32-byte config hash (SHA-256)
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .archs import build
from .graph import NetworkGraph

MAGIC = b"FTCK"
VERSION = 1
F32 = np.dtype("<f4")


class CheckpointFormatError(ValueError):
    pass


def config_hash(config: dict) -> bytes:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).digest()


@dataclass
class Checkpoint:
    arch_id: str
    tensors: Dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    config_hash: bytes = b"\x00" * 32

    def __eq__(self, other):
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.arch_id == other.arch_id
            and self.metadata == other.metadata
            and self.config_hash == other.config_hash
            and list(self.tensors) == list(other.tensors)
            and all(self.tensors[k].tobytes() == other.tensors[k].tobytes() and self.tensors[k].shape == other.tensors[k].shape for k in self.tensors)
        )

    @classmethod
    def from_network(cls, net: NetworkGraph, metadata=None, cfg_hash: bytes = b"\x00" * 32) -> "Checkpoint":
        meta = {
            "include_palm": bool(net.options.get("include_palm", True)),
            "input_size": int(net.input_size),
            "tied": bool(net.options.get("tied", True)),
        }
        meta.update(metadata or {})
        tensors = {p.name: p.value.astype(F32) for p in net.params}
        return cls(net.arch_id, tensors, meta, cfg_hash)

    def to_network(self, dtype=np.float32) -> NetworkGraph:
        m = self.metadata
        net = build(
            self.arch_id,
            include_palm=m.get("include_palm", True),
            input_size=m.get("input_size", 96),
            dtype=dtype,
            tied=m.get("tied", True),
        )
        net.load_values(self.tensors)
        return net

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<I", VERSION)]
        arch = self.arch_id.encode()
        out.append(struct.pack("<H", len(arch)) + arch)
        meta = json.dumps(self.metadata, sort_keys=True).encode()
        out.append(struct.pack("<I", len(meta)) + meta)
        out.append(struct.pack("<I", len(self.tensors)))
        for name, arr in self.tensors.items():
            nb = name.encode()
            arr = np.ascontiguousarray(arr, dtype=F32)
            out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
            out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            out.append(arr.tobytes())
        if len(self.config_hash) != 32:
            raise ValueError("config hash must be 32 bytes")
        out.append(self.config_hash)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Checkpoint":
        view = memoryview(raw)
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(view):
                raise CheckpointFormatError(f"checkpoint truncated at byte {pos}")
            chunk = view[pos : pos + n]
            pos += n
            return chunk

        if bytes(take(4)) != MAGIC:
            raise CheckpointFormatError("not an FTCK checkpoint")
        (version,) = struct.unpack("<I", take(4))
        if version != VERSION:
            raise CheckpointFormatError(f"FTCK version {version} unsupported (expected {VERSION})")
        (n,) = struct.unpack("<H", take(2))
        arch = bytes(take(n)).decode()
        (n,) = struct.unpack("<I", take(4))
        meta = json.loads(bytes(take(n)).decode())
        (count,) = struct.unpack("<I", take(4))
        tensors = {}
        for _ in range(count):
            (n,) = struct.unpack("<H", take(2))
            name = bytes(take(n)).decode()
            (ndim,) = struct.unpack("<B", take(1))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            tensors[name] = np.frombuffer(take(4 * size), dtype=F32).reshape(shape).copy()
        digest = bytes(take(32))
        if pos != len(view):
            raise CheckpointFormatError(f"{len(view) - pos} trailing bytes after checkpoint")
        return cls(arch, tensors, meta, digest)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
