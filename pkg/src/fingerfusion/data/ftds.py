"""FTDS: the canonical binary dataset container.

Layout (all little-endian)::

    b"FTDS"  u32 version  u32 N  u32 H  u32 W
    N x [ f32 depth[H*W]  u8 has_edge  (f32 edge[H*W] if has_edge)
          f32 joints_mm[18]  f32 center_mm[3]  f32 cube_size_mm ]

Samples are written and read one at a time, so files never need to be
resident in memory. External converters for real datasets only need to
produce this layout.
"""
from __future__ import annotations

import struct
from typing import Iterable, Iterator

import numpy as np

from .joints import CropMeta
from .sample import Sample

MAGIC = b"FTDS"
VERSION = 1
HEADER = struct.Struct("<4sIIII")
N_JOINT_VALUES = 18
F32 = np.dtype("<f4")


class DatasetFormatError(ValueError):
    pass


class BadMagicError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedDatasetError(DatasetFormatError):
    def __init__(self, index: int, n: int):
        super().__init__(f"dataset truncated while reading sample {index} of {n}")
        self.index = index


def _sample_bytes(s: Sample, h: int, w: int) -> bytes:
    if s.depth.size != h * w:
        raise ValueError(f"sample depth has {s.depth.size} values, container expects {h}x{w}")
    parts = [np.asarray(s.depth, dtype=F32).tobytes()]
    if s.edge is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(np.asarray(s.edge, dtype=F32).tobytes())
    joints = np.asarray(s.joints, dtype=F32).reshape(-1)
    if joints.size != N_JOINT_VALUES:
        raise ValueError(f"expected {N_JOINT_VALUES} joint values, got {joints.size}")
    parts.append(joints.tobytes())
    parts.append(np.array(list(s.meta.center) + [s.meta.cube_size], dtype=F32).tobytes())
    return b"".join(parts)


def write_dataset(path, samples: Iterable[Sample], height: int = 96, width: int = 96) -> int:
    """Stream ``samples`` to ``path``; returns the sample count."""
    n = 0
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, 0, height, width))
        for s in samples:
            fh.write(_sample_bytes(s, height, width))
            n += 1
        fh.seek(0)
        fh.write(HEADER.pack(MAGIC, VERSION, n, height, width))
    return n


def read_header(fh):
    raw = fh.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"not an FTDS file (magic {raw[:4]!r})")
    if len(raw) < HEADER.size:
        raise DatasetFormatError("FTDS header truncated")
    _, version, n, h, w = HEADER.unpack(raw)
    if version != VERSION:
        raise VersionMismatchError(f"FTDS version {version} unsupported (expected {VERSION})")
    return n, h, w


def _read_exact(fh, nbytes, index, n):
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise TruncatedDatasetError(index, n)
    return raw


def read_dataset(path) -> Iterator[Sample]:
    with open(path, "rb") as fh:
        n, h, w = read_header(fh)
        npix = h * w
        for i in range(n):
            depth = np.frombuffer(_read_exact(fh, 4 * npix, i, n), dtype=F32).reshape(1, 1, h, w).copy()
            flag = _read_exact(fh, 1, i, n)
            edge = None
            if flag == b"\x01":
                edge = np.frombuffer(_read_exact(fh, 4 * npix, i, n), dtype=F32).reshape(1, 1, h, w).copy()
            elif flag != b"\x00":
                raise DatasetFormatError(f"sample {i}: bad edge flag {flag!r}")
            joints = np.frombuffer(_read_exact(fh, 4 * N_JOINT_VALUES, i, n), dtype=F32).reshape(6, 3).copy()
            m = np.frombuffer(_read_exact(fh, 16, i, n), dtype=F32)
            meta = CropMeta(tuple(float(v) for v in m[:3]), float(m[3]), i)
            yield Sample(depth, edge, joints, meta)


def dataset_size(path) -> int:
    with open(path, "rb") as fh:
        return read_header(fh)[0]


def load_arrays(path, include_palm: bool = True) -> dict:
    """Stack a whole dataset into arrays (for desk-scale training)."""
    depth, edge, target, joints, centers, cubes = [], [], [], [], [], []
    for s in read_dataset(path):
        depth.append(s.depth[0])
        edge.append(None if s.edge is None else s.edge[0])
        target.append(s.target(include_palm))
        joints.append(s.joints)
        centers.append(s.meta.center)
        cubes.append(s.meta.cube_size)
    has_edge = bool(edge) and all(e is not None for e in edge)
    return {
        "depth": np.array(depth, dtype=np.float32).reshape(-1, 1, *(depth[0].shape[-2:] if depth else (96, 96))),
        "edge": np.array(edge, dtype=np.float32) if has_edge else None,
        "target": np.array(target, dtype=np.float32).reshape(len(target), -1),
        "joints": np.array(joints, dtype=np.float32).reshape(-1, 6, 3),
        "center": np.array(centers, dtype=np.float64).reshape(-1, 3),
        "cube": np.array(cubes, dtype=np.float64),
    }
