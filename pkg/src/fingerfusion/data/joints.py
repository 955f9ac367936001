"""Joint sets, crop metadata and the crop-normalized target encoding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FINGERTIPS = ("thumb", "index", "middle", "ring", "pinky")
JOINT_NAMES = FINGERTIPS + ("palm",)
DEFAULT_CUBE_MM = 300.0


@dataclass(frozen=True)
class CropMeta:
    center: tuple  # (x, y, z) in mm
    cube_size: float = DEFAULT_CUBE_MM
    frame_id: int = 0

    def __post_init__(self):
        if not self.cube_size > 0:
            raise ValueError(f"cube_size must be positive, got {self.cube_size}")
        if len(self.center) != 3 or not np.all(np.isfinite(self.center)):
            raise ValueError(f"crop center must be a finite 3D point, got {self.center}")

    @property
    def half(self) -> float:
        return self.cube_size / 2.0


@dataclass
class JointSet:
    """Named 3D joint positions in millimetres, rows in ``JOINT_NAMES`` order."""

    positions: np.ndarray  # (6, 3) with palm, (5, 3) without

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.shape not in ((6, 3), (5, 3)):
            raise ValueError(f"expected (6, 3) or (5, 3) joint array, got {self.positions.shape}")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("joint positions must be finite")

    @property
    def include_palm(self) -> bool:
        return self.positions.shape[0] == 6

    @property
    def names(self):
        return JOINT_NAMES[: self.positions.shape[0]]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.positions[JOINT_NAMES.index(name)]

    def fingertips(self) -> np.ndarray:
        return self.positions[:5]


def normalize_joints(joints: JointSet, meta: CropMeta, return_flags: bool = False):
    """Per-axis ``(p - center) / (cube_size/2)`` flattened in joint order.

    Coordinates outside ``[-2, 2]`` (further than a full cube size from the
    center) are clamped; ``return_flags`` additionally yields a per-joint mask
    of clamped joints.
    """
    pos = joints.positions
    v = (pos - np.asarray(meta.center, dtype=np.float64)) / meta.half
    clamped = np.any(np.abs(v) > 2.0, axis=1)
    v = np.clip(v, -2.0, 2.0).reshape(-1)
    if return_flags:
        return v, clamped
    return v


def denormalize_joints(v, meta: CropMeta) -> JointSet:
    v = np.asarray(v, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(v)):
        raise ValueError("normalized joint vector must be finite")
    return JointSet(v * meta.half + np.asarray(meta.center, dtype=np.float64))
