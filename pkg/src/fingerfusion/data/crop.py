"""Depth frames and the 96x96 hand crop."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .joints import CropMeta

CROP_SIZE = 96
BACKGROUND = 1.0


@dataclass(frozen=True)
class Intrinsics:
    """Projection of camera-frame millimetres to pixel coordinates.

    Pinhole: ``u = cx + fx * x / z``.  Orthographic: ``u = cx + fx * x`` with
    ``fx`` in pixels per millimetre.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    orthographic: bool = False

    def project(self, point):
        x, y, z = point
        if self.orthographic:
            return self.cx + self.fx * x, self.cy + self.fy * y
        return self.cx + self.fx * x / z, self.cy + self.fy * y / z

    def backproject(self, u, v, z):
        if self.orthographic:
            return (u - self.cx) / self.fx, (v - self.cy) / self.fy, z
        return (u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z

    def window_half_size(self, meta: CropMeta):
        """Half side in pixels (x, y) of the projected crop cube."""
        if self.orthographic:
            return self.fx * meta.half, self.fy * meta.half
        z = meta.center[2]
        return self.fx * meta.half / z, self.fy * meta.half / z


@dataclass
class DepthFrame:
    depth: np.ndarray  # (H, W) millimetres, 0 = missing
    intrinsics: Intrinsics
    frame_id: int = 0


def normalize_depth(depth, center_z: float, half: float) -> np.ndarray:
    """Map mm depth to ``[-1, 1]`` around ``center_z``; missing depth maps to +1."""
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.isfinite(depth) & (depth > 0)
    d = np.where(valid, (np.where(valid, depth, 0.0) - center_z) / half, BACKGROUND)
    return np.clip(d, -1.0, 1.0)


def bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray, fill: float) -> np.ndarray:
    """Sample ``img`` at pixel-center coordinates; neighbours outside the image read ``fill``."""
    h, w = img.shape
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    du = u - u0
    dv = v - v0

    def at(vv, uu):
        inside = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        return np.where(inside, img[np.clip(vv, 0, h - 1), np.clip(uu, 0, w - 1)], fill)

    top = at(v0, u0) * (1 - du) + at(v0, u0 + 1) * du
    bottom = at(v0 + 1, u0) * (1 - du) + at(v0 + 1, u0 + 1) * du
    return top * (1 - dv) + bottom * dv


def crop_window(frame: DepthFrame, meta: CropMeta, size: int = CROP_SIZE):
    """Pixel coordinates in the source frame of every crop sample (row-major)."""
    cu, cv = frame.intrinsics.project(meta.center)
    hu, hv = frame.intrinsics.window_half_size(meta)
    if not (hu > 0 and hv > 0):
        raise ValueError("empty crop window")
    h, w = frame.depth.shape
    if cu + hu < 0 or cu - hu > w - 1 or cv + hv < 0 or cv - hv > h - 1:
        raise ValueError(f"empty crop window: center projects to ({cu:.1f}, {cv:.1f}) outside {w}x{h} frame")
    # integer coordinates are pixel centers
    steps = (np.arange(size) + 0.5) / size
    us = cu - hu + steps * 2 * hu
    vs = cv - hv + steps * 2 * hv
    return np.meshgrid(us, vs)


def crop_and_normalize(frame: DepthFrame, meta: CropMeta, size: int = CROP_SIZE) -> np.ndarray:
    """Cube crop around ``meta.center`` resampled to ``[1, 1, size, size]`` in ``[-1, 1]``.

    Source pixels are normalized before bilinear resampling so that missing
    depth (+1) is never averaged with raw millimetre values.
    """
    uu, vv = crop_window(frame, meta, size)
    norm = normalize_depth(frame.depth, meta.center[2], meta.half)
    crop = bilinear_sample(norm, uu, vv, BACKGROUND)
    return crop.astype(np.float32).reshape(1, 1, size, size)
