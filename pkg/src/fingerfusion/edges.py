"""Edge-image stream computed from a normalized depth crop.

The default extractor is a Sobel gradient magnitude squashed to ``[0, 1]``
by ``m / (m + k)``. Extractors are registered by name so a learned detector
can be plugged in without touching the networks.
"""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .data.crop import BACKGROUND

DEFAULT_SATURATION = 0.5

_REGISTRY: Dict[str, Callable] = {}


def register(name: str):
    def deco(fn):
        _REGISTRY[name] = fn
        return fn

    return deco


def methods():
    return sorted(_REGISTRY)


def sobel(img: np.ndarray):
    """Horizontal and vertical Sobel responses (divided by 8) with replicate borders."""
    p = np.pad(np.asarray(img, dtype=np.float64), 1, mode="edge")
    h, w = img.shape
    s = lambda dy, dx: p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    gx = (s(-1, 1) + 2 * s(0, 1) + s(1, 1) - s(-1, -1) - 2 * s(0, -1) - s(1, -1)) / 8.0
    gy = (s(1, -1) + 2 * s(1, 0) + s(1, 1) - s(-1, -1) - 2 * s(-1, 0) - s(-1, 1)) / 8.0
    return gx, gy


def saturate(m, k: float = DEFAULT_SATURATION):
    return m / (m + k)


@register("gradient")
def gradient_edges(depth2d: np.ndarray, saturation: float = DEFAULT_SATURATION) -> np.ndarray:
    gx, gy = sobel(depth2d)
    e = saturate(np.sqrt(gx * gx + gy * gy), saturation)
    return np.where(depth2d >= BACKGROUND, 0.0, e)


def extract_edges(depth: np.ndarray, method: str = "gradient", **options) -> np.ndarray:
    """Edge image in ``[0, 1]`` with the same ``[N, 1, H, W]`` (or ``[H, W]``) shape as ``depth``.

    Background pixels (depth at +1) always read 0.
    """
    if method not in _REGISTRY:
        raise ValueError(f"unknown edge method {method!r}; registered: {', '.join(methods())}")
    fn = _REGISTRY[method]
    arr = np.asarray(depth)
    if arr.ndim == 2:
        return fn(arr, **options).astype(np.float32)
    if arr.ndim != 4 or arr.shape[1] != 1:
        raise ValueError(f"expected [N, 1, H, W] depth crop, got {arr.shape}")
    out = np.empty(arr.shape, dtype=np.float32)
    for i in range(arr.shape[0]):
        out[i, 0] = fn(arr[i, 0], **options)
    return out
