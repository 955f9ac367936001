"""Tensor conventions and the trainable parameter container.

Tensors are plain C-contiguous numpy arrays. Training and inference run in
single precision; double precision is used only for gradient verification.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SINGLE = np.float32
DOUBLE = np.float64


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation."""


def as_tensor(data, dtype=SINGLE) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return arr


def check_ndim(name: str, arr: np.ndarray, ndim: int) -> None:
    if arr.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim}-D tensor, got shape {arr.shape}")


@dataclass(eq=False)
class ParamTensor:
    """A trainable tensor with its gradient and momentum buffer.

    Parameters that share a ``tie_group`` are distinct objects holding
    identical values; their gradients are summed before every update.
    """

    name: str
    value: np.ndarray
    tie_group: Optional[str] = None
    grad: np.ndarray = field(default=None, repr=False)
    momentum_buf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.momentum_buf is None:
            self.momentum_buf = np.zeros_like(self.value)
        if not (self.value.shape == self.grad.shape == self.momentum_buf.shape):
            raise ShapeError(f"{self.name}: value/grad/momentum shapes differ")

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def astype(self, dtype) -> "ParamTensor":
        return ParamTensor(
            self.name,
            self.value.astype(dtype),
            self.tie_group,
            self.grad.astype(dtype),
            self.momentum_buf.astype(dtype),
        )
