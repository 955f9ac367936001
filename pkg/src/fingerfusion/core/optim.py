from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from .tensor import ParamTensor, ShapeError


def tie_groups(params: Iterable[ParamTensor]) -> dict:
    groups = defaultdict(list)
    for p in params:
        if p.tie_group is not None:
            groups[p.tie_group].append(p)
    return dict(groups)


def sum_tied_grads(params: Iterable[ParamTensor]) -> None:
    """Replace each tied member's gradient by the group total (fixed member order)."""
    for name, members in tie_groups(params).items():
        if len(members) < 2:
            continue
        shape = members[0].shape
        if any(m.shape != shape for m in members):
            raise ShapeError(f"tie group {name!r} mixes shapes")
        total = members[0].grad.copy()
        for m in members[1:]:
            total += m.grad
        for m in members:
            m.grad[...] = total


def sgd_step(params: Iterable[ParamTensor], lr: float, momentum: float = 0.9) -> None:
    """``v <- momentum*v + grad; value <- value - lr*v``; gradients are zeroed afterwards.

    Tied gradients must already hold the group sum (see :func:`sum_tied_grads`).
    """
    for p in params:
        v = p.momentum_buf
        v *= momentum
        v += p.grad
        p.value -= np.asarray(lr, dtype=p.value.dtype) * v
        p.grad[...] = 0
