"""Layer descriptions and a uniform forward/backward dispatch over them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import layers as L
from .tensor import ShapeError

KINDS = ("conv", "maxpool", "relu", "fc", "flatten", "concat_channels", "blend")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: Optional[int] = None
    kernel: Optional[int] = None
    stride: int = 1
    pad: int = 0
    out_units: Optional[int] = None
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "conv":
            if not self.out_channels or self.out_channels < 1:
                raise ValueError("conv needs out_channels >= 1")
            if self.kernel is None or self.kernel < 1 or self.kernel % 2 == 0:
                raise ValueError(f"conv kernel must be odd, got {self.kernel}")
            if self.stride < 1 or self.pad < 0:
                raise ValueError("conv needs stride >= 1 and pad >= 0")
        if self.kind == "fc" and (not self.out_units or self.out_units < 1):
            raise ValueError("fc needs out_units >= 1")

    @classmethod
    def conv(cls, d: int, f: int, stride: int = 1, pad: Optional[int] = None) -> "LayerSpec":
        return cls("conv", out_channels=d, kernel=f, stride=stride, pad=f // 2 if pad is None else pad)

    @classmethod
    def fc(cls, n: int) -> "LayerSpec":
        return cls("fc", out_units=n)

    @property
    def n_inputs(self) -> int:
        return 2 if self.kind in ("concat_channels", "blend") else 1

    def param_shapes(self, in_shape) -> list:
        """Shapes of (weights, bias) given the per-sample input shape, or []."""
        if self.kind == "conv":
            c = in_shape[0]
            return [(self.out_channels, c, self.kernel, self.kernel), (self.out_channels,)]
        if self.kind == "fc":
            return [(self.out_units, int(np.prod(in_shape))), (self.out_units,)]
        return []

    def output_shape(self, *in_shapes):
        """Per-sample output shape (batch dimension excluded)."""
        s = in_shapes[0]
        if self.kind == "conv":
            _, h, w = s
            return (
                self.out_channels,
                L.conv_output_size(h, self.kernel, self.stride, self.pad),
                L.conv_output_size(w, self.kernel, self.stride, self.pad),
            )
        if self.kind == "maxpool":
            return (s[0], s[1] // 2, s[2] // 2)
        if self.kind == "fc":
            return (self.out_units,)
        if self.kind == "flatten":
            return (int(np.prod(s)),)
        if self.kind == "concat_channels":
            a, b = in_shapes
            if a[1:] != b[1:]:
                raise ShapeError(f"concat spatial: {a[1:]} vs {b[1:]}")
            return (a[0] + b[0],) + tuple(a[1:])
        if self.kind == "blend":
            if in_shapes[0] != in_shapes[1]:
                raise ShapeError(f"blend: shapes differ {in_shapes[0]} vs {in_shapes[1]}")
        return tuple(s)

    def __str__(self):
        if self.kind == "conv":
            extra = f",s{self.stride}" if self.stride != 1 else ""
            return f"C({self.out_channels},{self.kernel}{extra})"
        if self.kind == "fc":
            return f"FC({self.out_units})"
        if self.kind == "blend":
            return f"blend({self.alpha},{self.beta})"
        return self.kind


def forward(spec: LayerSpec, inputs, params, keep_cols: bool = True):
    """Return ``(output, cache)`` for one layer application."""
    k = spec.kind
    if k == "conv":
        w, b = params
        out, cols = L.conv2d_forward(inputs[0], w, b, spec.stride, spec.pad, return_cols=True)
        return out, (cols if keep_cols else None)
    if k == "maxpool":
        return L.maxpool_forward(inputs[0])
    if k == "relu":
        out = L.relu_forward(inputs[0])
        return out, out
    if k == "fc":
        w, b = params
        return L.fc_forward(inputs[0], w, b), None
    if k == "flatten":
        return L.flatten_forward(inputs[0]), inputs[0].shape
    if k == "concat_channels":
        return L.concat_channels(inputs[0], inputs[1]), inputs[0].shape[1]
    if k == "blend":
        return L.blend(inputs[0], inputs[1], spec.alpha, spec.beta), None
    raise ValueError(k)


def backward(spec: LayerSpec, grad_out, cache, inputs, params, need_input_grad: bool = True):
    """Return ``(input_grads, param_grads)`` as lists.

    With ``need_input_grad=False`` a conv layer skips the col2im scatter and
    reports ``None`` for its input gradient.
    """
    k = spec.kind
    if k == "conv":
        if not need_input_grad:
            gw, gb = L.conv2d_param_grads(grad_out, inputs[0], params[0], spec.stride, spec.pad, cols=cache)
            return [None], [gw, gb]
        gx, gw, gb = L.conv2d_backward(grad_out, inputs[0], params[0], spec.stride, spec.pad, cols=cache)
        return [gx], [gw, gb]
    if k == "maxpool":
        return [L.maxpool_backward(grad_out, cache, inputs[0].shape)], []
    if k == "relu":
        # relu(x) > 0 exactly where x > 0, so the cached output serves as the mask.
        return [L.relu_backward(grad_out, cache)], []
    if k == "fc":
        gx, gw, gb = L.fc_backward(grad_out, inputs[0], params[0])
        return [gx], [gw, gb]
    if k == "flatten":
        return [L.flatten_backward(grad_out, cache)], []
    if k == "concat_channels":
        return list(L.split_channels(grad_out, cache)), []
    if k == "blend":
        return list(L.blend_backward(grad_out, spec.alpha, spec.beta)), []
    raise ValueError(k)
