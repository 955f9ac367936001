"""Forward and backward kernels for the fixed layer set.

Every function takes and returns numpy arrays in NCHW layout (or NK for
fully connected data). Convolutions use cross-correlation (no kernel flip)
with zero padding and are lowered to a single matrix product via im2col.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, check_ndim


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def _check_conv(x, weights, stride, pad):
    check_ndim("conv input", x, 4)
    check_ndim("conv weights", weights, 4)
    n, c, h, w = x.shape
    d, wc, fh, fw = weights.shape
    if fh != fw or fh % 2 == 0:
        raise ShapeError(f"conv kernel must be square and odd, got {fh}x{fw}")
    if wc != c:
        raise ShapeError(f"conv channels: input has C={c} but weights expect C={wc}")
    if stride < 1 or pad < 0:
        raise ShapeError(f"conv stride must be >= 1 and pad >= 0 (stride={stride}, pad={pad})")
    if h + 2 * pad < fh:
        raise ShapeError(f"conv height: H={h} with pad {pad} is smaller than kernel {fh}")
    if w + 2 * pad < fw:
        raise ShapeError(f"conv width: W={w} with pad {pad} is smaller than kernel {fw}")
    return n, c, h, w, d, fh


def _taps(f: int, stride: int, ho: int, wo: int):
    for ky in range(f):
        ys = slice(ky, ky + stride * (ho - 1) + 1, stride)
        for kx in range(f):
            yield ky, kx, ys, slice(kx, kx + stride * (wo - 1) + 1, stride)


def im2col(x: np.ndarray, f: int, stride: int, pad: int) -> np.ndarray:
    """Column matrix of shape ``(C*f*f, N*Ho*Wo)``.

    Rows are ordered (c, ky, kx), matching ``weights.reshape(D, -1)``; columns
    are output positions (n, y, x). Filled one kernel tap at a time so every
    copy moves contiguous image rows.
    """
    n, c, h, w = x.shape
    ho = conv_output_size(h, f, stride, pad)
    wo = conv_output_size(w, f, stride, pad)
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, :, pad : pad + h, pad : pad + w] = x
    else:
        xp = x
    cols = np.empty((c, f, f, n, ho, wo), dtype=x.dtype)
    for ky, kx, ys, xs in _taps(f, stride, ho, wo):
        cols[:, ky, kx] = xp[:, :, ys, xs].transpose(1, 0, 2, 3)
    return cols.reshape(c * f * f, n * ho * wo)


def col2im(cols: np.ndarray, x_shape, f: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back to an NCHW image."""
    n, c, h, w = x_shape
    ho = conv_output_size(h, f, stride, pad)
    wo = conv_output_size(w, f, stride, pad)
    cols = cols.reshape(c, f, f, n, ho, wo)
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ky, kx, ys, xs in _taps(f, stride, ho, wo):
        out[:, :, ys, xs] += cols[:, ky, kx].transpose(1, 0, 2, 3)
    if pad:
        out = np.ascontiguousarray(out[:, :, pad:-pad, pad:-pad])
    return out


def conv2d_forward(x, weights, bias, stride: int = 1, pad: int = 0, return_cols: bool = False):
    n, _, h, w, d, f = _check_conv(x, weights, stride, pad)
    if bias.shape != (d,):
        raise ShapeError(f"conv bias: expected shape ({d},), got {bias.shape}")
    ho = conv_output_size(h, f, stride, pad)
    wo = conv_output_size(w, f, stride, pad)
    cols = im2col(x, f, stride, pad)
    out = weights.reshape(d, -1) @ cols
    out += bias[:, None]
    out = np.ascontiguousarray(out.reshape(d, n, ho, wo).transpose(1, 0, 2, 3))
    if return_cols:
        return out, cols
    return out


def _grad_matrix(grad_out, shape):
    n, d, ho, wo = shape
    if grad_out.shape != shape:
        raise ShapeError(f"conv grad_out: expected {shape}, got {grad_out.shape}")
    return np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3)).reshape(d, n * ho * wo)


def conv2d_backward(grad_out, x, weights, stride: int = 1, pad: int = 0, cols=None):
    """Return ``(grad_input, grad_weights, grad_bias)``.

    ``cols`` may carry the im2col matrix saved by the forward pass.
    """
    n, c, h, w, d, f = _check_conv(x, weights, stride, pad)
    ho = conv_output_size(h, f, stride, pad)
    wo = conv_output_size(w, f, stride, pad)
    g = _grad_matrix(grad_out, (n, d, ho, wo))
    if cols is None:
        cols = im2col(x, f, stride, pad)
    grad_w = (g @ cols.T).reshape(weights.shape)
    grad_cols = weights.reshape(d, -1).T @ g
    grad_x = col2im(grad_cols, x.shape, f, stride, pad)
    return grad_x, grad_w, g.sum(axis=1)


def conv2d_param_grads(grad_out, x, weights, stride: int = 1, pad: int = 0, cols=None):
    """Weight and bias gradients only (first layer of a network needs no input gradient)."""
    n, c, h, w, d, f = _check_conv(x, weights, stride, pad)
    ho = conv_output_size(h, f, stride, pad)
    wo = conv_output_size(w, f, stride, pad)
    g = _grad_matrix(grad_out, (n, d, ho, wo))
    if cols is None:
        cols = im2col(x, f, stride, pad)
    return (g @ cols.T).reshape(weights.shape), g.sum(axis=1)


@dataclass(frozen=True)
class PoolIndex:
    """Winning position (0..3, row-major in the 2x2 window) per pooled output."""

    argmax: np.ndarray
    input_shape: tuple


def maxpool_forward(x):
    check_ndim("maxpool input", x, 4)
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool needs H, W >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    # q[k] is window position k (row-major) for every output, stored contiguously
    q = x[:, :, : 2 * ho, : 2 * wo].reshape(n, c, ho, 2, wo, 2).transpose(3, 5, 0, 1, 2, 4)
    q = np.ascontiguousarray(q).reshape(4, n, c, ho, wo)
    # strict > keeps the earlier position on ties, like np.argmax
    w1 = (q[1] > q[0]).view(np.uint8)
    w3 = (q[3] > q[2]).view(np.uint8)
    m01 = np.maximum(q[0], q[1])
    m23 = np.maximum(q[2], q[3])
    lower = (m23 > m01).view(np.uint8)
    idx = w1 + lower * (w3 + np.uint8(2) - w1)
    return np.maximum(m01, m23), PoolIndex(idx, tuple(x.shape))


def maxpool_backward(grad_out, index: PoolIndex, input_shape):
    input_shape = tuple(input_shape)
    if index.input_shape != input_shape:
        raise ShapeError(f"maxpool argmax map was recorded for {index.input_shape}, not {input_shape}")
    if grad_out.shape != index.argmax.shape:
        raise ShapeError(f"maxpool grad_out {grad_out.shape} does not match argmax map {index.argmax.shape}")
    n, c, h, w = input_shape
    ho, wo = h // 2, w // 2
    grad_x = np.zeros(input_shape, dtype=grad_out.dtype)
    for k in range(4):
        dy, dx = divmod(k, 2)
        np.multiply(grad_out, index.argmax == k, out=grad_x[:, :, dy : 2 * ho : 2, dx : 2 * wo : 2])
    return grad_x


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(grad_out, x):
    if grad_out.shape != x.shape:
        raise ShapeError(f"relu grad_out {grad_out.shape} does not match input {x.shape}")
    # Subgradient at exactly 0 is 0.
    return grad_out * (x > 0)


def fc_forward(x, weights, bias):
    check_ndim("fc input", x, 2)
    check_ndim("fc weights", weights, 2)
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(f"fc input features: K={x.shape[1]} but weights expect K={weights.shape[1]}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"fc bias: expected ({weights.shape[0]},), got {bias.shape}")
    out = x @ weights.T
    out += bias
    return out


def fc_backward(grad_out, x, weights):
    if grad_out.shape != (x.shape[0], weights.shape[0]):
        raise ShapeError(f"fc grad_out: expected {(x.shape[0], weights.shape[0])}, got {grad_out.shape}")
    return grad_out @ weights, grad_out.T @ x, grad_out.sum(axis=0)


def flatten_forward(x):
    """Row-major (channel, height, width) flattening per sample."""
    return x.reshape(x.shape[0], -1)


def flatten_backward(grad_out, input_shape):
    return grad_out.reshape(input_shape)


def concat_channels(a, b):
    if a.ndim != b.ndim or a.ndim < 2:
        raise ShapeError(f"concat: rank mismatch {a.shape} vs {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat batch: N={a.shape[0]} vs N={b.shape[0]}")
    if a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"concat spatial: {a.shape[2:]} vs {b.shape[2:]}")
    return np.concatenate([a, b], axis=1)


def split_channels(grad_out, ca: int):
    return np.ascontiguousarray(grad_out[:, :ca]), np.ascontiguousarray(grad_out[:, ca:])


def blend(a, b, alpha: float, beta: float):
    if a.shape != b.shape:
        raise ShapeError(f"blend: shapes differ {a.shape} vs {b.shape}")
    return alpha * a + beta * b


def blend_backward(grad_out, alpha: float, beta: float):
    return alpha * grad_out, beta * grad_out


def euclidean_loss(pred, target):
    """``(1/2N) * sum ||pred_i - target_i||^2`` and its gradient ``(pred - target)/N``."""
    if pred.shape != target.shape:
        raise ShapeError(f"loss: prediction {pred.shape} vs target {target.shape}")
    n = pred.shape[0]
    diff = pred - target
    loss = float(np.sum(diff.astype(np.float64) ** 2) / (2 * n))
    return loss, diff / n
