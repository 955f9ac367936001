"""Slow scalar reference implementations used as test oracles.

Nothing here imports the code under test except plain data containers, so a
shared bug cannot make an oracle agree with the implementation.
"""
import math

import numpy as np


def conv_nested(x, w, b, stride=1, pad=0):
    """Direct cross-correlation with zero padding, one output element at a time."""
    n, c, h, wd = x.shape
    d, _, f, _ = w.shape
    ho = (h + 2 * pad - f) // stride + 1
    wo = (wd + 2 * pad - f) // stride + 1
    out = np.zeros((n, d, ho, wo), dtype=np.float64)
    for i in range(n):
        for k in range(d):
            for oy in range(ho):
                for ox in range(wo):
                    acc = float(b[k])
                    for ch in range(c):
                        for ky in range(f):
                            for kx in range(f):
                                yy = oy * stride + ky - pad
                                xx = ox * stride + kx - pad
                                if 0 <= yy < h and 0 <= xx < wd:
                                    acc += float(x[i, ch, yy, xx]) * float(w[k, ch, ky, kx])
                    out[i, k, oy, ox] = acc
    return out


def sobel_nested(img, k=0.5, background=1.0):
    """Sobel/8 magnitude with replicate borders, saturated as m / (m + k)."""
    h, w = img.shape
    kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            gx = gy = 0.0
            for dy in range(3):
                for dx in range(3):
                    v = float(img[min(max(y + dy - 1, 0), h - 1), min(max(x + dx - 1, 0), w - 1)])
                    gx += kx[dy][dx] * v
                    gy += kx[dx][dy] * v
            m = math.sqrt((gx / 8) ** 2 + (gy / 8) ** 2)
            out[y, x] = 0.0 if img[y, x] >= background else m / (m + k)
    return out


def crop_pixel(depth_mm, center, cube, fx, fy, cx, cy, size=96):
    """Orthographic cube crop, one output pixel at a time."""
    h, w = depth_mm.shape
    half = cube / 2.0

    def norm(v, u):
        if not (0 <= v < h and 0 <= u < w):
            return 1.0
        d = float(depth_mm[v, u])
        if not d > 0:
            return 1.0
        return min(max((d - center[2]) / half, -1.0), 1.0)

    cu = cx + fx * center[0]
    cv = cy + fy * center[1]
    hu, hv = fx * half, fy * half
    out = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            u = cu - hu + (j + 0.5) / size * 2 * hu
            v = cv - hv + (i + 0.5) / size * 2 * hv
            u0, v0 = math.floor(u), math.floor(v)
            a, b = u - u0, v - v0
            out[i, j] = (
                norm(v0, u0) * (1 - a) * (1 - b)
                + norm(v0, u0 + 1) * a * (1 - b)
                + norm(v0 + 1, u0) * (1 - a) * b
                + norm(v0 + 1, u0 + 1) * a * b
            )
    return out


# parameter counting ---------------------------------------------------------

# (name, kind, out_channels or units, kernel, stride), copied by hand from the layer table
DEEP_TABLE = [
    ("C1", "conv", 24, 5, 1), ("P1", "pool"),
    ("C2", "conv", 24, 3, 1), ("C3", "conv", 24, 3, 1), ("C4", "conv", 24, 3, 1), ("C5", "conv", 24, 3, 1), ("P2", "pool"),
    ("C6", "conv", 32, 3, 1), ("C7", "conv", 32, 3, 1), ("C8", "conv", 48, 3, 1), ("C9", "conv", 48, 3, 1), ("C10", "conv", 48, 3, 1), ("P3", "pool"),
    ("C11", "conv", 96, 3, 1), ("C12", "conv", 128, 3, 1), ("P4", "pool"),
]
MEDIAN_DROP = {"C5", "C10", "C12"}
SHALLOW_DROP = {"C5", "C10", "C12", "C11", "P4"}


def table(arch):
    if arch == "single-median":
        return [r for r in DEEP_TABLE if r[0] not in MEDIAN_DROP]
    if arch == "single-shallow":
        rows = [r for r in DEEP_TABLE if r[0] not in SHALLOW_DROP]
        return [("C8", "conv", 48, 3, 2) if r[0] == "C8" else r for r in rows]
    return list(DEEP_TABLE)


def trace_oracle(arch, size=96, channels=1):
    """``[(name, (C, H, W))]`` plus the flattened size feeding FC1."""
    out = []
    c, s = channels, size
    for row in table(arch):
        if row[1] == "conv":
            c = row[2]
            s = (s + 2 * (row[3] // 2) - row[3]) // row[4] + 1
        else:
            s //= 2
        out.append((row[0], (c, s, s)))
    return out, c * s * s


def count_conv(rows, c_in):
    total = 0
    for row in rows:
        if row[1] == "conv":
            total += row[2] * c_in * row[3] ** 2 + row[2]
            c_in = row[2]
    return total


def count_fc(flat, out_dim):
    return flat * 1024 + 1024 + 1024 * 1024 + 1024 + 1024 * out_dim + out_dim


def param_count(arch, out_dim=18):
    """Unique trainable parameters (a tied tensor counts once)."""
    if arch == "single-deep-fingeronly":
        arch, out_dim = "single-deep", 15
    if arch in ("single-deep", "single-median", "single-shallow", "fusion-enhance"):
        base = "single-deep" if arch == "fusion-enhance" else arch
        _, flat = trace_oracle(base)
        return count_conv(table(base), 1) + count_fc(flat, out_dim)
    if arch == "fusion-early":
        _, flat = trace_oracle("single-deep")
        return count_conv(DEEP_TABLE, 2) + count_fc(flat, out_dim)
    if arch == "fusion-slow":
        trunk = DEEP_TABLE[:7]
        rest = DEEP_TABLE[7:]
        _, flat = trace_oracle("single-deep")
        return count_conv(trunk, 1) + count_conv(rest, 48) + count_fc(flat, out_dim)
    if arch == "fusion-late":
        _, flat = trace_oracle("single-deep")
        return count_conv(DEEP_TABLE, 1) + count_fc(2 * flat, out_dim)
    if arch == "fusion-result":
        return 2 * param_count("single-deep", out_dim)
    raise KeyError(arch)


# metrics ------------------------------------------------------------------


def metrics_scalar(pred_mm, gt_mm, tau, discard=None):
    """err_f, mP over pairs and mP over frames by explicit loops."""
    errs = []
    frame_worst = []
    for p, g in zip(pred_mm, gt_mm):
        worst = 0.0
        for j in range(5):
            e = math.sqrt(sum((float(p[j][k]) - float(g[j][k])) ** 2 for k in range(3)))
            errs.append(e)
            worst = max(worst, e)
        frame_worst.append(worst)
    kept = [e for e in errs if discard is None or e <= discard]
    err_f = sum(kept) / len(kept)
    mp = sum(1 for e in errs if e < tau) / len(errs)
    mp_frame = sum(1 for e in frame_worst if e < tau) / len(frame_worst)
    return err_f, mp, mp_frame, len(errs) - len(kept)
