"""Central finite-difference verification of every backward kernel."""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from . import layers as L
from .layerspec import LayerSpec, backward, forward

DEFAULT_TOL = 1e-6


class GradCheckError(RuntimeError):
    pass


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def _probe_input(kind, shape, rng, eps):
    if kind == "relu":
        # keep every entry at least 10*eps away from the kink
        mag = rng.uniform(max(10 * eps, 0.05), 1.0, size=shape)
        return mag * rng.choice([-1.0, 1.0], size=shape)
    if kind == "maxpool":
        # distinct values spaced far beyond eps: no ties, no swaps under perturbation
        vals = rng.permutation(int(np.prod(shape))).astype(np.float64)
        return (vals * 0.01 - vals.size * 0.005).reshape(shape)
    return rng.standard_normal(shape)


def _check_finite(name, what, arr):
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise GradCheckError(f"{name}: non-finite {what} at flat index {int(bad[0])}")


def numeric_grad(fn, arr, eps):
    """Central differences of scalar ``fn()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = fn()
        flat[i] = orig - eps
        fm = fn()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return g


def grad_check(layer: Union[LayerSpec, str], trial_shapes: Sequence[tuple], eps: float = 1e-4, seed: int = 0) -> float:
    """Max relative error between analytic and numeric gradients, over all inputs and parameters.

    ``trial_shapes`` lists the full (batch-included) shape of each layer input.
    Pass ``"euclidean_loss"`` as ``layer`` to check the loss (inputs: prediction, target).
    """
    rng = np.random.default_rng(seed)
    if layer == "euclidean_loss":
        return _check_loss(trial_shapes[0], eps, rng)
    name = str(layer)
    inputs = [_probe_input(layer.kind, tuple(s), rng, eps) for s in trial_shapes]
    per_sample = [tuple(s[1:]) for s in trial_shapes]
    params = [rng.standard_normal(s) * 0.5 for s in layer.param_shapes(per_sample[0])]
    out_shape = (trial_shapes[0][0],) + tuple(layer.output_shape(*per_sample))
    probe = rng.standard_normal(out_shape)

    def objective():
        out, _ = forward(layer, inputs, params)
        _check_finite(name, "forward output", out)
        return float(np.sum(out * probe))

    out, cache = forward(layer, inputs, params)
    _check_finite(name, "forward output", out)
    gin, gpar = backward(layer, probe, cache, inputs, params)
    worst = 0.0
    for which, (arr, analytic) in enumerate(list(zip(inputs, gin)) + list(zip(params, gpar))):
        _check_finite(name, f"analytic gradient {which}", analytic)
        numeric = numeric_grad(objective, arr, eps)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def _check_loss(shape, eps, rng):
    pred = rng.standard_normal(shape)
    target = rng.standard_normal(shape)
    _, analytic = L.euclidean_loss(pred, target)
    numeric = numeric_grad(lambda: L.euclidean_loss(pred, target)[0], pred, eps)
    return relative_error(analytic, numeric)


# (label, layer, input shapes) covering every primitive the networks use
SUITE = [
    ("conv5x5_s1", LayerSpec.conv(3, 5, 1), [(2, 2, 7, 7)]),
    ("conv5x5_s2", LayerSpec.conv(3, 5, 2), [(2, 2, 8, 8)]),
    ("conv3x3_s1", LayerSpec.conv(3, 3, 1), [(2, 2, 6, 6)]),
    ("conv3x3_s2", LayerSpec.conv(3, 3, 2), [(2, 2, 7, 7)]),
    ("conv3x3_valid", LayerSpec.conv(2, 3, 1, pad=0), [(1, 3, 5, 5)]),
    ("maxpool", LayerSpec("maxpool"), [(2, 3, 5, 6)]),
    ("relu", LayerSpec("relu"), [(2, 3, 4, 4)]),
    ("fc", LayerSpec.fc(5), [(3, 7)]),
    ("flatten", LayerSpec("flatten"), [(2, 3, 2, 2)]),
    ("concat_channels", LayerSpec("concat_channels"), [(2, 2, 3, 3), (2, 3, 3, 3)]),
    ("blend", LayerSpec("blend", alpha=0.8, beta=0.2), [(2, 1, 4, 4), (2, 1, 4, 4)]),
    ("euclidean_loss", "euclidean_loss", [(4, 18)]),
]


def run_suite(eps: float = 1e-4) -> dict:
    return {label: grad_check(layer, shapes, eps) for label, layer, shapes in SUITE}
