"""End-to-end finite-difference check of a whole network's backward pass."""
from __future__ import annotations

import hashlib

import numpy as np

from ..core.layers import PoolIndex, euclidean_loss
from .archs import build


def activation_pattern(net, depth, edge) -> bytes:
    """Digest of every ReLU on/off mask and max-pool winner for one forward pass."""
    net.forward(depth, edge)
    h = hashlib.sha256()
    for node, cache in zip(net.nodes, net._cache["caches"]):
        if node.spec.kind == "relu":
            h.update(np.packbits(cache > 0).tobytes())
        elif isinstance(cache, PoolIndex):
            h.update(cache.argmax.tobytes())
    net._cache = None
    return h.digest()


def network_grad_check(arch_id: str = "single-deep", input_size: int = 24, probes: int = 20, eps: float = 1e-5, seed: int = 0, batch: int = 2, max_draws: int = 1000):
    """Compare analytic and central-difference loss gradients at randomly probed parameters.

    Runs in double precision on a reduced input size. A probe whose +-eps
    perturbation flips any ReLU or max-pool decision straddles a kink, where
    central differences are meaningless; it is redrawn. Returns
    ``(max_relative_error, rows, redrawn)`` where each row is
    ``(param name, flat index, analytic, numeric)`` and the relative error is
    ``|a - n| / max(|a|, |n|, 1e-10)``.
    """
    rng = np.random.default_rng(seed)
    net = build(arch_id, seed=seed, input_size=input_size, dtype=np.float64)
    # small random biases so no unit starts exactly at a ReLU kink
    drawn = {}
    for p in net.params:
        if p.value.ndim == 1:
            key = p.tie_group or p.name
            if key not in drawn:
                drawn[key] = rng.normal(0.0, 0.05, p.shape)
            p.value[...] = drawn[key]
    depth = rng.uniform(-1, 1, (batch, 1, input_size, input_size))
    edge = rng.uniform(0, 1, (batch, 1, input_size, input_size))
    target = rng.uniform(-1, 1, (batch, net.output_dim))

    def loss():
        return euclidean_loss(net.forward(depth, edge, keep_cache=False), target)[0]

    base = activation_pattern(net, depth, edge)
    out = net.forward(depth, edge)
    _, g = euclidean_loss(out, target)
    net.zero_grad()
    net.backward(g)

    rows = []
    worst = 0.0
    redrawn = 0
    for _ in range(max_draws):
        if len(rows) == probes:
            break
        k = int(rng.integers(len(net.params)))
        p = net.params[k]
        i = int(rng.integers(p.size))
        orig = p.value.reshape(-1)[i]
        # tied twins move together, as they do under training
        twins = [q for q in net.params if p.tie_group is not None and q.tie_group == p.tie_group]
        targets = twins or [p]
        smooth = True
        for q in targets:
            q.value.reshape(-1)[i] = orig + eps
        fp = loss()
        smooth &= activation_pattern(net, depth, edge) == base
        for q in targets:
            q.value.reshape(-1)[i] = orig - eps
        fm = loss()
        smooth &= activation_pattern(net, depth, edge) == base
        for q in targets:
            q.value.reshape(-1)[i] = orig
        if not smooth:
            redrawn += 1
            continue
        numeric = (fp - fm) / (2 * eps)
        analytic = float(p.grad.reshape(-1)[i])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-10)
        worst = max(worst, rel)
        rows.append((p.name, i, analytic, numeric))
    if len(rows) < probes:
        raise RuntimeError(f"only {len(rows)} kink-free probes found in {max_draws} draws")
    return worst, rows, redrawn
