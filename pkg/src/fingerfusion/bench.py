"""Per-image inference timing (edge extraction included when the network uses edges)."""
from __future__ import annotations

import time
from typing import Optional

import numpy as np

from . import edges

WARMUP = 3


def _limit_threads(threads: Optional[int]):
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads) if threads else threadpool_limits(limits=None)


def time_forward(net, depth: np.ndarray, n: int, warmup: int = WARMUP) -> np.ndarray:
    """Wall-clock milliseconds of ``n`` single-image forwards after ``warmup`` untimed ones."""
    uses_edge = "edge" in net.streams
    uses_depth = "depth" in net.streams
    times = np.empty(n)
    for i in range(warmup + n):
        t0 = time.perf_counter()
        edge = edges.extract_edges(depth) if uses_edge else None
        net.forward(depth if uses_depth else None, edge, keep_cache=False)
        dt = time.perf_counter() - t0
        if i >= warmup:
            times[i - warmup] = dt * 1e3
    return times


def stats(times_ms: np.ndarray) -> dict:
    return {
        "mean_ms": float(np.mean(times_ms)),
        "p95_ms": float(np.percentile(times_ms, 95)),
        "min_ms": float(np.min(times_ms)),
        "max_ms": float(np.max(times_ms)),
        "n": int(len(times_ms)),
    }


def bench(checkpoint, n: int = 50, depth: Optional[np.ndarray] = None, threads: Optional[int] = None, seed: int = 0) -> dict:
    """Timing stats for one network on a single 96x96 crop.

    The single-threaded reference figures are always reported under
    ``"single"``; when ``threads`` > 1 the parallel figures appear under
    ``"parallel"``.
    """
    if n < 10:
        raise ValueError("bench needs n >= 10")
    net = checkpoint.to_network() if hasattr(checkpoint, "to_network") else checkpoint
    if depth is None:
        from .data.synth import generate_samples

        depth = next(generate_samples(seed, 1)).depth
    depth = np.asarray(depth, dtype=np.float32).reshape(1, 1, net.input_size, net.input_size)
    with _limit_threads(1):
        out = {"arch_id": net.arch_id, "single": stats(time_forward(net, depth, n))}
    if threads and threads > 1:
        with _limit_threads(threads):
            out["parallel"] = stats(time_forward(net, depth, n))
            out["parallel"]["threads"] = threads
    return out
