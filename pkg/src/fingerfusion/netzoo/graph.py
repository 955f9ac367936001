"""Ordered layer graphs with named slots and tie-aware parameter tables."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core import layerspec
from ..core.layerspec import LayerSpec
from ..core.optim import sum_tied_grads
from ..core.tensor import ParamTensor, ShapeError

STREAMS = ("depth", "edge")


@dataclass
class Node:
    name: str
    spec: LayerSpec
    inputs: tuple
    output: str
    params: List[ParamTensor] = field(default_factory=list)
    traced: bool = True  # listed in the per-layer trace


class NetworkGraph:
    """A fixed network: nodes run in list order, each reading and writing named slots.

    ``streams`` are the external inputs the network consumes (``depth`` and/or
    ``edge``); the final node writes the ``out`` slot.
    """

    def __init__(self, arch_id: str, streams: Sequence[str], input_size: int = 96, dtype=np.float32):
        self.arch_id = arch_id
        self.streams = tuple(streams)
        self.input_size = input_size
        self.dtype = np.dtype(dtype)
        self.nodes: List[Node] = []
        self.params: List[ParamTensor] = []
        self.shapes: Dict[str, tuple] = {s: (1, input_size, input_size) for s in self.streams}
        self.options: dict = {}
        self.subnetworks: tuple = ()
        self._cache: Optional[dict] = None

    # construction -------------------------------------------------------

    def add(self, name, spec: LayerSpec, inputs, output=None, params=(), traced=True) -> str:
        inputs = (inputs,) if isinstance(inputs, str) else tuple(inputs)
        output = output or name
        for slot in inputs:
            if slot not in self.shapes:
                raise ShapeError(f"{name}: input slot {slot!r} has no producer")
        if output in self.shapes:
            raise ShapeError(f"{name}: slot {output!r} already written (graph must be acyclic)")
        in_shapes = [self.shapes[s] for s in inputs]
        expected = spec.param_shapes(in_shapes[0])
        if [p.shape for p in params] != [tuple(s) for s in expected]:
            raise ShapeError(f"{name}: parameter shapes {[p.shape for p in params]} != {expected}")
        self.shapes[output] = tuple(spec.output_shape(*in_shapes))
        self.nodes.append(Node(name, spec, inputs, output, list(params), traced))
        for p in params:
            if not any(p is q for q in self.params):
                self.params.append(p)
        return output

    @property
    def output_dim(self) -> int:
        return self.shapes["out"][0]

    def named_params(self) -> Dict[str, ParamTensor]:
        return {p.name: p for p in self.params}

    def n_params(self) -> int:
        """Trainable scalars, counting every tie group once."""
        seen, total = set(), 0
        for p in self.params:
            key = p.tie_group or p.name
            if key not in seen:
                seen.add(key)
                total += p.size
        return total

    def trace(self):
        """``[(node name, per-sample output shape)]`` for traced nodes, in execution order."""
        return [(n.name, self.shapes[n.output]) for n in self.nodes if n.traced]

    def astype(self, dtype) -> "NetworkGraph":
        """Convert parameters in place (e.g. to double precision for verification)."""
        self.dtype = np.dtype(dtype)
        for p in self.params:
            p.value = p.value.astype(dtype)
            p.grad = p.grad.astype(dtype)
            p.momentum_buf = p.momentum_buf.astype(dtype)
        return self

    def load_values(self, values: Dict[str, np.ndarray]) -> None:
        for p in self.params:
            if p.name not in values:
                raise KeyError(f"missing parameter {p.name!r}")
            v = np.asarray(values[p.name])
            if v.shape != p.shape:
                raise ShapeError(f"{p.name}: stored shape {v.shape} != {p.shape}")
            p.value[...] = v

    # execution ----------------------------------------------------------

    def _feeds(self, depth, edge):
        given = {"depth": depth, "edge": edge}
        feeds = {}
        for s in self.streams:
            x = given[s]
            if x is None:
                raise ValueError(f"{self.arch_id} requires the {s} stream")
            x = np.asarray(x, dtype=self.dtype)
            want = self.shapes[s]
            if x.ndim != 4 or x.shape[1:] != want:
                raise ShapeError(f"{s} input: expected [N, {want[0]}, {want[1]}, {want[2]}], got {x.shape}")
            feeds[s] = x
        return feeds

    def forward(self, depth=None, edge=None, keep_cache: bool = True) -> np.ndarray:
        slots = self._feeds(depth, edge)
        caches = []
        for node in self.nodes:
            xs = [slots[s] for s in node.inputs]
            out, cache = layerspec.forward(node.spec, xs, [p.value for p in node.params], keep_cols=keep_cache)
            slots[node.output] = out
            caches.append(cache)
        self._cache = {"slots": slots, "caches": caches} if keep_cache else None
        return slots["out"]

    __call__ = forward

    def backward(self, grad_output, sum_tied: bool = True) -> None:
        """Accumulate parameter gradients for the last forward pass.

        Each tied member first receives only its own stream's contribution;
        with ``sum_tied`` the group total then replaces every member's gradient.
        """
        if self._cache is None:
            raise RuntimeError("backward() called before forward() (or after a cache-free forward)")
        slots, caches = self._cache["slots"], self._cache["caches"]
        grad_output = np.asarray(grad_output, dtype=self.dtype)
        if grad_output.shape != slots["out"].shape:
            raise ShapeError(f"grad_output {grad_output.shape} != network output {slots['out'].shape}")
        grads = {"out": grad_output}
        for node, cache in zip(reversed(self.nodes), reversed(caches)):
            g = grads.pop(node.output, None)
            if g is None:
                continue
            xs = [slots[s] for s in node.inputs]
            need = any(s not in self.streams for s in node.inputs)
            gin, gpar = layerspec.backward(node.spec, g, cache, xs, [p.value for p in node.params], need_input_grad=need)
            for p, gp in zip(node.params, gpar):
                p.grad += gp
            for slot, gi in zip(node.inputs, gin):
                if slot in self.streams or gi is None:
                    continue
                if slot in grads:
                    grads[slot] = grads[slot] + gi
                else:
                    grads[slot] = gi
        self._cache = None
        if sum_tied:
            sum_tied_grads(self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def predict(self, depth=None, edge=None, batch_size: int = 64) -> np.ndarray:
        """Cache-free forward in chunks."""
        n = len(depth) if depth is not None else len(edge)
        outs = []
        for i in range(0, n, batch_size):
            d = None if depth is None else depth[i : i + batch_size]
            e = None if edge is None else edge[i : i + batch_size]
            outs.append(self.forward(d, e, keep_cache=False))
        return np.concatenate(outs, axis=0) if outs else np.zeros((0, self.output_dim), self.dtype)
