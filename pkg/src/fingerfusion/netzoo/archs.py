"""Builders for every single-stream and fusion architecture.

Layer sequences are written in the ``C(d,f)-P-FC(n)`` shorthand; every conv
is followed by a ReLU, as are FC1 and FC2. All convolutions use same
padding (``f // 2``) so C12 stays geometrically valid on 96x96 inputs.
"""
from __future__ import annotations

import re
from typing import List, Optional

import numpy as np

from ..core.layerspec import LayerSpec
from ..core.tensor import ParamTensor
from .graph import NetworkGraph

DEEP = (
    "C1(24,5)-P1-C2(24,3)-C3(24,3)-C4(24,3)-C5(24,3)-P2-C6(32,3)-C7(32,3)-C8(48,3)-C9(48,3)-C10(48,3)"
    "-P3-C11(96,3)-C12(128,3)-P4-FC1(1024)-FC2(1024)-FC3(18)"
)
MEDIAN = (
    "C1(24,5)-P1-C2(24,3)-C3(24,3)-C4(24,3)-P2-C6(32,3)-C7(32,3)-C8(48,3)-C9(48,3)"
    "-P3-C11(96,3)-P4-FC1(1024)-FC2(1024)-FC3(18)"
)
SHALLOW = "C1(24,5)-P1-C2(24,3)-C3(24,3)-C4(24,3)-P2-C6(32,3)-C7(32,3)-C8(48,3,2)-C9(48,3)-P3-FC1(1024)-FC2(1024)-FC3(18)"

ARCH_IDS = (
    "single-shallow",
    "single-median",
    "single-deep",
    "single-deep-fingeronly",
    "fusion-enhance",
    "fusion-early",
    "fusion-late",
    "fusion-slow",
    "fusion-result",
)

ENHANCE_DEPTH_WEIGHT = 0.8
ENHANCE_EDGE_WEIGHT = 0.2

_TOKEN = re.compile(r"^(C|P|FC)(\d+)(?:\(([\d,]+)\))?$")


def parse_layers(shorthand: str) -> List[tuple]:
    """``"C1(24,5)-P1-FC1(1024)"`` -> ``[("C1", conv spec), ("P1", pool spec), ...]``."""
    out = []
    for tok in shorthand.split("-"):
        m = _TOKEN.match(tok.strip())
        if not m:
            raise ValueError(f"bad layer token {tok!r}")
        kind, idx, args = m.group(1), m.group(2), m.group(3)
        nums = [int(a) for a in args.split(",")] if args else []
        if kind == "C":
            d, f = nums[0], nums[1]
            stride = nums[2] if len(nums) > 2 else 1
            out.append((f"C{idx}", LayerSpec.conv(d, f, stride)))
        elif kind == "P":
            out.append((f"P{idx}", LayerSpec("maxpool")))
        else:
            out.append((f"FC{idx}", LayerSpec.fc(nums[0])))
    return out


class ParamFactory:
    """Deterministic parameter creation; weights ~ N(0, 1/fan_in), biases zero."""

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype

    def weights(self, name, shape, tie_group=None):
        fan_in = int(np.prod(shape[1:]))
        w = self.rng.standard_normal(shape) * np.sqrt(1.0 / fan_in)
        return ParamTensor(name, w.astype(self.dtype), tie_group)

    def bias(self, name, n, tie_group=None):
        return ParamTensor(name, np.zeros(n, dtype=self.dtype), tie_group)


def _twin(p: ParamTensor, name: str) -> ParamTensor:
    return ParamTensor(name, p.value.copy(), p.tie_group)


def _chain(net: NetworkGraph, layers, slot: str, factory: ParamFactory, prefix: str = "", tie_from: Optional[str] = None) -> str:
    """Append ``layers`` reading ``slot``; returns the last written slot.

    With ``tie_from`` set, parameters are twins of the already-built layers under
    that prefix (same values, shared tie group) instead of fresh draws.
    """
    for name, spec in layers:
        full = prefix + name
        params = []
        if spec.kind in ("conv", "fc"):
            if spec.kind == "fc" and len(net.shapes[slot]) > 1:
                slot = net.add(full + ".flatten", LayerSpec("flatten"), slot, traced=False)
            shapes = spec.param_shapes(net.shapes[slot])
            if tie_from is not None:
                src = net.named_params()
                params = [_twin(src[f"{tie_from}{name}.w"], f"{full}.w"), _twin(src[f"{tie_from}{name}.b"], f"{full}.b")]
            else:
                group = f"{name}.w" if prefix and net.options.get("tied") else None
                bgroup = f"{name}.b" if group else None
                params = [factory.weights(f"{full}.w", shapes[0], group), factory.bias(f"{full}.b", shapes[1][0], bgroup)]
        slot = net.add(full, spec, slot, params=params)
        if spec.kind in ("conv", "fc"):
            slot = net.add(full + ".relu", LayerSpec("relu"), slot, traced=False)
    return slot


def _with_outputs(shorthand: str, out_dim: int) -> list:
    layers = parse_layers(shorthand)
    name, spec = layers[-1]
    layers[-1] = (name, LayerSpec.fc(out_dim))
    return layers


def _split(layers, last: str):
    names = [n for n, _ in layers]
    i = names.index(last) + 1
    return layers[:i], layers[i:]


def _single(arch_id, layers, stream, factory, input_size, dtype, in_channels=1, prefix="", out_slot="out") -> NetworkGraph:
    net = NetworkGraph(arch_id, (stream,), input_size, dtype)
    net.shapes[stream] = (in_channels, input_size, input_size)
    _build_head(net, layers, stream, factory, prefix, out_slot)
    return net


def _build_head(net, layers, slot, factory, prefix="", out_slot="out"):
    """Chain ``layers`` and write the final (ReLU-free) regression layer to ``out_slot``."""
    body, last = layers[:-1], layers[-1]
    slot = _chain(net, body, slot, factory, prefix)
    name, spec = last
    if len(net.shapes[slot]) > 1:
        slot = net.add(prefix + name + ".flatten", LayerSpec("flatten"), slot, traced=False)
    shapes = spec.param_shapes(net.shapes[slot])
    params = [factory.weights(f"{prefix}{name}.w", shapes[0]), factory.bias(f"{prefix}{name}.b", shapes[1][0])]
    return net.add(prefix + name, spec, slot, output=out_slot, params=params)


def build(arch_id: str, include_palm: bool = True, seed: int = 0, input_size: int = 96, dtype=np.float32, tied: bool = True) -> NetworkGraph:
    """Construct ``arch_id`` with freshly initialized parameters.

    ``tied=False`` gives the two-stream trunks of slow and late fusion
    independent weights (for comparison only).
    """
    if arch_id not in ARCH_IDS:
        raise ValueError(f"unknown arch_id {arch_id!r}; expected one of {', '.join(ARCH_IDS)}")
    if arch_id == "single-deep-fingeronly":
        include_palm = False
    out_dim = 18 if include_palm else 15
    factory = ParamFactory(seed, dtype)
    deep = _with_outputs(DEEP, out_dim)

    if arch_id == "single-shallow":
        net = _single(arch_id, _with_outputs(SHALLOW, out_dim), "depth", factory, input_size, dtype)
    elif arch_id == "single-median":
        net = _single(arch_id, _with_outputs(MEDIAN, out_dim), "depth", factory, input_size, dtype)
    elif arch_id in ("single-deep", "single-deep-fingeronly"):
        net = _single(arch_id, deep, "depth", factory, input_size, dtype)
    elif arch_id == "fusion-enhance":
        net = NetworkGraph(arch_id, ("depth", "edge"), input_size, dtype)
        slot = net.add("enhance", LayerSpec("blend", alpha=ENHANCE_DEPTH_WEIGHT, beta=ENHANCE_EDGE_WEIGHT), ("depth", "edge"), output="enhanced")
        _build_head(net, deep, slot, factory)
    elif arch_id == "fusion-early":
        net = NetworkGraph(arch_id, ("depth", "edge"), input_size, dtype)
        slot = net.add("stack", LayerSpec("concat_channels"), ("depth", "edge"), output="stacked")
        _build_head(net, deep, slot, factory)
    elif arch_id in ("fusion-slow", "fusion-late"):
        net = NetworkGraph(arch_id, ("depth", "edge"), input_size, dtype)
        net.options["tied"] = tied
        trunk, rest = _split(deep, "P2" if arch_id == "fusion-slow" else "P4")
        a = _chain(net, trunk, "depth", factory, "depth/")
        if tied:
            b = _chain(net, trunk, "edge", factory, "edge/", tie_from="depth/")
        else:
            b = _chain(net, trunk, "edge", factory, "edge/")
        if arch_id == "fusion-late":
            a = net.add("depth/flatten", LayerSpec("flatten"), a, traced=False)
            b = net.add("edge/flatten", LayerSpec("flatten"), b, traced=False)
        slot = net.add("merge", LayerSpec("concat_channels"), (a, b))
        _build_head(net, rest, slot, factory)
    else:  # fusion-result
        net = NetworkGraph(arch_id, ("depth", "edge"), input_size, dtype)
        subs = []
        for stream in ("depth", "edge"):
            sub = _single("single-deep", deep, stream, factory, input_size, dtype, prefix=f"{stream}/")
            subs.append(sub)
            for node in sub.nodes:
                slot_out = f"{stream}/out" if node.output == "out" else node.output
                inputs = tuple(node.inputs)
                net.add(node.name, node.spec, inputs, output=slot_out, params=node.params, traced=node.traced)
        net.subnetworks = tuple(subs)
        net.add("average", LayerSpec("blend", alpha=0.5, beta=0.5), ("depth/out", "edge/out"), output="out")
    net.options.update(include_palm=include_palm, seed=seed, tied=tied)
    return net
