"""Synthetic labelled depth hands: a palm disk plus five capsule fingers.

Frames are rendered under an orthographic-plus-depth camera (rays parallel
to +z). Fingertip ground truth is the front surface point of each finger
capsule directly over its far endpoint; the palm joint is the disk center.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .. import edges
from .crop import DepthFrame, Intrinsics, crop_and_normalize
from .joints import DEFAULT_CUBE_MM, CropMeta, JointSet
from .sample import Sample


@dataclass(frozen=True)
class SynthConfig:
    frame_size: int = 160
    pixel_mm: float = 3.0
    depth_range: tuple = (450.0, 750.0)
    center_jitter_mm: float = 40.0
    rotation_deg: float = 30.0
    spread_deg: float = 10.0
    pitch_deg: float = 20.0
    palm_tilt: float = 0.2
    length_jitter: float = 0.1
    palm_radius: float = 40.0
    # thumb, index, middle, ring, pinky (mirror-symmetric template)
    base_angles_deg: tuple = (-75.0, -25.0, 0.0, 25.0, 75.0)
    finger_lengths: tuple = (60.0, 75.0, 80.0, 75.0, 60.0)
    finger_radii: tuple = (9.0, 8.0, 8.0, 8.0, 9.0)
    cube_size: float = DEFAULT_CUBE_MM
    with_edges: bool = True
    edge_method: str = "gradient"

    def __post_init__(self):
        if any(not length > 0 for length in self.finger_lengths):
            raise ValueError("degenerate config: finger lengths must be positive")
        if any(not r > 0 for r in self.finger_radii) or not self.palm_radius > 0:
            raise ValueError("degenerate config: radii must be positive")
        if len(self.base_angles_deg) != 5 or len(self.finger_lengths) != 5 or len(self.finger_radii) != 5:
            raise ValueError("config needs exactly five fingers")
        if self.frame_size < 8 or not self.pixel_mm > 0:
            raise ValueError("degenerate frame geometry")

    @classmethod
    def zero_spread(cls, **kw) -> "SynthConfig":
        """All pose randomization off: an upright mirror-symmetric hand."""
        base = dict(center_jitter_mm=0.0, rotation_deg=0.0, spread_deg=0.0, pitch_deg=0.0, palm_tilt=0.0, length_jitter=0.0)
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class HandPose:
    palm_center: np.ndarray  # (3,)
    palm_tilt: tuple  # dz/dx, dz/dy
    bases: np.ndarray  # (5, 3) capsule start points
    tips: np.ndarray  # (5, 3) capsule far endpoints
    radii: np.ndarray  # (5,)
    palm_radius: float


def sample_pose(rng: np.random.Generator, cfg: SynthConfig) -> HandPose:
    u = lambda a: rng.uniform(-a, a) if a > 0 else 0.0
    z0 = rng.uniform(*cfg.depth_range) if cfg.depth_range[1] > cfg.depth_range[0] else cfg.depth_range[0]
    center = np.array([u(cfg.center_jitter_mm), u(cfg.center_jitter_mm), z0])
    rot = math.radians(u(cfg.rotation_deg))
    tilt = (u(cfg.palm_tilt), u(cfg.palm_tilt))
    bases, tips = [], []
    for k in range(5):
        base_angle = math.radians(cfg.base_angles_deg[k]) + rot
        angle = base_angle + math.radians(u(cfg.spread_deg))
        pitch = math.radians(u(cfg.pitch_deg))
        length = cfg.finger_lengths[k] * (1.0 + u(cfg.length_jitter))
        # image "up" is -y
        rim = np.array([math.sin(base_angle), -math.cos(base_angle)]) * cfg.palm_radius * 0.85
        bx, by = center[0] + rim[0], center[1] + rim[1]
        bz = center[2] + tilt[0] * rim[0] + tilt[1] * rim[1]
        d = np.array([math.sin(angle) * math.cos(pitch), -math.cos(angle) * math.cos(pitch), math.sin(pitch)])
        base = np.array([bx, by, bz])
        bases.append(base)
        tips.append(base + length * d)
    return HandPose(center, tilt, np.array(bases), np.array(tips), np.array(cfg.finger_radii, dtype=np.float64), cfg.palm_radius)


def capsule_front_z(x, y, a, b, r):
    """Nearest z at which the ray through (x, y) along +z meets the capsule; +inf on a miss."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    best = np.full(np.broadcast(x, y).shape, np.inf)
    for c in (a, b):
        d2 = (x - c[0]) ** 2 + (y - c[1]) ** 2
        hit = d2 <= r * r
        best = np.where(hit, np.minimum(best, c[2] - np.sqrt(np.maximum(r * r - d2, 0.0))), best)
    d = b - a
    ll = float(d @ d)
    wx, wy = x - a[0], y - a[1]
    wd = wx * d[0] + wy * d[1]
    qa = ll - d[2] ** 2
    if qa > 1e-12:
        qb = -2.0 * d[2] * wd
        qc = (wx * wx + wy * wy) * ll - wd * wd - r * r * ll
        disc = qb * qb - 4 * qa * qc
        ok = disc >= 0
        s = (-qb - np.sqrt(np.where(ok, disc, 0.0))) / (2 * qa)
        t = (wd + s * d[2]) / ll
        ok &= (t >= 0) & (t <= 1)
        best = np.where(ok, np.minimum(best, a[2] + s), best)
    return best


def render(pose: HandPose, cfg: SynthConfig):
    """Depth frame (0 = no surface) and ground-truth joints for ``pose``."""
    n = cfg.frame_size
    intr = Intrinsics(1.0 / cfg.pixel_mm, 1.0 / cfg.pixel_mm, (n - 1) / 2.0, (n - 1) / 2.0, orthographic=True)
    vv, uu = np.mgrid[0:n, 0:n].astype(np.float64)
    x, y, _ = intr.backproject(uu, vv, 0.0)
    pc = pose.palm_center
    z = np.full((n, n), np.inf)
    in_palm = (x - pc[0]) ** 2 + (y - pc[1]) ** 2 <= pose.palm_radius**2
    palm_z = pc[2] + pose.palm_tilt[0] * (x - pc[0]) + pose.palm_tilt[1] * (y - pc[1])
    z = np.where(in_palm, palm_z, z)
    tips = []
    for k in range(5):
        a, b, r = pose.bases[k], pose.tips[k], pose.radii[k]
        z = np.minimum(z, capsule_front_z(x, y, a, b, r))
        tips.append([b[0], b[1], float(capsule_front_z(b[0], b[1], a, b, r))])
    depth = np.where(np.isfinite(z), z, 0.0).astype(np.float32)
    joints = JointSet(np.vstack([np.array(tips), pc[None, :]]))
    return DepthFrame(depth, intr), joints


def hand_center(frame: DepthFrame) -> np.ndarray:
    """Centroid of all foreground 3D points."""
    vv, uu = np.nonzero(frame.depth > 0)
    z = frame.depth[vv, uu].astype(np.float64)
    x, y, z = frame.intrinsics.backproject(uu.astype(np.float64), vv.astype(np.float64), z)
    return np.array([x.mean(), y.mean(), z.mean()])


def make_sample(rng: np.random.Generator, cfg: SynthConfig, frame_id: int = 0) -> Sample:
    frame, joints = render(sample_pose(rng, cfg), cfg)
    frame.frame_id = frame_id
    center = tuple(float(c) for c in hand_center(frame).astype(np.float32))
    meta = CropMeta(center, float(np.float32(cfg.cube_size)), frame_id)
    depth = crop_and_normalize(frame, meta)
    edge = edges.extract_edges(depth, cfg.edge_method) if cfg.with_edges else None
    return Sample(depth, edge, joints.positions.astype(np.float32), meta)


def generate_samples(seed: int, n: int, cfg: SynthConfig = SynthConfig()) -> Iterator[Sample]:
    """Deterministic in ``(seed, n, cfg)``; sample ``i`` draws from its own stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    for i in range(n):
        yield make_sample(np.random.default_rng([seed, i]), cfg, frame_id=i)


def synth_generate(path, seed: int, n: int, cfg: SynthConfig = SynthConfig()) -> int:
    from .ftds import write_dataset

    return write_dataset(path, generate_samples(seed, n, cfg))
