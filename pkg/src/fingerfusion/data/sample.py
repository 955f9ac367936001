from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .joints import CropMeta, JointSet, normalize_joints


@dataclass
class Sample:
    depth: np.ndarray  # [1, 1, 96, 96] float32 in [-1, 1]
    edge: Optional[np.ndarray]  # same shape in [0, 1], or None
    joints: np.ndarray  # (6, 3) float32 millimetres
    meta: CropMeta

    def target(self, include_palm: bool = True) -> np.ndarray:
        v = normalize_joints(JointSet(self.joints), self.meta)
        return v if include_palm else v[:15]
