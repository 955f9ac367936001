from .crop import CROP_SIZE, DepthFrame, Intrinsics, crop_and_normalize
from .joints import FINGERTIPS, JOINT_NAMES, CropMeta, JointSet, denormalize_joints, normalize_joints
from .sample import Sample

__all__ = [
    "CROP_SIZE", "DepthFrame", "Intrinsics", "crop_and_normalize",
    "FINGERTIPS", "JOINT_NAMES", "CropMeta", "JointSet", "denormalize_joints", "normalize_joints",
    "Sample",
]
