from .archs import ARCH_IDS, build
from .graph import NetworkGraph

__all__ = ["ARCH_IDS", "build", "NetworkGraph"]
