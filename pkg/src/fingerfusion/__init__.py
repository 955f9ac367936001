"""Two-stream depth and edge CNNs for 3D fingertip and palm regression."""

__version__ = "0.1.0"
