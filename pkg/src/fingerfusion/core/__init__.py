from .layerspec import LayerSpec
from .optim import sgd_step, sum_tied_grads
from .tensor import DOUBLE, SINGLE, ParamTensor, ShapeError

__all__ = ["LayerSpec", "ParamTensor", "ShapeError", "SINGLE", "DOUBLE", "sgd_step", "sum_tied_grads"]
