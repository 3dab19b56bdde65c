"""Minimal reverse-mode differentiable array engine."""

from histonav.engine.tensor import (
    Tensor,
    Parameter,
    Function,
    no_grad,
    is_recording,
    backward,
    conv2d,
    maxpool2d,
    relu,
    flatten,
    dense,
    softmax,
    cross_entropy,
    mean_squared_error,
)
from histonav.engine.layers import LAYER_KINDS, LayerSpec, forward_layer
from histonav.engine.gradcheck import grad_check

__all__ = [
    # from tensor
    "Tensor",
    "Parameter",
    "Function",
    "no_grad",
    "is_recording",
    "backward",
    "conv2d",
    "maxpool2d",
    "relu",
    "flatten",
    "dense",
    "softmax",
    "cross_entropy",
    "mean_squared_error",
    # from layers
    "LAYER_KINDS",
    "LayerSpec",
    "forward_layer",
    # from gradcheck
    "grad_check",
]
