"""Layer descriptions and their forward application.

Shapes exclude the batch axis: images are (C, H, W), features are (F,).
"""

import math
from dataclasses import asdict, dataclass, replace

from histonav.engine import tensor as T
from histonav.errors import ShapeMismatch, UnsupportedLayer

__all__ = ["LAYER_KINDS", "LayerSpec", "forward_layer"]

LAYER_KINDS = ("conv2d", "maxpool2d", "relu", "flatten", "dense", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a model description.

    Parameters
    ----------
    kind : str
        one of "conv2d", "maxpool2d", "relu", "flatten", "dense", "softmax"
    channels : int, optional
        conv2d output channels
    kernel_size : int, optional
        conv2d / maxpool2d square window side
    stride : int, optional
        conv2d defaults to 1, maxpool2d defaults to kernel_size
    padding : int, defaults to 0
        conv2d zero padding on every side
    width : int, optional
        dense output width
    input_shape : tuple of int, optional
        bound by the model builder; forward_layer checks inputs against it
    """

    kind: str
    channels: int = None
    kernel_size: int = None
    stride: int = None
    padding: int = 0
    width: int = None
    input_shape: tuple = None

    @classmethod
    def conv2d(cls, channels, kernel_size=3, stride=1, padding=0):
        return cls("conv2d", channels=channels, kernel_size=kernel_size, stride=stride, padding=padding)

    @classmethod
    def maxpool2d(cls, kernel_size=2, stride=None):
        return cls("maxpool2d", kernel_size=kernel_size, stride=stride)

    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def flatten(cls):
        return cls("flatten")

    @classmethod
    def dense(cls, width):
        return cls("dense", width=width)

    @classmethod
    def softmax(cls):
        return cls("softmax")

    @classmethod
    def from_dict(cls, description):
        """Build a LayerSpec from a config entry such as {"kind": "relu"}."""
        description = dict(description)
        if description.get("input_shape") is not None:
            description["input_shape"] = tuple(description["input_shape"])
        try:
            return cls(**description)
        except TypeError as exception:
            raise UnsupportedLayer(f"invalid layer description {description}") from exception

    def to_dict(self):
        """Config form: only the fields that are set, without the bound shape."""
        description = asdict(self)
        description.pop("input_shape")
        return {k: v for k, v in description.items() if v is not None and v != 0 or k == "kind"}

    @property
    def has_parameters(self):
        return self.kind in ("conv2d", "dense")

    def bind(self, input_shape):
        """Copy of this layer with its input shape recorded."""
        return replace(self, input_shape=tuple(input_shape))

    def output_shape(self, input_shape):
        """Output shape (without batch axis) for the given input shape.

        Raises
        ------
        UnsupportedLayer
            for unknown kinds or missing kind-specific parameters
        ShapeMismatch
            if input_shape is incompatible with this layer
        """
        input_shape = tuple(input_shape)
        if self.kind not in LAYER_KINDS:
            raise UnsupportedLayer(f"unknown layer kind '{self.kind}'")
        if self.kind in ("conv2d", "maxpool2d"):
            if len(input_shape) != 3:
                raise ShapeMismatch(f"{self.kind} needs (C, H, W) input, got {input_shape}")
            if not self.kernel_size or self.kernel_size < 1:
                raise UnsupportedLayer(f"{self.kind} needs a positive kernel_size")
            channels, height, width = input_shape
            if self.kind == "conv2d":
                if not self.channels or self.channels < 1:
                    raise UnsupportedLayer("conv2d needs a positive channels value")
                stride = self.stride or 1
                height += 2 * self.padding
                width += 2 * self.padding
                channels = self.channels
            else:
                stride = self.stride or self.kernel_size
            if height < self.kernel_size or width < self.kernel_size:
                raise ShapeMismatch(
                    f"{self.kind} window {self.kernel_size} exceeds input {input_shape}"
                )
            return (
                channels,
                (height - self.kernel_size) // stride + 1,
                (width - self.kernel_size) // stride + 1,
            )
        if self.kind == "relu":
            return input_shape
        if self.kind == "flatten":
            return (math.prod(input_shape),)
        if len(input_shape) != 1:
            raise ShapeMismatch(f"{self.kind} needs flat (F,) input, got {input_shape}")
        if self.kind == "dense":
            if not self.width or self.width < 1:
                raise UnsupportedLayer("dense needs a positive width")
            return (self.width,)
        return input_shape

    def parameter_shapes(self, input_shape):
        """{"weight": shape, "bias": shape} for layers with parameters, else {}."""
        if self.kind == "conv2d":
            k = self.kernel_size
            return {"weight": (self.channels, input_shape[0], k, k), "bias": (self.channels,)}
        if self.kind == "dense":
            return {"weight": (self.width, input_shape[0]), "bias": (self.width,)}
        return {}


def forward_layer(layer, inputs, params=()):
    """Apply one layer to a batch.

    Parameters
    ----------
    layer : LayerSpec
        the layer; if it carries an input_shape, inputs must match it
    inputs : Tensor
        batch with a leading batch axis
    params : sequence of Parameter or Tensor
        (weight, bias) for conv2d and dense layers

    Returns
    -------
    Tensor
        the layer output, recorded for backward if any input is tracked
    """
    if layer.kind not in LAYER_KINDS:
        raise UnsupportedLayer(f"unknown layer kind '{layer.kind}'")
    if layer.input_shape is not None and tuple(inputs.shape[1:]) != layer.input_shape:
        raise ShapeMismatch(
            f"{layer.kind} expects input {layer.input_shape}, got {tuple(inputs.shape[1:])}"
        )
    if layer.kind == "conv2d":
        weight, bias = params
        return T.conv2d(inputs, weight, bias, stride=layer.stride or 1, padding=layer.padding)
    if layer.kind == "maxpool2d":
        return T.maxpool2d(inputs, kernel=layer.kernel_size, stride=layer.stride)
    if layer.kind == "relu":
        return T.relu(inputs)
    if layer.kind == "flatten":
        return T.flatten(inputs)
    if layer.kind == "dense":
        weight, bias = params
        return T.dense(inputs, weight, bias)
    return T.softmax(inputs)
