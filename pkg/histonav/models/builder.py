"""Base and hybrid transfer-learning models.

A model is a feature extractor (a list of LayerSpec), a freeze boundary and
a classifier head of dense widths:

* base: every extractor layer frozen, the head is one dense layer.
* hybrid: extractor layers below the boundary frozen, the layers above it
  and a deep head with gradually shrinking widths trainable.

The head always uses relu between dense layers and ends in softmax.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from histonav.engine import LayerSpec, Parameter, Tensor, forward_layer, no_grad
from histonav.errors import (
    ArtifactMismatch,
    BadHead,
    BoundaryOutOfRange,
    InvalidDims,
    InvalidExtractor,
    ShapeMismatch,
    UnsupportedLayer,
)

__all__ = [
    "ModelSpec",
    "Model",
    "build_base",
    "build_hybrid",
    "default_head",
    "trainable_params",
    "extractor_presets",
    "get_extractor",
]

logger = logging.getLogger(__name__)


def _conv_block(channels):
    return [LayerSpec.conv2d(channels, 3, padding=1), LayerSpec.relu(), LayerSpec.maxpool2d(2)]


# desk-scale stand-ins for the compared backbone families
extractor_presets = {
    "tiny": _conv_block(8) + _conv_block(16),
    "small": _conv_block(8) + _conv_block(16) + _conv_block(32),
    "wide": _conv_block(16) + _conv_block(32),
}


def get_extractor(extractor):
    """Resolve a preset name or a list of layer dicts/LayerSpecs to LayerSpecs."""
    if isinstance(extractor, str):
        try:
            return list(extractor_presets[extractor])
        except KeyError as exception:
            raise InvalidExtractor(
                f"unknown extractor preset '{extractor}', "
                f"choose from {sorted(extractor_presets)}"
            ) from exception
    layers = []
    for layer in extractor:
        layers.append(layer if isinstance(layer, LayerSpec) else LayerSpec.from_dict(layer))
    return layers


@dataclass(frozen=True)
class ModelSpec:
    """Immutable model description.

    Parameters
    ----------
    extractor_layers : tuple of LayerSpec
        feature extractor, bottom to top
    freeze_boundary : int
        extractor layers with index < freeze_boundary are frozen
    head_widths : tuple of int
        dense widths of the classifier head, non-increasing, ending in
        num_classes
    num_classes : int
        number of output classes
    input_shape : tuple of int, defaults to (3, 224, 224)
        (C, H, W) of one input image

    Raises
    ------
    InvalidExtractor, BoundaryOutOfRange, BadHead
        if the description is inconsistent
    """

    extractor_layers: tuple
    freeze_boundary: int
    head_widths: tuple
    num_classes: int
    input_shape: tuple = (3, 224, 224)

    def __post_init__(self):
        object.__setattr__(self, "extractor_layers", tuple(self.extractor_layers))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if len(self.extractor_layers) == 0:
            raise InvalidExtractor("the feature extractor has no layers")
        if not 0 <= self.freeze_boundary <= len(self.extractor_layers):
            raise BoundaryOutOfRange(
                f"freeze_boundary {self.freeze_boundary} outside "
                f"[0, {len(self.extractor_layers)}]"
            )
        if self.num_classes < 2:
            raise BadHead(f"num_classes must be at least 2, got {self.num_classes}")
        widths = self.head_widths
        if len(widths) == 0 or widths[-1] != self.num_classes:
            raise BadHead(f"head widths {list(widths)} must end in {self.num_classes}")
        if any(later > earlier for earlier, later in zip(widths, widths[1:])):
            raise BadHead(f"head widths {list(widths)} must not increase")
        # binds and validates the shape chain
        object.__setattr__(self, "_layers", self._bind_layers())

    def _bind_layers(self):
        layers = []
        shape = self.input_shape
        for index, layer in enumerate(self.extractor_layers):
            if layer.kind == "softmax":
                raise InvalidExtractor("softmax belongs to the head, not the extractor")
            try:
                bound = layer.bind(shape)
                shape = layer.output_shape(shape)
            except (ShapeMismatch, UnsupportedLayer) as exception:
                raise InvalidExtractor(f"extractor layer {index}: {exception}") from exception
            layers.append((f"extractor.{index}", bound, index < self.freeze_boundary))
        object.__setattr__(self, "feature_shape", shape)
        if len(shape) != 1:
            layers.append(("head.flatten", LayerSpec.flatten().bind(shape), False))
            shape = (math.prod(shape),)
        for index, width in enumerate(self.head_widths):
            if index > 0:
                layers.append((f"head.relu{index}", LayerSpec.relu().bind(shape), False))
            dense = LayerSpec.dense(width)
            layers.append((f"head.{index}", dense.bind(shape), False))
            shape = (width,)
        layers.append(("head.softmax", LayerSpec.softmax().bind(shape), False))
        return tuple(layers)

    @property
    def layers(self):
        """(name, bound LayerSpec, frozen) for every layer, input to output."""
        return self._layers

    @property
    def feature_dim(self):
        return math.prod(self.feature_shape)

    def parameter_ids(self, trainable_only=False):
        """Parameter ids in deterministic (input to output) order."""
        ids = []
        for name, layer, frozen in self.layers:
            if trainable_only and frozen:
                continue
            for key in layer.parameter_shapes(layer.input_shape):
                ids.append(f"{name}.{key}")
        return ids

    def to_dict(self):
        return {
            "extractor": [layer.to_dict() for layer in self.extractor_layers],
            "freeze_boundary": self.freeze_boundary,
            "head_widths": list(self.head_widths),
            "num_classes": self.num_classes,
            "input_shape": list(self.input_shape),
        }

    @classmethod
    def from_dict(cls, description):
        return cls(
            extractor_layers=get_extractor(description["extractor"]),
            freeze_boundary=description["freeze_boundary"],
            head_widths=description["head_widths"],
            num_classes=description["num_classes"],
            input_shape=description.get("input_shape", (3, 224, 224)),
        )


def build_base(extractor, num_classes, input_shape=(3, 224, 224)):
    """All extractor layers frozen; a single replaced classification layer.

    Parameters
    ----------
    extractor : list of LayerSpec or preset name
        shape-consistent feature extractor
    num_classes : int
        number of output classes
    input_shape : tuple of int, defaults to (3, 224, 224)

    Returns
    -------
    ModelSpec
    """
    extractor = get_extractor(extractor)
    return ModelSpec(
        extractor_layers=extractor,
        freeze_boundary=len(extractor),
        head_widths=(num_classes,),
        num_classes=num_classes,
        input_shape=input_shape,
    )


def build_hybrid(extractor, freeze_boundary, head_widths, num_classes, input_shape=(3, 224, 224)):
    """Bottom extractor layers frozen; top layers and a deep head trainable.

    Parameters
    ----------
    extractor : list of LayerSpec or preset name
        shape-consistent feature extractor
    freeze_boundary : int
        layers with index < freeze_boundary are frozen
    head_widths : list of int or None
        dense widths ending in num_classes. None uses ``default_head``.
    num_classes : int
        number of output classes
    input_shape : tuple of int, defaults to (3, 224, 224)

    Returns
    -------
    ModelSpec
    """
    extractor = get_extractor(extractor)
    if head_widths is None:
        sizing = build_base(extractor, num_classes, input_shape)
        head_widths = default_head(sizing.feature_dim, num_classes)
    return ModelSpec(
        extractor_layers=extractor,
        freeze_boundary=freeze_boundary,
        head_widths=head_widths,
        num_classes=num_classes,
        input_shape=input_shape,
    )


def default_head(feature_dim, num_classes):
    """Head widths by repeated halving of feature_dim, then num_classes.

    Halving continues while the halved value exceeds 4 * num_classes.

    Example
    -------
    >>> default_head(512, 3)
    [256, 128, 64, 32, 16, 3]
    """
    if num_classes < 2 or feature_dim < num_classes:
        raise InvalidDims(
            f"need feature_dim >= num_classes >= 2, got {feature_dim} and {num_classes}"
        )
    widths = []
    width = feature_dim
    while width // 2 > 4 * num_classes:
        width //= 2
        widths.append(width)
    widths.append(num_classes)
    return widths


def trainable_params(model):
    """Ids of trainable parameters (unfrozen extractor layers plus the head).

    Parameters
    ----------
    model : ModelSpec or Model
    """
    spec = model.spec if isinstance(model, Model) else model
    return spec.parameter_ids(trainable_only=True)


class Model:
    """A ModelSpec with parameter values.

    Weights use uniform He fan-in initialization from a seeded generator;
    biases start at zero.

    Parameters
    ----------
    spec : ModelSpec
        the model description
    seed : int, defaults to 0
        initialization seed

    Attributes
    ----------
    spec : ModelSpec
    parameters : dict
        parameter id -> histonav.engine.Parameter, in deterministic order
    """

    def __init__(self, spec, seed=0):
        self.spec = spec
        self.parameters = {}
        self._layer_params = []
        rng = np.random.default_rng(seed)
        for name, layer, frozen in spec.layers:
            params = []
            for key, shape in layer.parameter_shapes(layer.input_shape).items():
                if key == "weight":
                    limit = math.sqrt(6.0 / math.prod(shape[1:]))
                    values = rng.uniform(-limit, limit, size=shape)
                else:
                    values = np.zeros(shape)
                parameter = Parameter(f"{name}.{key}", Tensor(values), frozen=frozen)
                self.parameters[parameter.id] = parameter
                params.append(parameter)
            self._layer_params.append((layer, params))

    def __repr__(self):
        trainable = len(self.trainable_params())
        return f"Model({len(self.parameters)} parameters, {trainable} trainable)"

    def trainable_params(self):
        return trainable_params(self)

    def forward(self, inputs, return_logits=False):
        """Forward pass of a (B, C, H, W) batch to (B, num_classes) output."""
        if not isinstance(inputs, Tensor):
            inputs = Tensor(inputs)
        layers = self._layer_params[:-1] if return_logits else self._layer_params
        output = inputs
        for layer, params in layers:
            output = forward_layer(layer, output, params)
        return output

    def predict(self, images, batch_size=64):
        """Class probabilities for a (N, C, H, W) array, without recording."""
        images = np.asarray(images, dtype=np.float64)
        outputs = []
        with no_grad():
            for start in range(0, len(images), batch_size):
                outputs.append(self.forward(images[start : start + batch_size]).values)
        if not outputs:
            return np.zeros((0, self.spec.num_classes))
        return np.concatenate(outputs)

    def zero_grad(self):
        for parameter in self.parameters.values():
            parameter.tensor.zero_grad()

    def state_dict(self):
        """Copy of all parameter values keyed by id."""
        return {k: p.values.copy() for k, p in self.parameters.items()}

    def load_state(self, state, prefix="", strict=True):
        """Copy values into parameters whose id starts with prefix.

        Raises
        ------
        ArtifactMismatch
            if strict and an id is missing, or if a shape differs
        """
        for key, parameter in self.parameters.items():
            if not key.startswith(prefix):
                continue
            if key not in state:
                if strict:
                    raise ArtifactMismatch(f"state has no values for parameter {key}")
                continue
            values = np.asarray(state[key], dtype=np.float64)
            if values.shape != parameter.shape:
                raise ArtifactMismatch(
                    f"{key}: stored shape {values.shape} != model shape {parameter.shape}"
                )
            parameter.values[...] = values
