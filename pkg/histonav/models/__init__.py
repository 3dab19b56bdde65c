"""Base and hybrid model construction."""

from histonav.engine.layers import LayerSpec
from histonav.models.builder import (
    ModelSpec,
    Model,
    build_base,
    build_hybrid,
    default_head,
    trainable_params,
    extractor_presets,
    get_extractor,
)

__all__ = [
    "LayerSpec",
    "ModelSpec",
    "Model",
    "build_base",
    "build_hybrid",
    "default_head",
    "trainable_params",
    "extractor_presets",
    "get_extractor",
]
