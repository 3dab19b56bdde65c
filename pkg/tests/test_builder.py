import numpy as np
import pytest

from histonav.engine import LayerSpec, backward, cross_entropy
from histonav.errors import (
    ArtifactMismatch,
    BadHead,
    BoundaryOutOfRange,
    InvalidDims,
    InvalidExtractor,
)
from histonav.models import (
    Model,
    ModelSpec,
    build_base,
    build_hybrid,
    default_head,
    extractor_presets,
    trainable_params,
)
from histonav.training import AdamState, adam_step


@pytest.mark.parametrize(
    "feature_dim, num_classes, expected",
    [
        (512, 3, [256, 128, 64, 32, 16, 3]),
        (8, 8, [8]),
        (64, 2, [32, 16, 2]),
    ],
)
def test_default_head(feature_dim, num_classes, expected):
    assert default_head(feature_dim, num_classes) == expected


def test_default_head_rejects_narrow_features():
    with pytest.raises(InvalidDims):
        default_head(4, 8)
    with pytest.raises(InvalidDims):
        default_head(16, 1)


def test_base_trains_only_the_replaced_layer(small_extractor):
    spec = build_base(small_extractor, 3, input_shape=(3, 8, 8))
    assert spec.freeze_boundary == len(small_extractor)
    assert trainable_params(spec) == ["head.0.weight", "head.0.bias"]


def test_hybrid_trains_top_layers_and_head(small_extractor):
    spec = build_hybrid(small_extractor, 3, [8, 3], 3, input_shape=(3, 8, 8))
    assert trainable_params(spec) == [
        "extractor.3.weight",
        "extractor.3.bias",
        "head.0.weight",
        "head.0.bias",
        "head.1.weight",
        "head.1.bias",
    ]


def test_boundary_zero_trains_everything(small_extractor):
    spec = build_hybrid(small_extractor, 0, [8, 3], 3, input_shape=(3, 8, 8))
    assert trainable_params(spec) == spec.parameter_ids()


def test_trainable_set_shrinks_with_boundary(small_extractor):
    sets = [
        set(trainable_params(build_hybrid(small_extractor, b, [8, 3], 3, input_shape=(3, 8, 8))))
        for b in range(len(small_extractor) + 1)
    ]
    for lower, higher in zip(sets, sets[1:]):
        assert higher <= lower


def test_default_head_used_when_widths_missing(small_extractor):
    spec = build_hybrid(small_extractor, 3, None, 3, input_shape=(3, 8, 8))
    assert spec.feature_dim == 24
    assert list(spec.head_widths) == default_head(24, 3)


def test_construction_errors(small_extractor):
    with pytest.raises(BoundaryOutOfRange):
        build_hybrid(small_extractor, 7, [3], 3, input_shape=(3, 8, 8))
    with pytest.raises(BadHead):
        build_hybrid(small_extractor, 0, [8, 4], 3, input_shape=(3, 8, 8))
    with pytest.raises(BadHead):
        build_hybrid(small_extractor, 0, [4, 8, 3], 3, input_shape=(3, 8, 8))
    with pytest.raises(InvalidExtractor):
        build_base([], 3, input_shape=(3, 8, 8))
    with pytest.raises(InvalidExtractor):
        build_base([LayerSpec.conv2d(4, 5)], 3, input_shape=(3, 4, 4))
    with pytest.raises(InvalidExtractor):
        build_base("no-such-preset", 3)


def test_presets_build_on_desk_input():
    for name in extractor_presets:
        spec = build_base(name, 3, input_shape=(3, 32, 32))
        assert spec.feature_dim > 3


def test_model_output_is_a_distribution(small_model, rng):
    probabilities = small_model.predict(rng.uniform(size=(5, 3, 8, 8)))
    assert probabilities.shape == (5, 3)
    np.testing.assert_allclose(probabilities.sum(axis=1), 1.0)


def test_seeded_initialization(small_extractor):
    spec = build_hybrid(small_extractor, 3, [8, 3], 3, input_shape=(3, 8, 8))
    first = Model(spec, seed=5).state_dict()
    second = Model(spec, seed=5).state_dict()
    assert all(np.array_equal(first[k], second[k]) for k in first)


def test_frozen_parameters_survive_training(small_model, rng):
    frozen = {k: p.values.copy() for k, p in small_model.parameters.items() if p.frozen}
    trainable = {k: p.values.copy() for k, p in small_model.parameters.items() if not p.frozen}
    assert frozen and trainable
    state = AdamState()
    images = rng.uniform(size=(6, 3, 8, 8))
    one_hot = np.eye(3)[[0, 1, 2, 0, 1, 2]]
    for _ in range(100):
        small_model.zero_grad()
        backward(cross_entropy(small_model.forward(images), one_hot))
        grads = {k: small_model.parameters[k].grad for k in small_model.trainable_params()}
        adam_step(state, small_model.parameters, grads, 0.01)
    for key, values in frozen.items():
        assert np.array_equal(small_model.parameters[key].values, values)
        assert small_model.parameters[key].grad is None
    assert any(not np.array_equal(small_model.parameters[k].values, v) for k, v in trainable.items())


def test_state_round_trip(small_model, small_extractor):
    other = Model(small_model.spec, seed=99)
    other.load_state(small_model.state_dict())
    for key, parameter in small_model.parameters.items():
        assert np.array_equal(other.parameters[key].values, parameter.values)


def test_load_state_mismatch(small_model):
    state = small_model.state_dict()
    state["head.0.weight"] = np.zeros((2, 2))
    with pytest.raises(ArtifactMismatch):
        small_model.load_state(state)
    del state["head.0.weight"]
    with pytest.raises(ArtifactMismatch):
        small_model.load_state(state)
    small_model.load_state(state, strict=False)


def test_spec_dict_form(small_model):
    description = small_model.spec.to_dict()
    assert ModelSpec.from_dict(description) == small_model.spec
