import numpy as np
import pytest

from histonav.engine import LayerSpec, grad_check, mean_squared_error
from histonav.models import Model, build_base, build_hybrid


@pytest.fixture
def conv_dense_model():
    extractor = [
        LayerSpec.conv2d(3, 3),
        LayerSpec.relu(),
        LayerSpec.conv2d(2, 2, stride=1),
        LayerSpec.relu(),
    ]
    spec = build_hybrid(extractor, 0, [5, 3], 3, input_shape=(2, 6, 6))
    return Model(spec, seed=7)


def test_two_conv_two_dense_gradients(conv_dense_model, rng):
    inputs = rng.uniform(-1, 1, size=(4, 2, 6, 6))
    error = grad_check(conv_dense_model, inputs, epsilon=1e-6, labels=[0, 1, 2, 1])
    assert error < 1e-5


def test_pooling_gradients(small_model, rng):
    inputs = rng.uniform(0, 1, size=(2, 3, 8, 8))
    assert grad_check(small_model, inputs, labels=[2, 0]) < 1e-5


def test_logit_loss(conv_dense_model, rng):
    inputs = rng.uniform(-1, 1, size=(2, 2, 6, 6))
    target = rng.normal(size=(2, 3))

    def loss(output):
        return mean_squared_error(output, target)

    assert grad_check(conv_dense_model, inputs, loss=loss, return_logits=True) < 1e-5


def test_frozen_model_checks_only_head(small_extractor, rng):
    model = Model(build_base(small_extractor, 3, input_shape=(3, 8, 8)), seed=3)
    inputs = rng.uniform(0, 1, size=(3, 3, 8, 8))
    assert grad_check(model, inputs, labels=[0, 1, 2]) < 1e-5
    assert all(model.parameters[k].grad is None for k in model.parameters if k.startswith("extractor."))
