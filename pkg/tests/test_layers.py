import numpy as np
import pytest

from histonav.engine import LayerSpec, Tensor, forward_layer
from histonav.errors import ShapeMismatch, UnsupportedLayer


@pytest.mark.parametrize(
    "layer, input_shape, expected",
    [
        (LayerSpec.conv2d(8, 3), (3, 32, 32), (8, 30, 30)),
        (LayerSpec.conv2d(8, 3, padding=1), (3, 32, 32), (8, 32, 32)),
        (LayerSpec.conv2d(4, 3, stride=2, padding=1), (3, 9, 9), (4, 5, 5)),
        (LayerSpec.maxpool2d(2), (8, 32, 32), (8, 16, 16)),
        (LayerSpec.maxpool2d(3, stride=1), (2, 5, 5), (2, 3, 3)),
        (LayerSpec.relu(), (8, 4, 4), (8, 4, 4)),
        (LayerSpec.flatten(), (8, 4, 4), (128,)),
        (LayerSpec.dense(10), (128,), (10,)),
        (LayerSpec.softmax(), (10,), (10,)),
    ],
)
def test_output_shape(layer, input_shape, expected):
    assert layer.output_shape(input_shape) == expected


def test_parameter_shapes():
    assert LayerSpec.conv2d(8, 3).parameter_shapes((3, 10, 10)) == {
        "weight": (8, 3, 3, 3),
        "bias": (8,),
    }
    assert LayerSpec.dense(4).parameter_shapes((16,)) == {"weight": (4, 16), "bias": (4,)}
    assert LayerSpec.relu().parameter_shapes((16,)) == {}


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        LayerSpec.conv2d(4, 5).output_shape((3, 4, 4))
    with pytest.raises(ShapeMismatch):
        LayerSpec.dense(4).output_shape((3, 4, 4))
    with pytest.raises(UnsupportedLayer):
        LayerSpec("dropout").output_shape((4,))
    with pytest.raises(UnsupportedLayer):
        LayerSpec("dense").output_shape((4,))


def test_dict_form():
    layer = LayerSpec.conv2d(16, 3, padding=1)
    assert layer.to_dict() == {"kind": "conv2d", "channels": 16, "kernel_size": 3, "stride": 1, "padding": 1}
    assert LayerSpec.from_dict(layer.to_dict()) == layer
    assert LayerSpec.from_dict({"kind": "relu"}) == LayerSpec.relu()
    with pytest.raises(UnsupportedLayer):
        LayerSpec.from_dict({"kind": "dense", "units": 3})


def test_forward_layer_checks_bound_shape():
    layer = LayerSpec.relu().bind((4,))
    out = forward_layer(layer, Tensor(np.array([[-1.0, 0.0, 1.0, 2.0]])))
    np.testing.assert_array_equal(out.values, [[0.0, 0.0, 1.0, 2.0]])
    with pytest.raises(ShapeMismatch):
        forward_layer(layer, Tensor(np.zeros((1, 3))))
