import threading

import numpy as np
import pytest

from histonav.engine import (
    Tensor,
    backward,
    conv2d,
    cross_entropy,
    dense,
    flatten,
    maxpool2d,
    mean_squared_error,
    no_grad,
    is_recording,
    relu,
    softmax,
)
from histonav.errors import NoGraph, NotNormalized, NotOneHot, ShapeMismatch


def naive_conv(x, weight, bias, stride=1, padding=0):
    x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    b, _, h, w = x.shape
    f, _, kh, kw = weight.shape
    oh, ow = (h - kh) // stride + 1, (w - kw) // stride + 1
    out = np.zeros((b, f, oh, ow))
    for n in range(b):
        for k in range(f):
            for i in range(oh):
                for j in range(ow):
                    window = x[n, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    out[n, k, i, j] = np.sum(window * weight[k]) + bias[k]
    return out


@pytest.mark.parametrize("stride, padding", [(1, 0), (1, 1), (2, 1)])
def test_conv2d_matches_direct_sum(rng, stride, padding):
    x = rng.normal(size=(2, 3, 6, 6))
    weight = rng.normal(size=(4, 3, 3, 3))
    bias = rng.normal(size=4)
    out = conv2d(Tensor(x), Tensor(weight), Tensor(bias), stride=stride, padding=padding)
    np.testing.assert_allclose(out.values, naive_conv(x, weight, bias, stride, padding), atol=1e-12)


def test_conv2d_rejects_channel_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        conv2d(Tensor(rng.normal(size=(1, 2, 5, 5))), Tensor(np.zeros((4, 3, 3, 3))), Tensor(np.zeros(4)))


def test_maxpool_routes_gradient_to_maximum():
    x = Tensor(np.array([[[[1.0, 5.0], [2.0, 3.0]]]]), tracked=True)
    loss = mean_squared_error(flatten(maxpool2d(x, 2)), np.zeros((1, 1)))
    backward(loss)
    np.testing.assert_array_equal(x.grad, [[[[0.0, 10.0], [0.0, 0.0]]]])


def test_relu_and_dense_forward():
    x = Tensor(np.array([[-1.0, 2.0]]))
    weight = Tensor(np.array([[1.0, 1.0], [2.0, -1.0]]))
    bias = Tensor(np.array([0.5, 0.0]))
    np.testing.assert_array_equal(relu(x).values, [[0.0, 2.0]])
    np.testing.assert_array_equal(dense(x, weight, bias).values, [[1.5, -4.0]])


def test_softmax_rows_sum_to_one_and_ignore_shifts(rng):
    logits = rng.normal(scale=20, size=(5, 4))
    probabilities = softmax(Tensor(logits)).values
    np.testing.assert_allclose(probabilities.sum(axis=1), 1.0, atol=1e-9)
    shifted = softmax(Tensor(logits + 1000.0)).values
    np.testing.assert_allclose(shifted, probabilities, atol=1e-9)


def test_cross_entropy_zero_only_for_certain_prediction():
    labels = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert float(cross_entropy(Tensor(labels), labels).values) == 0.0
    uncertain = Tensor(np.array([[0.5, 0.5], [0.5, 0.5]]))
    value = float(cross_entropy(uncertain, labels).values)
    assert value == pytest.approx(np.log(2))


def test_cross_entropy_validates_inputs():
    with pytest.raises(NotNormalized):
        cross_entropy(Tensor(np.array([[0.5, 0.6]])), np.array([[1.0, 0.0]]))
    with pytest.raises(NotOneHot):
        cross_entropy(Tensor(np.array([[0.5, 0.5]])), np.array([[1.0, 1.0]]))
    with pytest.raises(ShapeMismatch):
        cross_entropy(Tensor(np.array([[0.5, 0.5]])), np.array([[1.0, 0.0, 0.0]]))


def test_backward_needs_a_recorded_scalar():
    with pytest.raises(NoGraph):
        backward(Tensor(np.array(1.0)))
    x = Tensor(np.ones((2, 2)), tracked=True)
    with pytest.raises(ShapeMismatch):
        backward(relu(x))


def test_gradients_accumulate_over_reused_leaf():
    x = Tensor(np.array([[1.0, -2.0]]), tracked=True)
    total = dense(x, Tensor(np.eye(2)), Tensor(np.zeros(2)))
    loss = mean_squared_error(total, np.zeros((1, 2)))
    backward(loss)
    first = x.grad.copy()
    loss = mean_squared_error(dense(x, Tensor(np.eye(2)), Tensor(np.zeros(2))), np.zeros((1, 2)))
    backward(loss)
    np.testing.assert_allclose(x.grad, 2 * first)
    np.testing.assert_allclose(first, [[1.0, -2.0]])


def test_untracked_inputs_are_not_recorded():
    weight = Tensor(np.eye(2))
    out = dense(Tensor(np.ones((1, 2))), weight, Tensor(np.zeros(2)))
    assert not out.tracked
    with pytest.raises(NoGraph):
        backward(mean_squared_error(out, np.zeros((1, 2))))


def test_no_grad_is_thread_local():
    seen = {}

    def worker():
        seen["worker"] = is_recording()

    with no_grad():
        assert not is_recording()
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()
    assert seen["worker"] is True
    assert is_recording()


def test_no_grad_skips_recording():
    x = Tensor(np.ones((1, 2)), tracked=True)
    with no_grad():
        out = relu(x)
    assert not out.tracked


def test_forward_is_deterministic(rng):
    x = rng.normal(size=(2, 3, 5, 5))
    weight = rng.normal(size=(2, 3, 3, 3))
    first = conv2d(Tensor(x), Tensor(weight), Tensor(np.zeros(2))).values
    second = conv2d(Tensor(x), Tensor(weight), Tensor(np.zeros(2))).values
    assert np.array_equal(first, second)
