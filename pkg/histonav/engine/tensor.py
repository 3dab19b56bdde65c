"""Reverse-mode differentiable arrays.

A ``Tensor`` wraps a float64 numpy array. Operations are ``Function``
subclasses; applying one to a tracked tensor records a node on the output so
``backward`` can walk the graph from a scalar loss back to the leaves.
Only leaves (parameters and tracked inputs) keep a ``grad`` buffer.

Frozen parameters are created untracked, so no gradient buffer is ever
allocated for them and no operation records a path back to them.
"""

import logging
import threading
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from histonav.errors import NoGraph, NotNormalized, NotOneHot, ShapeMismatch

__all__ = [
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
]

logger = logging.getLogger(__name__)

_recording = threading.local()


def is_recording():
    """Whether operations on tracked tensors are currently recorded."""
    return getattr(_recording, "enabled", True)


class no_grad:
    """Context manager that disables recording on the current thread.

    Example
    -------
    >>> with no_grad():
    ...     probabilities = model.forward(images)
    """

    def __enter__(self):
        self.previous = is_recording()
        _recording.enabled = False

    def __exit__(self, *args, **kwargs):
        _recording.enabled = self.previous


class Tensor:
    """An n-dimensional float64 array with optional gradient tracking.

    Parameters
    ----------
    values : array-like
        The numeric values. Converted to a float64 numpy array.
    tracked : bool, defaults to False
        Whether operations on this tensor are recorded for backward.

    Attributes
    ----------
    values : numpy.ndarray
        The float64 values, row-major.
    tracked : bool
        Whether this tensor takes part in reverse-mode differentiation.
    grad : numpy.ndarray or None
        Accumulated gradient of a tracked leaf; same shape as ``values``.
    """

    def __init__(self, values, tracked=False):
        self.values = np.asarray(values, dtype=np.float64)
        self.tracked = bool(tracked)
        self.grad = None
        self._node = None

    @property
    def shape(self):
        return self.values.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, tracked={self.tracked})"

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Back-propagate from this scalar. See ``histonav.engine.backward``."""
        backward(self)


@dataclass
class Parameter:
    """A named model weight.

    Parameters
    ----------
    id : str
        Unique, deterministic identifier (e.g. "extractor.0.weight").
    tensor : Tensor
        The values. Its ``tracked`` flag is set from ``frozen``.
    frozen : bool, defaults to False
        Frozen parameters are never tracked, so never receive gradients.
    """

    id: str
    tensor: Tensor
    frozen: bool = False

    def __post_init__(self):
        self.tensor.values = np.ascontiguousarray(self.tensor.values)
        self.tensor.tracked = not self.frozen
        self.tensor.grad = None

    @property
    def values(self):
        return self.tensor.values

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.shape


class Function:
    """A recorded operation.

    Subclasses implement ``forward`` on numpy arrays and ``backward``, which
    receives the upstream gradient and returns one gradient (or None) per
    input, in input order.
    """

    def __init__(self, **options):
        self.options = options
        self.inputs = ()
        self.saved = ()

    @classmethod
    def apply(cls, *inputs, **options):
        function = cls(**options)
        output = Tensor(function.forward(*[t.values for t in inputs]))
        if is_recording() and any(t.tracked for t in inputs):
            function.inputs = inputs
            output.tracked = True
            output._node = function
        return output

    def forward(self, *values):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


def _topological_order(root):
    """Tensors reachable from root, each after all of its inputs."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor._node is not None:
            for parent in tensor._node.inputs:
                if parent.tracked and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every tracked leaf reachable from loss.

    Parameters
    ----------
    loss : Tensor
        A single-element tensor produced by recorded operations.

    Raises
    ------
    NoGraph
        if loss was not produced by recorded operations.
    ShapeMismatch
        if loss has more than one element.
    """
    if loss._node is None or not loss.tracked:
        raise NoGraph("loss was not produced by recorded operations")
    if loss.values.size != 1:
        raise ShapeMismatch(f"backward needs a scalar loss, got shape {loss.shape}")
    pending = {id(loss): np.ones_like(loss.values)}
    for tensor in reversed(_topological_order(loss)):
        grad = pending.pop(id(tensor), None)
        if grad is None:
            continue
        if tensor._node is None:
            tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
            continue
        for parent, parent_grad in zip(tensor._node.inputs, tensor._node.backward(grad)):
            if parent_grad is None or not parent.tracked:
                continue
            key = id(parent)
            pending[key] = parent_grad if key not in pending else pending[key] + parent_grad


# --- operations ---


def _strided(start, count, step):
    return slice(start, start + step * (count - 1) + 1, step)


class Conv2d(Function):
    def forward(self, x, weight, bias):
        stride = self.options["stride"]
        padding = self.options["padding"]
        kh, kw = weight.shape[2:]
        self.input_shape = x.shape
        if padding:
            x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        self.saved = (windows, weight, x.shape)
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        return out.transpose(0, 3, 1, 2) + bias[None, :, None, None]

    def backward(self, grad):
        windows, weight, padded_shape = self.saved
        stride = self.options["stride"]
        padding = self.options["padding"]
        out_h, out_w = grad.shape[2:]
        grad_weight = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        grad_padded = np.zeros(padded_shape)
        for i in range(weight.shape[2]):
            for j in range(weight.shape[3]):
                contribution = np.tensordot(grad, weight[:, :, i, j], axes=([1], [0]))
                grad_padded[
                    :, :, _strided(i, out_h, stride), _strided(j, out_w, stride)
                ] += contribution.transpose(0, 3, 1, 2)
        height, width = self.input_shape[2:]
        grad_x = grad_padded[:, :, padding : padding + height, padding : padding + width]
        return grad_x, grad_weight, grad_bias


class MaxPool2d(Function):
    def forward(self, x):
        kernel = self.options["kernel"]
        stride = self.options["stride"]
        windows = sliding_window_view(x, (kernel, kernel), axis=(2, 3))
        windows = windows[:, :, ::stride, ::stride]
        flat = windows.reshape(windows.shape[:4] + (kernel * kernel,))
        argmax = flat.argmax(axis=-1)
        self.saved = (argmax, x.shape)
        return np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        argmax, input_shape = self.saved
        kernel = self.options["kernel"]
        stride = self.options["stride"]
        out_h, out_w = grad.shape[2:]
        grad_x = np.zeros(input_shape)
        for index in range(kernel * kernel):
            i, j = divmod(index, kernel)
            grad_x[:, :, _strided(i, out_h, stride), _strided(j, out_w, stride)] += (
                grad * (argmax == index)
            )
        return (grad_x,)


class ReLU(Function):
    def forward(self, x):
        self.saved = (x > 0,)
        return np.maximum(x, 0.0)

    def backward(self, grad):
        (mask,) = self.saved
        return (grad * mask,)


class Reshape(Function):
    def forward(self, x):
        self.saved = (x.shape,)
        return x.reshape(self.options["shape"])

    def backward(self, grad):
        (shape,) = self.saved
        return (grad.reshape(shape),)


class Dense(Function):
    def forward(self, x, weight, bias):
        self.saved = (x, weight)
        return x @ weight.T + bias

    def backward(self, grad):
        x, weight = self.saved
        return grad @ weight, grad.T @ x, grad.sum(axis=0)


class Softmax(Function):
    def forward(self, x):
        out = special.softmax(x, axis=1)
        self.saved = (out,)
        return out

    def backward(self, grad):
        (out,) = self.saved
        return (out * (grad - (grad * out).sum(axis=1, keepdims=True)),)


class CrossEntropy(Function):
    def forward(self, probabilities, labels):
        epsilon = self.options["epsilon"]
        clamped = np.maximum(probabilities, epsilon)
        self.saved = (probabilities, clamped, labels)
        return np.asarray(-(labels * np.log(clamped)).sum() / len(labels))

    def backward(self, grad):
        probabilities, clamped, labels = self.saved
        epsilon = self.options["epsilon"]
        grad_p = -labels / clamped / len(labels) * (probabilities > epsilon)
        return grad * grad_p, None


class MeanSquaredError(Function):
    def forward(self, prediction, target):
        self.saved = (prediction - target,)
        return np.asarray(np.mean(self.saved[0] ** 2))

    def backward(self, grad):
        (difference,) = self.saved
        return grad * 2.0 * difference / difference.size, None


def _as_tensor(value):
    return value.tensor if isinstance(value, Parameter) else value


def conv2d(x, weight, bias, stride=1, padding=0):
    """2-D cross-correlation of (B, C, H, W) input with (F, C, kh, kw) kernels."""
    x, weight, bias = (_as_tensor(t) for t in (x, weight, bias))
    if x.values.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(
            f"conv2d expects (B, {weight.shape[1]}, H, W) input, got {x.shape}"
        )
    height, width = x.shape[2] + 2 * padding, x.shape[3] + 2 * padding
    if height < weight.shape[2] or width < weight.shape[3]:
        raise ShapeMismatch(f"kernel {weight.shape[2:]} larger than input {x.shape}")
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


def maxpool2d(x, kernel=2, stride=None):
    """Max pooling over square windows. Stride defaults to the kernel size."""
    x = _as_tensor(x)
    if x.values.ndim != 4 or x.shape[2] < kernel or x.shape[3] < kernel:
        raise ShapeMismatch(f"maxpool2d {kernel}x{kernel} cannot pool shape {x.shape}")
    return MaxPool2d.apply(x, kernel=kernel, stride=stride or kernel)


def relu(x):
    return ReLU.apply(_as_tensor(x))


def flatten(x):
    """Flatten all but the batch axis."""
    x = _as_tensor(x)
    return Reshape.apply(x, shape=(x.shape[0], -1))


def dense(x, weight, bias):
    """Affine map y = x W^T + b for (B, in) input and (out, in) weight."""
    x, weight, bias = (_as_tensor(t) for t in (x, weight, bias))
    if x.values.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"dense expects (B, {weight.shape[1]}) input, got {x.shape}")
    return Dense.apply(x, weight, bias)


def softmax(x):
    """Row-wise softmax of (B, N) logits."""
    x = _as_tensor(x)
    if x.values.ndim != 2:
        raise ShapeMismatch(f"softmax expects (B, N) logits, got {x.shape}")
    return Softmax.apply(x)


def cross_entropy(probabilities, one_hot_labels, epsilon=1e-12):
    """Mean over the batch of -sum_i y_i log(p_i).

    Parameters
    ----------
    probabilities : Tensor
        (B, N) rows summing to 1 within 1e-6.
    one_hot_labels : Tensor or array-like
        (B, N) one-hot rows.
    epsilon : float, defaults to 1e-12
        Probabilities are clamped below by epsilon before the logarithm.

    Returns
    -------
    Tensor
        A scalar tensor.
    """
    if not isinstance(one_hot_labels, Tensor):
        one_hot_labels = Tensor(one_hot_labels)
    p = probabilities.values
    y = one_hot_labels.values
    if p.ndim != 2 or p.shape != y.shape or p.shape[1] < 2:
        raise ShapeMismatch(
            f"cross_entropy needs matching (B, N>=2) inputs, got {p.shape} and {y.shape}"
        )
    deviation = np.abs(p.sum(axis=1) - 1.0)
    if np.any(deviation > 1e-6):
        row = int(deviation.argmax())
        raise NotNormalized(f"probability row {row} sums to {p[row].sum():.9f}")
    valid = np.all((y == 0) | (y == 1), axis=1) & (y.sum(axis=1) == 1)
    if not np.all(valid):
        raise NotOneHot(f"label row {int(np.argmin(valid))} is not one-hot")
    return CrossEntropy.apply(probabilities, one_hot_labels, epsilon=epsilon)


def mean_squared_error(prediction, target):
    """Mean of squared differences; a quadratic loss for diagnostics."""
    if not isinstance(target, Tensor):
        target = Tensor(target)
    if prediction.shape != target.shape:
        raise ShapeMismatch(f"shapes differ: {prediction.shape} vs {target.shape}")
    return MeanSquaredError.apply(_as_tensor(prediction), target)
