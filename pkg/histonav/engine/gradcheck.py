"""Finite-difference check of reverse-mode gradients."""

import logging

import numpy as np

from histonav.engine.tensor import Tensor, backward, cross_entropy, no_grad

__all__ = ["grad_check"]

logger = logging.getLogger(__name__)


def grad_check(model, inputs, epsilon=1e-6, labels=None, loss=None, return_logits=False):
    """Largest relative error between analytic and central-difference gradients.

    Every element of every trainable parameter is perturbed by +/- epsilon.
    The relative error of one element is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.

    Parameters
    ----------
    model : histonav.models.Model
        a built model; small enough for exhaustive perturbation
    inputs : Tensor or numpy.ndarray
        a batch of inputs
    epsilon : float, defaults to 1e-6
        central difference step
    labels : array-like of int, optional
        class index per input row for the default cross-entropy loss.
        Defaults to class 0 for every row.
    loss : callable, optional
        maps the model output Tensor to a scalar Tensor. Overrides the
        default cross-entropy loss.
    return_logits : bool, defaults to False
        feed the loss the logits instead of the softmax output

    Returns
    -------
    float
        max relative error; 0.0 when the model has no trainable parameters
    """
    if not isinstance(inputs, Tensor):
        inputs = Tensor(inputs)
    if loss is None:
        if labels is None:
            labels = np.zeros(inputs.shape[0], dtype=int)
        one_hot = np.eye(model.spec.num_classes)[np.asarray(labels)]

        def loss(output):
            return cross_entropy(output, one_hot)

    trainable = [model.parameters[name] for name in model.trainable_params()]
    if not trainable:
        logger.info("no trainable parameters; gradient check passes vacuously")
        return 0.0

    for parameter in trainable:
        parameter.tensor.zero_grad()
    backward(loss(model.forward(inputs, return_logits=return_logits)))

    def evaluate():
        with no_grad():
            return float(loss(model.forward(inputs, return_logits=return_logits)).values)

    worst = 0.0
    for parameter in trainable:
        analytic = parameter.grad
        if analytic is None:
            analytic = np.zeros_like(parameter.values)
        flat = parameter.values.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + epsilon
            plus = evaluate()
            flat[k] = original - epsilon
            minus = evaluate()
            flat[k] = original
            numeric = (plus - minus) / (2 * epsilon)
            exact = analytic.flat[k]
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            if error > worst:
                worst = error
                logger.debug(f"{parameter.id}[{k}]: analytic {exact}, numeric {numeric}")
        parameter.tensor.zero_grad()
    return worst
