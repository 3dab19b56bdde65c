"""Adam, cosine annealing with warm restarts, and early stopping.

The schedule is evaluated per epoch:

    lr(epoch) = eta_min + (eta_max - eta_min) * (1 + cos(pi * T_cur / T_i)) / 2

with T_cur = epoch mod T_i, so the rate returns to eta_max at every restart.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from histonav.errors import ConfigError, InvalidArgument, MissingGradient

__all__ = ["ScheduleConfig", "cosine_lr", "AdamState", "adam_step", "early_stop"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScheduleConfig:
    """Learning-rate schedule settings.

    Parameters
    ----------
    eta_max : float, defaults to 0.001
        initial (and post-restart) learning rate
    eta_min : float, defaults to 0.0
        floor of the cosine
    restart_period : int, defaults to 12
        epochs between warm restarts
    total_epochs : int, defaults to 47
        maximum number of epochs
    """

    eta_max: float = 0.001
    eta_min: float = 0.0
    restart_period: int = 12
    total_epochs: int = 47

    def __post_init__(self):
        if not 0 <= self.eta_min < self.eta_max:
            raise ConfigError(
                f"need 0 <= eta_min < eta_max, got {self.eta_min} and {self.eta_max}"
            )
        if self.restart_period < 1:
            raise ConfigError(f"restart_period must be >= 1, got {self.restart_period}")
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs must be >= 1, got {self.total_epochs}")


def cosine_lr(epoch, cfg=None):
    """Learning rate for an epoch under cosine annealing with warm restarts.

    Example
    -------
    >>> cosine_lr(6, ScheduleConfig())
    0.0005
    """
    if cfg is None:
        cfg = ScheduleConfig()
    if epoch < 0:
        raise InvalidArgument(f"epoch must be >= 0, got {epoch}")
    t_cur = epoch % cfg.restart_period
    cosine = math.cos(math.pi * t_cur / cfg.restart_period)
    return cfg.eta_min + 0.5 * (cfg.eta_max - cfg.eta_min) * (1 + cosine)


@dataclass
class AdamState:
    """Moment buffers of the Adam optimizer.

    Attributes
    ----------
    beta1, beta2 : float
        exponential decay rates of the first and second moments
    epsilon : float
        added to the root of the second moment
    t : int
        number of completed steps
    m, v : dict
        parameter id -> moment buffer of the parameter's shape
    """

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, lr):
    """One bias-corrected Adam update, in place.

    Parameters
    ----------
    state : AdamState
        moment buffers; ``state.t`` is incremented by one
    params : dict or list of histonav.engine.Parameter
        parameters to update. Frozen parameters are skipped untouched.
    grads : dict
        parameter id -> gradient array, for every non-frozen parameter
    lr : float
        learning rate of this step

    Returns
    -------
    params
        the same parameters, updated

    Raises
    ------
    MissingGradient
        if a non-frozen parameter has no gradient
    """
    parameters = list(params.values()) if isinstance(params, dict) else list(params)
    trainable = [p for p in parameters if not p.frozen]
    missing = [p.id for p in trainable if grads.get(p.id) is None]
    if missing:
        raise MissingGradient(f"no gradient for trainable parameters {missing}")
    state.t += 1
    correction1 = 1 - state.beta1**state.t
    correction2 = 1 - state.beta2**state.t
    for parameter in trainable:
        grad = np.asarray(grads[parameter.id], dtype=np.float64)
        if grad.shape != parameter.shape:
            raise MissingGradient(
                f"gradient of {parameter.id} has shape {grad.shape}, expected {parameter.shape}"
            )
        m = state.m.setdefault(parameter.id, np.zeros(parameter.shape))
        v = state.v.setdefault(parameter.id, np.zeros(parameter.shape))
        m *= state.beta1
        m += (1 - state.beta1) * grad
        v *= state.beta2
        v += (1 - state.beta2) * grad**2
        m_hat = m / correction1
        v_hat = v / correction2
        parameter.values[...] -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


def early_stop(val_losses, patience=10):
    """Whether the minimum validation loss is at least `patience` epochs old.

    Parameters
    ----------
    val_losses : list of float
        validation loss per completed epoch
    patience : int, defaults to 10
        epochs without a new minimum that are tolerated

    Returns
    -------
    bool

    Example
    -------
    >>> early_stop([1.0, 0.5, 0.6, 0.7, 0.8], patience=3)
    True
    """
    if patience < 1:
        raise InvalidArgument(f"patience must be >= 1, got {patience}")
    if len(val_losses) == 0:
        return False
    best = int(np.argmin(val_losses))
    return len(val_losses) - 1 - best >= patience
