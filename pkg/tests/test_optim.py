import math

import numpy as np
import pytest

from histonav.engine import Parameter, Tensor
from histonav.errors import ConfigError, InvalidArgument, MissingGradient
from histonav.training import AdamState, ScheduleConfig, adam_step, cosine_lr, early_stop


def test_cosine_schedule_points():
    cfg = ScheduleConfig(eta_max=0.001, eta_min=0.0, restart_period=12)
    assert cosine_lr(0, cfg) == pytest.approx(0.001)
    assert cosine_lr(6, cfg) == pytest.approx(0.0005)
    assert cosine_lr(12, cfg) == pytest.approx(0.001)
    expected = 0.0005 * (1 + math.cos(math.pi * 11 / 12))
    assert abs(cosine_lr(11, cfg) - expected) < 1e-12
    assert cosine_lr(11, cfg) == pytest.approx(1.7037e-5, rel=1e-3)


def test_cosine_schedule_stays_in_range():
    cfg = ScheduleConfig(eta_max=0.003, eta_min=0.0001, restart_period=5, total_epochs=20)
    rates = [cosine_lr(e, cfg) for e in range(cfg.total_epochs)]
    assert all(cfg.eta_min <= r <= cfg.eta_max for r in rates)
    for epoch in range(0, 20, 5):
        assert rates[epoch] == pytest.approx(cfg.eta_max)


def test_schedule_and_stopping_reject_bad_arguments():
    with pytest.raises(InvalidArgument):
        cosine_lr(-1)
    with pytest.raises(InvalidArgument):
        early_stop([1.0, 0.9], 0)


def test_schedule_config_validation():
    with pytest.raises(ConfigError):
        ScheduleConfig(eta_max=0.001, eta_min=0.01)
    with pytest.raises(ConfigError):
        ScheduleConfig(restart_period=0)


@pytest.mark.parametrize(
    "losses, patience, expected",
    [
        ([1.0, 0.5, 0.6, 0.7, 0.8], 3, True),
        ([1.0, 0.5, 0.6, 0.7], 3, False),
        ([1.0, 0.9, 0.8], 1, False),
        ([], 2, False),
    ],
)
def test_early_stop(losses, patience, expected):
    assert early_stop(losses, patience) is expected


def _parameter(name, values, frozen=False):
    return Parameter(name, Tensor(np.array(values, dtype=float)), frozen=frozen)


def test_first_adam_step_moves_by_lr():
    param = _parameter("w", [1.0, -1.0])
    adam_step(AdamState(), [param], {"w": np.array([0.5, -2.0])}, lr=0.1)
    # bias correction makes the first step lr * sign(grad)
    np.testing.assert_allclose(param.values, [0.9, -0.9], atol=1e-6)


def test_adam_skips_frozen_and_requires_gradients():
    frozen = _parameter("f", [2.0], frozen=True)
    live = _parameter("w", [1.0])
    state = AdamState()
    adam_step(state, {"f": frozen, "w": live}, {"w": np.array([1.0])}, lr=0.01)
    assert frozen.values[0] == 2.0
    assert state.t == 1
    assert "f" not in state.m
    with pytest.raises(MissingGradient):
        adam_step(state, [live], {}, lr=0.01)


def test_adam_minimizes_a_quadratic():
    param = _parameter("w", [3.0, -4.0])
    state = AdamState()
    for _ in range(500):
        adam_step(state, [param], {"w": 2 * param.values}, lr=0.05)
    assert np.abs(param.values).max() < 0.05
