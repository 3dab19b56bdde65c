import numpy as np
import pandas as pd
import pytest

from histonav.analysis import evaluate_predictions
from histonav.plotting_functions import plot_confusion, plot_roc, plot_training_curves
from histonav.plots.plots import grid_shape
from histonav.errors import InvalidArgument


@pytest.fixture
def logs():
    return [
        pd.DataFrame(
            {
                "fold": fold,
                "epoch": range(4),
                "lr": [0.001, 0.0008, 0.0005, 0.0002],
                "train_loss": [1.1, 0.8, 0.6, 0.5],
                "train_acc": [0.4, 0.6, 0.7, 0.8],
                "val_loss": [1.0, 0.9, 0.7, 0.7],
                "val_acc": [0.5, 0.55, 0.7, 0.72],
            }
        )
        for fold in range(2)
    ]


@pytest.fixture
def reports(rng):
    labels = np.repeat([0, 1, 2], 10)
    out = []
    for _ in range(2):
        scores = rng.dirichlet(np.ones(3), size=30)
        scores[np.arange(30), labels] += 1.0
        out.append(evaluate_predictions(scores / scores.sum(axis=1, keepdims=True), labels, 3))
    return out


def test_training_curves_data(logs, tmp_path):
    plot = plot_training_curves(logs)
    assert plot.rows == 2 and plot.columns == 2
    frame = plot.to_frame()
    assert len(frame) == 8
    assert {"fold", "epoch", "train_loss", "val_loss", "train_acc", "val_acc"} <= set(frame.columns)
    plot.close()


def test_confusion_data(reports):
    plot = plot_confusion(reports, labels=["a", "b"])
    frame = plot.to_frame()
    assert list(frame.columns) == ["fold", "true", "pred", "count"]
    assert frame["count"].sum() == 60
    plot.close()


def test_roc_data(reports):
    plot = plot_roc(reports)
    frame = plot.to_frame()
    assert set(frame["class"]) == {"Type0", "Type1", "Type2", "macro"}
    plot.close()


def test_label_count_must_match(reports):
    with pytest.raises(InvalidArgument):
        plot_roc(reports, labels=["only one"])


def test_svg_output_is_reproducible(reports, tmp_path):
    files = []
    for name in ("first", "second"):
        plot = plot_roc(reports)
        plot.save(tmp_path / f"{name}.svg")
        plot.save_data(tmp_path / f"{name}.csv")
        plot.close()
        files.append(name)
    assert (tmp_path / "first.svg").read_bytes() == (tmp_path / "second.svg").read_bytes()
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()
    assert (tmp_path / "first.svg").read_text().lstrip().startswith("<?xml")


@pytest.mark.parametrize(
    "panels, rows, cols, expected",
    [(3, None, None, (1, 3)), (7, None, None, (2, 5)), (7, 3, None, (3, 3)), (7, None, 2, (4, 2)), (0, None, None, (1, 1))],
)
def test_grid_shape(panels, rows, cols, expected):
    assert grid_shape(panels, rows, cols) == expected
