import json

import numpy as np
import pytest

from histonav.analysis import (
    ConfusionMatrix,
    aggregate,
    confusion,
    evaluate_predictions,
    format_mean_std,
    macro_roc,
    per_class_metrics,
    roc_auc,
    roc_frame,
)
from histonav.errors import (
    ClassOutOfRange,
    EmptyMatrix,
    InconsistentReports,
    LengthMismatch,
    SingleClassOnly,
)


def report_with_accuracy(correct, total=100):
    wrong = total - correct
    counts = np.array([[total // 2 - wrong // 2, wrong // 2], [wrong - wrong // 2, total // 2 - (wrong - wrong // 2)]])
    return per_class_metrics(ConfusionMatrix(counts))


def pairwise_auc(scores, positive):
    pos, neg = scores[positive], scores[~positive]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


def test_confusion_counts():
    cm = confusion([1, 1, 1, 0, 0, 0, 0, 1], [1, 1, 1, 1, 0, 0, 0, 0], 2)
    assert cm.counts.tolist() == [[3, 1], [1, 3]]
    assert confusion([0, 2, 1], [0, 2, 1], 3).counts.tolist() == np.diag([1, 1, 1]).tolist()
    assert confusion([], [], 3).counts.tolist() == np.zeros((3, 3), dtype=int).tolist()


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0], 2)
    with pytest.raises(ClassOutOfRange):
        confusion([0, 2], [0, 1], 2)


def test_binary_metrics():
    report = per_class_metrics(ConfusionMatrix(np.array([[8, 2], [2, 8]])))
    for name in report.classes:
        assert report.table.loc[name, "sensitivity"] == pytest.approx(80.0)
        assert report.table.loc[name, "specificity"] == pytest.approx(80.0)
        assert report.table.loc[name, "f1"] == pytest.approx(80.0)
    assert report.accuracy == pytest.approx(80.0)


def test_perfect_and_degenerate_matrices():
    perfect = per_class_metrics(ConfusionMatrix(np.diag([5, 3, 2])))
    assert np.allclose(perfect.table.drop(columns="auc").to_numpy(), 100.0)
    missing = per_class_metrics(ConfusionMatrix(np.array([[4, 0, 0], [0, 4, 0], [0, 0, 0]])))
    assert ("sensitivity", "Type2") in missing.undefined
    assert missing.table.loc["weighted avg", "sensitivity"] == pytest.approx(100.0)
    with pytest.raises(EmptyMatrix):
        per_class_metrics(ConfusionMatrix(np.zeros((2, 2), dtype=int)))


def test_auc_examples():
    scores = np.array([0.9, 0.8, 0.4, 0.3])
    assert roc_auc(scores, [1, 0, 1, 0]).auc == pytest.approx(0.75)
    assert roc_auc(scores, [0, 1, 0, 1]).auc == pytest.approx(0.25)
    assert roc_auc(scores, [1, 1, 0, 0]).auc == pytest.approx(1.0)
    with pytest.raises(SingleClassOnly):
        roc_auc(scores, [1, 1, 1, 1])


@pytest.mark.parametrize("seed", range(5))
def test_auc_matches_pairwise_ordering(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=60)
    # few distinct rows, so scores tie often
    rows = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4], [0.1, 0.1, 0.8], [0.5, 0.25, 0.25]])
    probabilities = rows[rng.integers(0, len(rows), size=60)]
    for c in range(3):
        curve = roc_auc(probabilities, labels, c)
        assert curve.auc == pytest.approx(pairwise_auc(probabilities[:, c], labels == c))
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)


def test_auc_matches_pairwise_ordering_on_small_instances():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, size=n)
        labels[rng.choice(n, 2, replace=False)] = [0, 1]
        scores = rng.integers(0, 5, size=n) / 4
        curve = roc_auc(scores, labels)
        assert curve.auc == pytest.approx(pairwise_auc(scores, labels == 1), abs=1e-12)


def test_macro_curve_averages_tpr():
    first = roc_auc(np.array([0.9, 0.8, 0.4, 0.3]), [1, 0, 1, 0])
    second = roc_auc(np.array([0.9, 0.8, 0.4, 0.3]), [1, 1, 0, 0])
    macro = macro_roc([first, second])
    assert 0.75 <= macro.auc <= 1.0
    assert np.all(np.diff(macro.fpr) > 0)


def test_evaluate_predictions():
    probabilities = np.array([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.1, 0.2, 0.7], [0.6, 0.3, 0.1]])
    report = evaluate_predictions(probabilities, [0, 1, 2, 1], 3)
    assert report.accuracy == pytest.approx(75.0)
    assert report.confusion.counts.tolist() == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]
    assert set(report.curves) == {"Type0", "Type1", "Type2", "macro"}
    assert report.table.loc["Type2", "auc"] == pytest.approx(1.0)


def test_aggregate_mean_and_std():
    folds = [report_with_accuracy(c) for c in (96, 97, 98, 96, 97)]
    result = aggregate(folds)
    assert result.accuracy == pytest.approx(96.8)
    assert result.accuracy_std == pytest.approx(np.std([96, 97, 98, 96, 97]))
    assert result.formatted("accuracy") == "96.80±0.75"
    assert aggregate([report_with_accuracy(100)] * 5).formatted("accuracy") == "100.00±0.00"
    assert aggregate([report_with_accuracy(90)]).accuracy_std == 0.0


def test_aggregate_errors():
    with pytest.raises(InconsistentReports):
        aggregate([])
    three = per_class_metrics(ConfusionMatrix(np.diag([1, 1, 1])))
    with pytest.raises(InconsistentReports):
        aggregate([report_with_accuracy(90), three])


def test_format_mean_std():
    assert format_mean_std(100, 0) == "100.00±0.00"
    assert format_mean_std(96.8, 0.748) == "96.80±0.75"


def test_rendered_outputs():
    probabilities = np.array([[0.8, 0.2], [0.3, 0.7], [0.6, 0.4], [0.1, 0.9]])
    folds = [evaluate_predictions(probabilities, [0, 1, 1, 1], 2)] * 2
    result = aggregate(folds)
    text = result.render_table()
    assert "Accuracy" in text and "75.00±0.00" in text
    for title in ("F1-score", "Specificity", "Sensitivity", "AUC", "macro avg", "weighted avg"):
        assert title in text
    document = json.loads(result.to_json())
    assert document["accuracy"]["folds"] == [75.0, 75.0]
    assert document["auc"]["Type0"]["mean"] == pytest.approx(1.0)
    frame = roc_frame({0: folds[0].curves})
    assert list(frame.columns) == ["fold", "class", "threshold", "fpr", "tpr"]
    assert set(frame["class"]) == {"Type0", "Type1", "macro"}


@pytest.mark.parametrize("seed", range(20))
def test_per_class_metric_identities(seed):
    rng = np.random.default_rng(seed)
    n_classes = int(rng.integers(2, 6))
    counts = rng.integers(1, 30, size=(n_classes, n_classes))
    report = per_class_metrics(ConfusionMatrix(counts))
    names = report.classes
    assert report.accuracy == pytest.approx(report.table.loc["weighted avg", "sensitivity"])
    f1 = report.table.loc[names, "f1"]
    assert f1.min() - 1e-9 <= report.table.loc["macro avg", "f1"] <= f1.max() + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_binary_sensitivity_mirrors_specificity(seed):
    counts = np.random.default_rng(seed).integers(1, 50, size=(2, 2))
    table = per_class_metrics(ConfusionMatrix(counts)).table
    assert table.loc["Type0", "sensitivity"] == pytest.approx(table.loc["Type1", "specificity"])
    assert table.loc["Type1", "sensitivity"] == pytest.approx(table.loc["Type0", "specificity"])


def test_aggregate_skips_folds_with_undefined_auc():
    probabilities = np.array([[0.8, 0.1, 0.1], [0.2, 0.7, 0.1], [0.1, 0.2, 0.7], [0.6, 0.3, 0.1]])
    complete = evaluate_predictions(probabilities, [0, 1, 2, 1], 3)
    missing_class = evaluate_predictions(probabilities, [0, 1, 1, 0], 3)
    summary = aggregate([complete, missing_class])
    assert ("auc", "Type2") in summary.undefined
    assert summary.table.loc["Type2", "auc"] == pytest.approx(complete.table.loc["Type2", "auc"])
    assert summary.formatted("auc", "Type2") == "1.00±0.00"
    assert "nan" not in summary.render_table()
    assert aggregate([missing_class]).formatted("auc", "Type2") == "undefined"
