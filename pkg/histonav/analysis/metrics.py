"""Confusion matrices, per-class metrics, ROC/AUC and fold aggregation.

Sensitivity, specificity, precision and F1 are computed one-vs-rest per
class and reported in percent. A metric whose denominator is zero is
reported as 0 and listed in ``MetricsReport.undefined``.
"""

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.metrics import auc, confusion_matrix, roc_curve

from histonav.errors import (
    ClassOutOfRange,
    EmptyMatrix,
    InconsistentReports,
    LengthMismatch,
    NotNormalized,
    SingleClassOnly,
)

__all__ = [
    "METRICS",
    "class_names",
    "format_mean_std",
    "ConfusionMatrix",
    "confusion",
    "MetricsReport",
    "per_class_metrics",
    "RocCurve",
    "roc_auc",
    "macro_roc",
    "evaluate_predictions",
    "aggregate",
    "roc_frame",
]

logger = logging.getLogger(__name__)

METRICS = ("sensitivity", "specificity", "precision", "f1", "auc")
AVERAGES = ("macro avg", "weighted avg")


def class_names(n_classes):
    return [f"Type{k}" for k in range(n_classes)]


def format_mean_std(mean, std, decimals=2):
    """e.g. format_mean_std(100, 0) -> "100.00±0.00"; NaN renders "undefined"."""
    if np.isnan(mean):
        return "undefined"
    return f"{mean:.{decimals}f}±{std:.{decimals}f}"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """N x N counts, rows are true classes, columns predicted classes."""

    counts: np.ndarray

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def support(self):
        return self.counts.sum(axis=1)

    def to_frame(self):
        names = class_names(self.n_classes)
        return pd.DataFrame(self.counts, index=names, columns=names)


def confusion(predictions, labels, n_classes):
    """Count (true, predicted) pairs.

    Raises
    ------
    LengthMismatch
        if predictions and labels differ in length
    ClassOutOfRange
        if an entry is outside [0, n_classes)
    """
    predictions = np.asarray(predictions, dtype=int).reshape(-1)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions but {len(labels)} labels")
    for name, values in (("prediction", predictions), ("label", labels)):
        outside = values[(values < 0) | (values >= n_classes)]
        if len(outside):
            raise ClassOutOfRange(f"{name} {outside[0]} outside [0, {n_classes})")
    if len(labels) == 0:
        return ConfusionMatrix(np.zeros((n_classes, n_classes), dtype=int))
    counts = confusion_matrix(labels, predictions, labels=np.arange(n_classes))
    return ConfusionMatrix(counts.astype(int))


class MetricsReport:
    """Per-class and averaged metrics of one fold, or their fold aggregate.

    Parameters
    ----------
    table : pandas.DataFrame
        rows "Type0".."TypeN-1", "macro avg", "weighted avg"; columns
        sensitivity, specificity, precision, f1 (percent) and auc ([0, 1])
    accuracy : float
        percent
    support : array-like of int
        true-class counts
    undefined : iterable of (metric, row)
        entries whose denominator was zero
    std : pandas.DataFrame, optional
        across-fold population std, same layout as table
    accuracy_std : float, defaults to 0.0
    folds : list of MetricsReport, optional
        the fold reports an aggregate was built from

    Attributes
    ----------
    classes : list of str
        class row names
    """

    def __init__(self, table, accuracy, support, undefined=(), std=None, accuracy_std=0.0,
                 folds=None, confusion=None, curves=None):
        self.table = table
        self.accuracy = float(accuracy)
        self.support = np.asarray(support)
        self.undefined = sorted(set(undefined))
        self.std = std if std is not None else table * 0.0
        self.accuracy_std = float(accuracy_std)
        self.folds = folds or []
        self.confusion = confusion
        self.curves = curves or {}

    def __repr__(self):
        return f"MetricsReport({len(self.classes)} classes, accuracy {self.formatted('accuracy')})"

    @property
    def classes(self):
        return [row for row in self.table.index if row not in AVERAGES]

    @property
    def is_aggregate(self):
        return len(self.folds) > 0

    def formatted(self, metric, row=None):
        """Render a metric as "MM.MM±SS.SS"; row names a class or an average."""
        if metric == "accuracy":
            return format_mean_std(self.accuracy, self.accuracy_std)
        return format_mean_std(self.table.loc[row, metric], self.std.loc[row, metric])

    def render_table(self):
        """Human-readable table: accuracy, then F1, specificity,
        sensitivity and AUC per class with macro and weighted averages."""
        index = [("Accuracy", "")]
        values = [self.formatted("accuracy")]
        for metric, title in (
            ("f1", "F1-score"),
            ("specificity", "Specificity"),
            ("sensitivity", "Sensitivity"),
            ("auc", "AUC"),
        ):
            for row in self.table.index:
                index.append((title, row))
                values.append(self.formatted(metric, row))
        frame = pd.DataFrame(
            {"value": values},
            index=pd.MultiIndex.from_tuples(index, names=["metric", "class"]),
        )
        return frame.to_string() + "\n"

    def to_dict(self):
        """Nested metric -> class -> {mean, std, folds} document."""
        document = {
            "classes": self.classes,
            "accuracy": {
                "mean": self.accuracy,
                "std": self.accuracy_std,
                "folds": [fold.accuracy for fold in self.folds],
            },
            "undefined": [list(entry) for entry in self.undefined],
        }
        for metric in METRICS:
            document[metric] = {
                row: {
                    "mean": _json_number(self.table.loc[row, metric]),
                    "std": _json_number(self.std.loc[row, metric]),
                    "folds": [_json_number(f.table.loc[row, metric]) for f in self.folds],
                }
                for row in self.table.index
            }
        return document

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _json_number(value):
    value = float(value)
    return None if np.isnan(value) else value


def _safe_ratio(numerator, denominator):
    return (numerator / denominator, False) if denominator > 0 else (0.0, True)


def per_class_metrics(cm):
    """One-vs-rest sensitivity, specificity, precision and F1 per class.

    AUC columns are NaN; evaluate_predictions fills them from scores.

    Parameters
    ----------
    cm : ConfusionMatrix

    Returns
    -------
    MetricsReport

    Raises
    ------
    EmptyMatrix
        if the matrix counts no samples
    """
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix counts no samples")
    names = class_names(cm.n_classes)
    rows = {}
    undefined = []
    for k, name in enumerate(names):
        tp = counts[k, k]
        fn = counts[k].sum() - tp
        fp = counts[:, k].sum() - tp
        tn = total - tp - fn - fp
        values = {}
        values["sensitivity"], flag_sens = _safe_ratio(tp, tp + fn)
        values["specificity"], flag_spec = _safe_ratio(tn, tn + fp)
        values["precision"], flag_prec = _safe_ratio(tp, tp + fp)
        values["f1"], flag_f1 = _safe_ratio(
            2 * values["precision"] * values["sensitivity"],
            values["precision"] + values["sensitivity"],
        )
        for metric, flag in (
            ("sensitivity", flag_sens),
            ("specificity", flag_spec),
            ("precision", flag_prec),
            ("f1", flag_f1 or flag_sens or flag_prec),
        ):
            if flag:
                undefined.append((metric, name))
        rows[name] = {metric: 100.0 * value for metric, value in values.items()}
        rows[name]["auc"] = np.nan
    table = pd.DataFrame.from_dict(rows, orient="index", columns=list(METRICS))
    support = cm.support
    table.loc["macro avg"] = table.loc[names].mean()
    table.loc["weighted avg"] = (table.loc[names].mul(support, axis=0)).sum() / total
    table.loc[list(AVERAGES), "auc"] = np.nan
    accuracy = 100.0 * np.trace(counts) / total
    for metric, name in undefined:
        logger.debug(f"{metric} of {name} is undefined (zero denominator), reported as 0")
    return MetricsReport(table, accuracy, support, undefined, confusion=cm)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points from (0, 0) to (1, 1) and the trapezoidal AUC."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _check_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} score rows but {len(labels)} labels")
    if scores.ndim == 2:
        deviation = np.abs(scores.sum(axis=1) - 1.0)
        if len(scores) and (np.any(deviation > 1e-6) or np.any(scores < 0)):
            raise NotNormalized("score rows must be probabilities summing to 1")
    return scores, labels


def roc_auc(scores, labels, c=1):
    """One-vs-rest ROC curve and AUC of class c.

    Parameters
    ----------
    scores : array-like
        (n, N) class probabilities, or (n,) scores for class c
    labels : array-like of int
        true class per sample
    c : int, defaults to 1
        the positive class

    Returns
    -------
    RocCurve
        thresholds at every distinct score, ties grouped

    Raises
    ------
    SingleClassOnly
        if class c has no positives or no negatives
    """
    scores, labels = _check_scores(scores, labels)
    if scores.ndim == 2:
        scores = scores[:, c]
    positive = labels == c
    if positive.all() or not positive.any():
        raise SingleClassOnly(f"class {c} needs both positive and negative samples")
    fpr, tpr, thresholds = roc_curve(positive, scores, drop_intermediate=False)
    return RocCurve(fpr, tpr, thresholds, float(auc(fpr, tpr)))


def macro_roc(curves):
    """Mean TPR over the union FPR grid of several curves."""
    curves = list(curves)
    grid = np.unique(np.concatenate([curve.fpr for curve in curves]))
    tpr = np.mean([np.interp(grid, curve.fpr, curve.tpr) for curve in curves], axis=0)
    thresholds = np.full(len(grid), np.nan)
    return RocCurve(grid, tpr, thresholds, float(auc(grid, tpr)))


def evaluate_predictions(probabilities, labels, n_classes):
    """Full single-fold report from class probabilities.

    Returns
    -------
    MetricsReport
        with AUC columns filled and ``curves`` holding one RocCurve per
        class plus "macro"
    """
    probabilities, labels = _check_scores(probabilities, labels)
    predictions = probabilities.argmax(axis=1) if len(probabilities) else np.zeros(0, int)
    report = per_class_metrics(confusion(predictions, labels, n_classes))
    names = class_names(n_classes)
    curves = {}
    for k, name in enumerate(names):
        try:
            curves[name] = roc_auc(probabilities, labels, k)
        except SingleClassOnly:
            report.undefined.append(("auc", name))
            logger.warning(f"AUC of {name} is undefined: the class is absent or alone")
            continue
        report.table.loc[name, "auc"] = curves[name].auc
    if curves:
        defined = [n for n in names if n in curves]
        support = report.support[[names.index(n) for n in defined]]
        aucs = report.table.loc[defined, "auc"]
        report.table.loc["macro avg", "auc"] = aucs.mean()
        report.table.loc["weighted avg", "auc"] = (aucs * support).sum() / support.sum()
        curves["macro"] = macro_roc(curves[n] for n in defined)
    report.curves = curves
    report.undefined = sorted(set(report.undefined))
    return report


def aggregate(fold_reports):
    """Across-fold mean and population std of every metric.

    Raises
    ------
    InconsistentReports
        if there are no reports or their class sets differ
    """
    fold_reports = list(fold_reports)
    if not fold_reports:
        raise InconsistentReports("no fold reports to aggregate")
    classes = fold_reports[0].classes
    for report in fold_reports[1:]:
        if report.classes != classes:
            raise InconsistentReports(f"class sets differ: {classes} vs {report.classes}")
    stacked = np.stack([report.table.to_numpy(dtype=float) for report in fold_reports])
    template = fold_reports[0].table
    # a metric undefined in some folds (NaN AUC) averages over the others
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = pd.DataFrame(np.nanmean(stacked, axis=0), index=template.index, columns=template.columns)
        std = pd.DataFrame(np.nanstd(stacked, axis=0), index=template.index, columns=template.columns)
    accuracies = np.array([report.accuracy for report in fold_reports])
    undefined = {entry for report in fold_reports for entry in report.undefined}
    return MetricsReport(
        mean,
        accuracies.mean(),
        np.sum([report.support for report in fold_reports], axis=0),
        undefined,
        std=std,
        accuracy_std=accuracies.std(),
        folds=fold_reports,
    )


def roc_frame(curves_by_fold):
    """ROC points as a fold,class,threshold,fpr,tpr table.

    Parameters
    ----------
    curves_by_fold : dict
        fold -> {class name -> RocCurve}
    """
    frames = []
    for fold, curves in curves_by_fold.items():
        for name, curve in curves.items():
            frames.append(
                pd.DataFrame(
                    {
                        "fold": fold,
                        "class": name,
                        "threshold": curve.thresholds,
                        "fpr": curve.fpr,
                        "tpr": curve.tpr,
                    }
                )
            )
    if not frames:
        return pd.DataFrame(columns=["fold", "class", "threshold", "fpr", "tpr"])
    return pd.concat(frames, ignore_index=True)
