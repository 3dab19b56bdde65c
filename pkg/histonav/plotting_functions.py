"""Contains the histonav convenience plotting functions"""

from histonav import plots
from histonav.errors import InvalidArgument

__all__ = [
    "plot_training_curves",
    "plot_confusion",
    "plot_roc",
]


def _labels(labels, count):
    if labels is None:
        return [f"fold {i}" for i in range(count)]
    if len(labels) != count:
        raise InvalidArgument(f"{len(labels)} labels for {count} panels")
    return list(labels)


def plot_training_curves(logs, labels=None, plot_kwargs=None):
    """Plots loss and accuracy per epoch, training and validation, per fold.

    Parameters
    ----------
    logs : list of pandas.DataFrame
        one epoch log per fold (fold,epoch,lr,train_loss,train_acc,val_loss,val_acc)
    labels : list of str, defaults to "fold {i}"
        panel titles
    plot_kwargs : dict, defaults to {}
        Keyword-arguments passed to matplotlib.pyplot.subplots

    Returns
    -------
    histonav.plots.TrainingCurves
        object containing matplotlib figure and axes with additional plotting and
        file saving methods
    """
    labels = _labels(labels, len(logs))
    plot = plots.TrainingCurves(len(logs), **(plot_kwargs or {}))
    for log, label in zip(logs, labels):
        plot.plot_data(log, label)
    plot.set_figure_size(width_ax_in=2.6, height_ax_in=2.0)
    return plot


def plot_confusion(reports, labels=None, plot_kwargs=None):
    """Plots one confusion-matrix heatmap per fold report.

    Parameters
    ----------
    reports : list of histonav.analysis.MetricsReport
        single-fold reports holding a confusion matrix
    labels : list of str, defaults to "fold {i}"
        panel titles
    plot_kwargs : dict, defaults to {}
        Keyword-arguments passed to matplotlib.pyplot.subplots

    Returns
    -------
    histonav.plots.ConfusionHeatmap
    """
    labels = _labels(labels, len(reports))
    plot = plots.ConfusionHeatmap(len(reports), **(plot_kwargs or {}))
    for report, label in zip(reports, labels):
        plot.plot_data(report.confusion, label, report.classes)
    plot.hide_unused()
    plot.set_figure_size(width_ax_in=2.4, height_ax_in=2.4)
    return plot


def plot_roc(reports, labels=None, plot_kwargs=None):
    """Plots one-vs-rest ROC curves of every class and their macro average,
    one panel per fold report.

    Parameters
    ----------
    reports : list of histonav.analysis.MetricsReport
        single-fold reports from evaluate_predictions
    labels : list of str, defaults to "fold {i}"
        panel titles
    plot_kwargs : dict, defaults to {}
        Keyword-arguments passed to matplotlib.pyplot.subplots

    Returns
    -------
    histonav.plots.ROC
    """
    labels = _labels(labels, len(reports))
    plot = plots.ROC(len(reports), **(plot_kwargs or {}))
    for report, label in zip(reports, labels):
        plot.plot_data(report.curves, label)
    plot.hide_unused()
    plot.set_figure_size(width_ax_in=2.8, height_ax_in=2.8)
    return plot
