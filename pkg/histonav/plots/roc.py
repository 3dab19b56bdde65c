from histonav import styles
from histonav.analysis.metrics import roc_frame
from histonav.plots.plots import Plot


class ROC(Plot):
    """Plot one-vs-rest ROC curves per class and their macro average.

    Parameters
    ----------
    num_samples : int
        Number of folds to plot.
    **kwargs
        Keyword arguments passed to `histonav.plots.Plot`.

    Attributes
    ----------
    fig : matplotlib.figure.Figure
        Figure object.
    axes : numpy.ndarray of matplotlib.axes.Axes
        Array of axes objects, one per fold.
    i : int
        Index of the current plot.
    """

    def plot_data(self, curves, label=None):
        """Add one fold's curves.

        Parameters
        ----------
        curves : dict
            class name -> histonav.analysis.RocCurve, plus "macro"
        label : str, optional
            panel title, defaults to "fold {i}"
        """
        if label is None:
            label = f"fold {self.i}"
        ax = self.get_ax()
        ax.plot([0, 1], [0, 1], **styles.settings["roc"]["chance"])
        k = 0
        for name, curve in curves.items():
            if name == "macro":
                style = styles.settings["roc"]["macro"]
            else:
                style = styles.settings["roc"]["classes"] | {"color": styles.get_class_color(k)}
                k += 1
            ax.plot(curve.fpr, curve.tpr, label=f"{name}: {curve.auc:.2f}", **style)
        ax.set(
            title=label,
            xlabel="False Positive Rate",
            ylabel="True Positive Rate",
            aspect="equal",
            xlim=(0, 1),
            ylim=(0, 1.02),
        )
        ax.legend(title="AUC", loc=4, fontsize="small")
        self.records.append(roc_frame({label: curves}))
        self.i += 1
