import numpy as np
import pandas as pd
import seaborn as sns

from histonav import styles
from histonav.analysis.metrics import class_names
from histonav.plots.plots import Plot


class ConfusionHeatmap(Plot):
    """Plot confusion matrices as annotated heatmaps, one panel per fold.

    Parameters
    ----------
    num_samples : int
        Number of matrices to plot.
    **kwargs
        Keyword arguments passed to `histonav.plots.Plot`.
    """

    def plot_data(self, counts, label=None, names=None):
        """Add one confusion matrix.

        Parameters
        ----------
        counts : histonav.analysis.ConfusionMatrix or array-like
            rows are true classes, columns are predictions
        label : str, optional
            panel title, defaults to "fold {i}"
        names : list of str, optional
            class names, defaults to "Type0".."TypeN-1"
        """
        counts = np.asarray(getattr(counts, "counts", counts), dtype=int)
        names = names or class_names(len(counts))
        if label is None:
            label = f"fold {self.i}"
        ax = self.get_ax()
        sns.heatmap(
            pd.DataFrame(counts, index=names, columns=names),
            ax=ax,
            **styles.settings["heatmap"],
        )
        ax.set(title=label, xlabel="predicted", ylabel="true")
        true, pred = np.meshgrid(names, names, indexing="ij")
        self.records.append(
            pd.DataFrame(
                {
                    "fold": label,
                    "true": true.ravel(),
                    "pred": pred.ravel(),
                    "count": counts.ravel(),
                }
            )
        )
        self.i += 1
