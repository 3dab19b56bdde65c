import pandas as pd

from histonav import styles
from histonav.plots.plots import Plot


class TrainingCurves(Plot):
    """Plot per-epoch loss and accuracy of every fold.

    One column per fold: loss on top, accuracy below, training lines solid
    and validation lines dashed.

    Parameters
    ----------
    num_samples : int
        Number of folds to plot.
    **kwargs
        Keyword arguments passed to `histonav.plots.Plot`.
    """

    def __init__(self, num_samples, **kwargs):
        super().__init__(num_samples, rows=2, cols=max(num_samples, 1), **kwargs)

    def plot_data(self, logs, label=None):
        """Add one fold's curves.

        Parameters
        ----------
        logs : pandas.DataFrame
            epoch log with epoch, train_loss, val_loss, train_acc, val_acc
        label : str, optional
            panel title, defaults to "fold {i}"
        """
        logs = pd.DataFrame(logs)
        if label is None:
            label = f"fold {self.i}"
        loss_ax = self.axes[0, self.i]
        acc_ax = self.axes[1, self.i]
        for split in ("train", "val"):
            style = styles.settings["curves"][split]
            loss_ax.plot(logs["epoch"], logs[f"{split}_loss"], label=split, **style)
            acc_ax.plot(logs["epoch"], logs[f"{split}_acc"], label=split, **style)
        loss_ax.set(title=label, ylabel="loss")
        acc_ax.set(xlabel="epoch", ylabel="accuracy")
        if self.i == 0:
            loss_ax.legend(loc="upper right")
        self.records.append(logs)
        self.i += 1
