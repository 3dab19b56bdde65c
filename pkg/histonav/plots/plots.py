from abc import ABC, abstractmethod
import math

import matplotlib.pyplot as plt
import pandas as pd

MAX_COLUMNS = 5


def grid_shape(panels, rows=None, cols=None):
    """(rows, columns) of a panel grid.

    A missing dimension is derived from the other; with neither given,
    panels fill one row up to MAX_COLUMNS wide and then wrap.
    """
    if rows is not None and cols is not None:
        return rows, cols
    if rows is not None:
        return rows, math.ceil(panels / rows)
    if cols is not None:
        return math.ceil(panels / cols), cols
    cols = min(max(panels, 1), MAX_COLUMNS)
    return math.ceil(max(panels, 1) / cols), cols


class Plot(ABC):
    """Base class of histonav figures: a grid of panels filled one per
    ``plot_data`` call.

    Subclasses append the numbers they draw to ``records`` so that
    ``save_data`` can write them as a CSV beside the figure.

    Parameters
    ----------
    num_samples : int
        panels in the grid
    rows, cols : int, optional
        grid dimensions, see grid_shape
    **kwargs
        passed on to matplotlib.pyplot.subplots

    Attributes
    ----------
    fig : matplotlib.figure.Figure
    axes : numpy.ndarray of matplotlib.axes.Axes
        always two-dimensional
    i : int
        index of the next panel to fill
    records : list of pandas.DataFrame
    """

    def __init__(self, num_samples, rows=None, cols=None, **kwargs):
        self.length = num_samples
        self.rows, self.columns = grid_shape(num_samples, rows, cols)
        self.fig, self.axes = plt.subplots(self.rows, self.columns, squeeze=False, **kwargs)
        self.i = 0
        self.records = []

    def get_ax(self, i=None):
        """Axes of panel i, row-major; the next unfilled panel by default."""
        index = self.i if i is None else i
        row, column = divmod(index, self.columns)
        return self.axes[row, column]

    @abstractmethod
    def plot_data(self, *args, **kwargs):
        """Draw one panel and advance ``i``."""

    def hide_unused(self):
        """Blank the panels past the last filled one."""
        for i in range(self.i, self.rows * self.columns):
            self.get_ax(i).set_axis_off()

    def set_figure_size(self, width_ax_in=3.0, height_ax_in=3.0, width_gap_in=0.8, height_gap_in=0.9):
        """Resize the figure to fixed panel dimensions in inches."""
        self.fig.set_size_inches(
            self.columns * width_ax_in + (self.columns + 1) * width_gap_in,
            self.rows * height_ax_in + (self.rows + 1) * height_gap_in,
        )
        self.fig.tight_layout()

    def to_frame(self):
        """Everything drawn so far as one table."""
        if not self.records:
            return pd.DataFrame()
        return pd.concat(self.records, ignore_index=True)

    def save(self, filename, **kwargs):
        """Write the figure; the extension (svg, pdf, png) picks the format.

        SVG and PDF files carry no creation date, so reruns are
        byte-identical.
        """
        if str(filename).endswith((".svg", ".pdf")):
            kwargs.setdefault("metadata", {"Date": None})
        self.fig.savefig(filename, **kwargs)

    def save_data(self, filename):
        """Write ``to_frame()`` as CSV."""
        self.to_frame().to_csv(filename, index=False, float_format="%.6g", lineterminator="\n")

    def close(self):
        plt.close(self.fig)
