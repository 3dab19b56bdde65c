from histonav.plots.plots import Plot
from histonav.plots.curves import TrainingCurves
from histonav.plots.heatmap import ConfusionHeatmap
from histonav.plots.roc import ROC

__all__ = [
    "Plot",
    "TrainingCurves",
    "ConfusionHeatmap",
    "ROC",
]
