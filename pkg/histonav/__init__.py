"""histonav

Histopathology patch classification toolset

Tiles stained slides into quality-controlled patches, normalizes their
stains, trains transfer-learned CNN classifiers under stratified
cross-validation and reports per-class metrics.
"""

from histonav.config import ExperimentConfig, load_config
from histonav.workflows import (
    synth,
    tile_slides,
    normalize_patches,
    split_manifest,
    train,
    evaluate,
    report,
    predict,
    run,
)
from histonav.plotting_functions import (
    plot_training_curves,
    plot_confusion,
    plot_roc,
)
from histonav import analysis
from histonav import data
from histonav import engine
from histonav import models
from histonav import plots
from histonav import styles
from histonav import training

__version__ = "1.0.0"

__all__ = [
    "ExperimentConfig",
    "load_config",
    # workflow steps
    "synth",
    "tile_slides",
    "normalize_patches",
    "split_manifest",
    "train",
    "evaluate",
    "report",
    "predict",
    "run",
    # plotting functions
    "plot_training_curves",
    "plot_confusion",
    "plot_roc",
    # modules
    "analysis",
    "data",
    "engine",
    "models",
    "plots",
    "styles",
    "training",
]
