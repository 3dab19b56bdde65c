from histonav.analysis.metrics import (
    METRICS,
    class_names,
    format_mean_std,
    ConfusionMatrix,
    confusion,
    MetricsReport,
    per_class_metrics,
    RocCurve,
    roc_auc,
    macro_roc,
    evaluate_predictions,
    aggregate,
    roc_frame,
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
