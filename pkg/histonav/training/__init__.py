"""Optimization, cross-validation and the training loop."""

from histonav.training.optim import (
    ScheduleConfig,
    cosine_lr,
    AdamState,
    adam_step,
    early_stop,
)
from histonav.training.cv import (
    FoldSplit,
    TrainConfig,
    EpochLog,
    FoldResult,
    stratified_kfold,
    holdout_split,
    plan_split,
    class_weights,
    weighted_sample,
    balanced_shares,
    run_fold,
    run_experiment,
    evaluate_fold,
    pretrain_extractor,
    logs_to_records,
)

__all__ = [
    # from optim
    "ScheduleConfig",
    "cosine_lr",
    "AdamState",
    "adam_step",
    "early_stop",
    # from cv
    "FoldSplit",
    "TrainConfig",
    "EpochLog",
    "FoldResult",
    "stratified_kfold",
    "holdout_split",
    "class_weights",
    "weighted_sample",
    "balanced_shares",
    "plan_split",
    "run_fold",
    "run_experiment",
    "evaluate_fold",
    "pretrain_extractor",
    "logs_to_records",
]
