"""Stratified cross-validation, weighted sampling and the per-fold training loop.

One experiment carves a stratified test split off the labeled patches, splits
the remainder into k stratified folds, trains one model per fold and scores
every fold model on the shared test split.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from histonav.analysis.metrics import aggregate, evaluate_predictions
from histonav.data.dataset import to_inputs
from histonav.data.patches import AugmentPolicy
from histonav.engine import Tensor, backward, cross_entropy
from histonav.errors import BadK, ConfigError, InvalidArgument, NumericalError, TooFewSamples, ZeroCount
from histonav.models.builder import Model, build_hybrid
from histonav.training.optim import AdamState, ScheduleConfig, adam_step, cosine_lr, early_stop

__all__ = [
    "FoldSplit",
    "TrainConfig",
    "EpochLog",
    "FoldResult",
    "stratified_kfold",
    "holdout_split",
    "plan_split",
    "class_weights",
    "weighted_sample",
    "balanced_shares",
    "run_fold",
    "evaluate_fold",
    "run_experiment",
    "pretrain_extractor",
    "logs_to_records",
]

logger = logging.getLogger(__name__)


@dataclass
class FoldSplit:
    """k (train, validation) index pairs.

    Validation sets are pairwise disjoint and cover every index once.
    """

    folds: list

    @property
    def k(self):
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __getitem__(self, fold):
        return self.folds[fold]

    def assignments(self, size=None):
        """Validation fold of every index (-1 where unassigned)."""
        if size is None:
            size = sum(len(val) for _, val in self.folds)
        assigned = np.full(size, -1, dtype=int)
        for fold, (_, val) in enumerate(self.folds):
            assigned[val] = fold
        return assigned

    @classmethod
    def from_assignments(cls, assigned):
        """Inverse of assignments(): indices with fold -1 are left out."""
        assigned = np.asarray(assigned, dtype=int)
        pool = np.flatnonzero(assigned >= 0)
        folds = []
        for fold in range(assigned.max() + 1 if len(pool) else 0):
            val = np.flatnonzero(assigned == fold)
            folds.append((np.setdiff1d(pool, val), val))
        return cls(folds)


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol settings.

    Parameters
    ----------
    batch_size : int, defaults to 64
    schedule : ScheduleConfig
        learning-rate schedule and maximum epochs
    beta1, beta2, epsilon : float
        Adam settings
    patience : int, defaults to 10
        early-stopping patience in epochs
    restore_best : bool, defaults to True
        reload the parameters of the lowest validation loss after training
    seed : int, defaults to 0
    augment : AugmentPolicy
        dynamic augmentation policy
    test_fraction : float, defaults to 0.1
        stratified held-out test share
    k : int, defaults to 5
        number of folds
    workers : int, defaults to 1
        threads for batch augmentation; results do not depend on it
    """

    batch_size: int = 64
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 10
    restore_best: bool = True
    seed: int = 0
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    test_fraction: float = 0.1
    k: int = 5
    workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.epsilon <= 0:
            raise ConfigError("Adam betas must lie in [0, 1) and epsilon must be positive")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.k < 2:
            raise BadK(f"k must be >= 2, got {self.k}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def total_epochs(self):
        return self.schedule.total_epochs


@dataclass(frozen=True)
class EpochLog:
    fold: int
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class FoldResult:
    """A trained fold model and its epoch logs."""

    fold: int
    model: Model
    logs: list
    best_epoch: int


def stratified_kfold(labels, k=5, seed=0):
    """Split indices into k folds with per-class counts balanced within 1.

    Raises
    ------
    BadK
        if k < 2
    TooFewSamples
        if a class has fewer than k members
    """
    if k < 2:
        raise BadK(f"k must be >= 2, got {k}")
    labels = np.asarray(labels, dtype=int)
    classes, counts = np.unique(labels, return_counts=True)
    if len(labels) == 0 or counts.min() < k:
        small = {int(c): int(n) for c, n in zip(classes, counts) if n < k}
        raise TooFewSamples(f"every class needs >= {k} members, got {small or 'no samples'}")
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    folds = [(train, val) for train, val in splitter.split(np.zeros(len(labels)), labels)]
    return FoldSplit(folds)


def holdout_split(labels, fraction=0.1, seed=0):
    """Stratified (train, test) index split, both sorted.

    Raises
    ------
    TooFewSamples
        if a class is too small to appear on both sides
    """
    labels = np.asarray(labels, dtype=int)
    indices = np.arange(len(labels))
    try:
        train, test = train_test_split(
            indices, test_size=fraction, stratify=labels, random_state=seed
        )
    except ValueError as exception:
        raise TooFewSamples(f"cannot carve a stratified {fraction:.0%} test split: {exception}") from exception
    return np.sort(train), np.sort(test)


def plan_split(labels, test_fraction=0.1, k=5, seed=0):
    """Held-out test indices and a FoldSplit of the rest, in global indices."""
    pool, test = holdout_split(labels, test_fraction, seed)
    local = stratified_kfold(np.asarray(labels)[pool], k, seed)
    folds = [(pool[train], pool[val]) for train, val in local]
    return test, FoldSplit(folds)


def class_weights(counts):
    """Inverse-frequency class weights, normalized to sum to 1.

    Raises
    ------
    ZeroCount
        if a count is not positive
    """
    counts = np.asarray(counts, dtype=np.float64)
    if len(counts) == 0 or np.any(counts <= 0):
        raise ZeroCount(f"every class count must be positive, got {counts.tolist()}")
    weights = 1.0 / counts
    return weights / weights.sum()


def weighted_sample(weights, index_by_class, n_draws, seed):
    """Draw indices with replacement, classes in proportion to their weights.

    Each draw first picks class c with probability weights[c] / sum(weights),
    then one index of that class uniformly, both from one seeded generator.
    The expected share of class c is therefore weights[c], normalized,
    whatever the class sizes.

    Parameters
    ----------
    weights : array-like or dict
        non-negative weight per class
    index_by_class : dict or list
        class -> indices of that class
    n_draws : int
        number of draws
    seed : int or sequence of int
        generator seed

    Returns
    -------
    numpy.ndarray of int

    Raises
    ------
    InvalidArgument
        if n_draws < 1, a weight is negative or missing, all weights are
        zero, or a class with positive weight has no indices
    """
    if n_draws < 1:
        raise InvalidArgument(f"n_draws must be >= 1, got {n_draws}")
    if not isinstance(index_by_class, dict):
        index_by_class = dict(enumerate(index_by_class))
    labels = list(index_by_class)
    try:
        p = np.array([weights[label] for label in labels], dtype=np.float64)
    except (KeyError, IndexError) as exception:
        raise InvalidArgument(f"no weight for class {exception}") from exception
    if np.any(p < 0) or not np.isfinite(p).all() or p.sum() <= 0:
        raise InvalidArgument(f"weights must be finite, non-negative and not all zero, got {p.tolist()}")
    pools = [np.asarray(index_by_class[label], dtype=int) for label in labels]
    empty = [label for label, pool, w in zip(labels, pools, p) if len(pool) == 0 and w > 0]
    if empty:
        raise InvalidArgument(f"classes {empty} have weight but no indices")
    rng = np.random.default_rng(seed)
    classes = rng.choice(len(labels), size=n_draws, p=p / p.sum())
    draws = np.empty(n_draws, dtype=int)
    for k, pool in enumerate(pools):
        chosen = classes == k
        if chosen.any():
            draws[chosen] = pool[rng.integers(len(pool), size=int(chosen.sum()))]
    return draws


def balanced_shares(counts):
    """Class shares that sample every class equally often.

    Inverse-frequency weights assigned per sample, scaled back to class
    totals: ``class_weights(counts) * counts``, normalized.
    """
    counts = np.asarray(counts, dtype=np.float64)
    shares = class_weights(counts) * counts
    return shares / shares.sum()


def _one_hot(labels, n_classes):
    return np.eye(n_classes)[labels]


def _evaluate_loss(model, data, indices, batch_size):
    images = to_inputs(data.images[indices])
    labels = data.labels[indices]
    probabilities = model.predict(images, batch_size)
    one_hot = _one_hot(labels, model.spec.num_classes)
    loss = float(cross_entropy(Tensor(probabilities), one_hot).values)
    accuracy = float(np.mean(probabilities.argmax(axis=1) == labels))
    return loss, accuracy


def run_fold(spec, train_indices, val_indices, data, cfg, fold=0, pretrained=None):
    """Train one model on a fold.

    Each epoch draws len(train_indices) class-balanced samples (see
    balanced_shares), augments them and takes one Adam step per batch at
    the epoch's cosine learning rate.
    Training stops after the schedule's last epoch or on early stopping.

    Parameters
    ----------
    spec : ModelSpec
        the model to build and train
    train_indices, val_indices : array-like of int
        dataset indices of this fold
    data : PatchDataset
        the patches
    cfg : TrainConfig
        the protocol
    fold : int, defaults to 0
        fold number, mixed into every random draw
    pretrained : dict, optional
        extractor parameter values loaded before training

    Returns
    -------
    FoldResult

    Raises
    ------
    NumericalError
        if a loss becomes non-finite
    """
    train_indices = np.asarray(train_indices, dtype=int)
    val_indices = np.asarray(val_indices, dtype=int)
    if len(train_indices) == 0 or len(val_indices) == 0:
        raise TooFewSamples("a fold needs training and validation samples")
    model = Model(spec, seed=cfg.seed)
    if pretrained is not None:
        model.load_state(pretrained, prefix="extractor.")
    state = AdamState(cfg.beta1, cfg.beta2, cfg.epsilon)
    trainable = model.trainable_params()
    train_labels = data.labels[train_indices]
    present = np.unique(train_labels)
    counts = np.array([np.sum(train_labels == c) for c in present])
    weights = dict(zip(present.tolist(), balanced_shares(counts)))
    index_by_class = {c: train_indices[train_labels == c] for c in present.tolist()}
    policy = AugmentPolicy(
        cfg.augment.allow_hflip, cfg.augment.allow_vflip, cfg.augment.allow_rot90, cfg.seed
    )

    logs = []
    val_losses = []
    best_state, best_epoch = model.state_dict(), 0
    for epoch in range(cfg.total_epochs):
        lr = cosine_lr(epoch, cfg.schedule)
        draws = weighted_sample(weights, index_by_class, len(train_indices), [cfg.seed, fold, epoch])
        total_loss = 0.0
        correct = 0
        for start in range(0, len(draws), cfg.batch_size):
            inputs, labels = data.batch(draws[start : start + cfg.batch_size], epoch, policy, cfg.workers)
            model.zero_grad()
            probabilities = model.forward(inputs)
            loss = cross_entropy(probabilities, _one_hot(labels, spec.num_classes))
            value = float(loss.values)
            if not np.isfinite(value):
                raise NumericalError(f"fold {fold} epoch {epoch}: training loss is {value}")
            backward(loss)
            grads = {key: model.parameters[key].grad for key in trainable}
            adam_step(state, model.parameters, grads, lr)
            total_loss += value * len(labels)
            correct += int(np.sum(probabilities.values.argmax(axis=1) == labels))
        val_loss, val_acc = _evaluate_loss(model, data, val_indices, cfg.batch_size)
        if not np.isfinite(val_loss):
            raise NumericalError(f"fold {fold} epoch {epoch}: validation loss is {val_loss}")
        log = EpochLog(fold, epoch, lr, total_loss / len(draws), correct / len(draws), val_loss, val_acc)
        logs.append(log)
        logger.info(
            f"fold {fold} epoch {epoch}: lr {lr:.2e} train loss {log.train_loss:.4f} "
            f"acc {log.train_acc:.3f} | val loss {val_loss:.4f} acc {val_acc:.3f}"
        )
        val_losses.append(val_loss)
        if val_loss < min(val_losses[:-1], default=np.inf):
            best_state, best_epoch = model.state_dict(), epoch
        if early_stop(val_losses, cfg.patience):
            logger.info(f"fold {fold}: early stop at epoch {epoch}, best epoch {best_epoch}")
            break
    if cfg.restore_best:
        model.load_state(best_state)
    return FoldResult(fold, model, logs, best_epoch)


def evaluate_fold(model, data, indices, batch_size=64):
    """Score a model on dataset indices.

    Returns
    -------
    report : MetricsReport
        single-fold report with ROC curves
    probabilities : numpy.ndarray
        (n, num_classes) predicted probabilities
    """
    indices = np.asarray(indices, dtype=int)
    probabilities = model.predict(to_inputs(data.images[indices]), batch_size)
    report = evaluate_predictions(probabilities, data.labels[indices], model.spec.num_classes)
    return report, probabilities


def run_experiment(spec, data, cfg, pretrained=None, plan=None, on_fold=None):
    """k-fold training with evaluation on a shared held-out test split.

    Parameters
    ----------
    spec : ModelSpec
    data : PatchDataset
    cfg : TrainConfig
    pretrained : dict, optional
        extractor parameters loaded into every fold model
    plan : (test_indices, FoldSplit), optional
        defaults to plan_split(data.labels, cfg.test_fraction, cfg.k, cfg.seed)
    on_fold : callable, optional
        called as on_fold(result, report, probabilities, test_indices)
        after each fold

    Returns
    -------
    MetricsReport
        across-fold aggregate; ``folds`` holds the fold reports
    """
    if plan is None:
        plan = plan_split(data.labels, cfg.test_fraction, cfg.k, cfg.seed)
    test_indices, split = plan
    reports = []
    for fold, (train, val) in enumerate(split):
        logger.info(f"fold {fold}: {len(train)} train, {len(val)} validation, {len(test_indices)} test")
        result = run_fold(spec, train, val, data, cfg, fold, pretrained)
        report, probabilities = evaluate_fold(result.model, data, test_indices, cfg.batch_size)
        logger.info(f"fold {fold}: test accuracy {report.accuracy:.2f}%")
        if on_fold is not None:
            on_fold(result, report, probabilities, test_indices)
        reports.append(report)
    return aggregate(reports)


def pretrain_extractor(extractor, data, cfg, input_shape, val_fraction=0.2):
    """Train a fully trainable model on a source task; return its extractor.

    Parameters
    ----------
    extractor : list of LayerSpec or preset name
    data : PatchDataset
        source-task patches
    cfg : TrainConfig
    input_shape : tuple of int
        (C, H, W)
    val_fraction : float, defaults to 0.2
        stratified validation share for early stopping

    Returns
    -------
    dict
        "extractor.*" parameter id -> values
    """
    spec = build_hybrid(extractor, 0, [data.num_classes], data.num_classes, input_shape)
    train, val = holdout_split(data.labels, val_fraction, cfg.seed)
    result = run_fold(spec, train, val, data, cfg, fold=0)
    state = result.model.state_dict()
    logger.info(f"pretrained extractor: source validation acc {result.logs[result.best_epoch].val_acc:.3f}")
    return {key: values for key, values in state.items() if key.startswith("extractor.")}


def logs_to_records(logs):
    """EpochLogs as dicts in fold,epoch,lr,train_loss,train_acc,val_loss,val_acc order."""
    return [asdict(log) for log in logs]
