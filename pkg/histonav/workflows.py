"""The pipeline steps behind the command-line interface.

Every step reads from and writes to the configured output directory::

    slides/                   input slides, one subdirectory per class
    patches/                  tiled patches and manifest.csv
    normalized/               stain-normalized patches, manifest.csv, stain_log.csv
    split.csv                 fold of every accepted patch (-1: held-out test)
    logs/fold{k}.csv          epoch logs
    checkpoints/fold{k}.ckpt  fold models (and pretrained.ckpt)
    reports/                  metrics.txt, metrics.json, roc.csv, predictions_fold{k}.csv
    plots/                    SVG figures and the CSV data behind them

Steps overwrite their outputs; identical inputs give identical files.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from histonav.analysis.metrics import aggregate, evaluate_predictions, roc_frame
from histonav.data.checkpoint import read_checkpoint, write_checkpoint
from histonav.data.dataset import PatchDataset, to_inputs
from histonav.data.manifest import read_manifest, write_manifest
from histonav.data.patches import (
    apply_flip,
    balance_downsample,
    crop,
    load_image,
    plan_expansion,
    qc_accept,
    resize,
    save_image,
    tile,
    with_path,
)
from histonav.data.stain import ReferenceProfile, build_reference, normalize
from histonav.errors import (
    ArtifactMismatch,
    DataUnavailable,
    DegenerateStains,
    HistonavError,
    InsufficientTissue,
    SingularStains,
)
from histonav.examples import synthetic
from histonav.models.builder import Model, ModelSpec
from histonav.plotting_functions import plot_confusion, plot_roc, plot_training_curves
from histonav.training.cv import (
    FoldSplit,
    evaluate_fold,
    logs_to_records,
    plan_split,
    pretrain_extractor,
    run_experiment,
)

__all__ = [
    "Layout",
    "discover_slides",
    "synth",
    "tile_slides",
    "normalize_patches",
    "split_manifest",
    "train",
    "evaluate",
    "report",
    "predict",
    "run",
]

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


@dataclass(frozen=True)
class Layout:
    """File locations under an output directory."""

    root: str

    def _path(self, *parts):
        return os.path.join(self.root, *parts)

    @property
    def patches_dir(self):
        return self._path("patches")

    @property
    def patches_manifest(self):
        return self._path("patches", "manifest.csv")

    @property
    def normalized_dir(self):
        return self._path("normalized")

    @property
    def normalized_manifest(self):
        return self._path("normalized", "manifest.csv")

    @property
    def stain_log(self):
        return self._path("normalized", "stain_log.csv")

    @property
    def split(self):
        return self._path("split.csv")

    @property
    def pretrained(self):
        return self._path("checkpoints", "pretrained.ckpt")

    def fold_log(self, fold):
        return self._path("logs", f"fold{fold}.csv")

    def fold_checkpoint(self, fold):
        return self._path("checkpoints", f"fold{fold}.ckpt")

    def predictions(self, fold):
        return self._path("reports", f"predictions_fold{fold}.csv")

    def report(self, name):
        return self._path("reports", name)

    def plot(self, name):
        return self._path("plots", name)


def _makedirs(filename):
    os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)


def _write_csv(frame, filename, float_format="%.8g"):
    _makedirs(filename)
    frame.to_csv(filename, index=False, float_format=float_format, lineterminator="\n")


def _write_text(text, filename):
    _makedirs(filename)
    with open(filename, "w") as file:
        file.write(text)


def _stain_parameters(config):
    stain = config["stain"]
    return {
        "alpha": stain["alpha"],
        "beta": stain["beta"],
        "i0": stain["i0"],
        "min_pixels": stain["min_pixels"],
        "min_angle": stain["min_angle"],
    }


@dataclass(frozen=True)
class Slide:
    path: str
    slide_id: str
    label: int


def _image_files(directory):
    return sorted(
        name
        for name in os.listdir(directory)
        if name.lower().endswith(IMAGE_EXTENSIONS) and os.path.isfile(os.path.join(directory, name))
    )


def discover_slides(slides_dir, classes=None):
    """Find slides: files in class subdirectories get that class's label.

    Parameters
    ----------
    slides_dir : str
        directory of slide images
    classes : list of str, optional
        class subdirectory names in label order; defaults to all
        subdirectories, sorted

    Returns
    -------
    slides : list of Slide
        files directly in slides_dir first (label -1), then each class
    classes : list of str

    Raises
    ------
    DataUnavailable
        if slides_dir or a named class subdirectory does not exist
    """
    if not os.path.isdir(slides_dir):
        raise DataUnavailable(f"slide directory {slides_dir} does not exist")
    subdirectories = sorted(
        name for name in os.listdir(slides_dir) if os.path.isdir(os.path.join(slides_dir, name))
    )
    if classes is None:
        classes = subdirectories
    missing = [name for name in classes if name not in subdirectories]
    if missing:
        raise DataUnavailable(f"class directories {missing} not found in {slides_dir}")
    slides = []
    for name in _image_files(slides_dir):
        stem = os.path.splitext(name)[0]
        slides.append(Slide(os.path.join(slides_dir, name), stem, -1))
    for label, class_name in enumerate(classes):
        class_dir = os.path.join(slides_dir, class_name)
        for name in _image_files(class_dir):
            stem = os.path.splitext(name)[0]
            slides.append(Slide(os.path.join(class_dir, name), f"{class_name}-{stem}", label))
    return slides, list(classes)


def synth(config, slides_per_class=8, source_per_class=150):
    """Write the synthetic stained-texture corpus into the output directory.

    Returns
    -------
    slides_dir, source_manifest : str
    """
    return synthetic.write_corpus(
        config.output_dir,
        seed=config.seed,
        slides_per_class=slides_per_class,
        tile_size=config["tiling"]["size"],
        source_per_class=source_per_class,
    )


def _class_counts(value):
    """Per-class counts from a list or a JSON object with string keys."""
    if isinstance(value, dict):
        return {int(k): int(v) for k, v in value.items()}
    return dict(enumerate(int(v) for v in value))


def tile_slides(config):
    """Tile every slide, QC the tiles and write accepted patches + manifest.

    Optional class balancing runs on the accepted labeled patches:
    ``tiling.balance`` downsamples every class, ``tiling.targets`` then
    adds flipped copies up to per-class target counts.

    Returns
    -------
    str
        the manifest path

    Raises
    ------
    DataUnavailable
        if the slide directory is missing or a slide cannot be read
    """
    layout = Layout(config.output_dir)
    tiling = config["tiling"]
    slides_dir = config.path(config["data"]["slides"])
    slides, classes = discover_slides(slides_dir, config["data"]["classes"])
    os.makedirs(layout.patches_dir, exist_ok=True)
    if not slides:
        logger.warning(f"no slides found in {slides_dir}, writing an empty manifest")
        write_manifest([], layout.patches_manifest)
        return layout.patches_manifest
    logger.info(f"tiling {len(slides)} slides, classes {classes}")

    def survey(slide):
        records = []
        image = load_image(slide.path)
        for record in tile(image, tiling["size"], tiling["stride"], slide.slide_id, slide.label):
            accepted = qc_accept(record, tiling["mean_max"], tiling["std_min"])
            name = f"{record.slide_id}_{record.x}_{record.y}.png" if accepted else ""
            records.append(with_path(record, name, accepted))
        n_accepted = sum(r.accepted for r in records)
        logger.info(f"{slide.slide_id}: {n_accepted} accepted, {len(records) - n_accepted} rejected")
        return records

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        per_slide = list(executor.map(survey, slides))

    labeled = [r for records in per_slide for r in records if r.accepted and r.label >= 0]
    if tiling["balance"] and labeled:
        keep = set(balance_downsample(labeled, tiling["balance"], config.seed))
        per_slide = [
            [r if r.label < 0 or r in keep or not r.accepted else with_path(r, "", False) for r in records]
            for records in per_slide
        ]
        labeled = [r for r in labeled if r in keep]

    copies = {}
    if tiling["targets"] and labeled:
        for index, flip in plan_expansion(labeled, _class_counts(tiling["targets"]), config.seed):
            base = labeled[index]
            stem = os.path.splitext(base.output_path)[0]
            copies.setdefault(base.slide_id, []).append((with_path(base, f"{stem}_{flip}.png"), flip))

    def write(job):
        slide, records = job
        selected = [r for r in records if r.accepted]
        flipped = copies.get(slide.slide_id, [])
        if not selected and not flipped:
            return
        image = load_image(slide.path)
        for record in selected:
            save_image(os.path.join(layout.patches_dir, record.output_path), crop(image, record))
        for record, flip in flipped:
            patch = apply_flip(crop(image, record), flip)
            save_image(os.path.join(layout.patches_dir, record.output_path), patch)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        list(executor.map(write, zip(slides, per_slide)))

    records = [r for records in per_slide for r in records]
    records += [record for slide in slides for record, _ in copies.get(slide.slide_id, [])]
    n_accepted = sum(r.accepted for r in records)
    logger.info(f"{n_accepted} patches accepted of {len(records)} manifest rows")
    write_manifest(records, layout.patches_manifest)
    return layout.patches_manifest


def _reference(config, reference_from=None, layout=None):
    """The normalization target: promoted from a patch, a profile file or the default."""
    params = _stain_parameters(config)
    if reference_from is not None:
        reference = build_reference(load_image(reference_from), **params)
        if layout is not None:
            _makedirs(os.path.join(layout.normalized_dir, "reference.txt"))
            reference.write(os.path.join(layout.normalized_dir, "reference.txt"))
        logger.info(f"reference profile promoted from {reference_from}")
        return reference
    filename = config.path(config["stain"]["reference"])
    if filename is not None:
        return ReferenceProfile.read(filename)
    return ReferenceProfile.default()


def _normalize_or_flag(image, reference, params):
    """Normalized image, status and stain angles; failures return the input."""
    try:
        normalized, stains = normalize(image, reference, **params, return_stains=True)
    except InsufficientTissue:
        return image, "insufficient_tissue", (np.nan, np.nan, np.nan)
    except (DegenerateStains, SingularStains):
        return image, "degenerate_stains", (np.nan, np.nan, np.nan)
    h_angle, e_angle = stains.angles_to(reference.stains)
    return normalized, "ok", (float(h_angle), float(e_angle), stains.angle)


def normalize_patches(config, reference_from=None):
    """Stain-normalize every accepted tiled patch.

    Patches where stain estimation fails are copied unmodified and flagged
    in the stain log (``insufficient_tissue`` or ``degenerate_stains``).

    Parameters
    ----------
    config : ExperimentConfig
    reference_from : str, optional
        patch image promoted to the reference profile; the profile is
        written to normalized/reference.txt

    Returns
    -------
    str
        the normalized manifest path
    """
    layout = Layout(config.output_dir)
    if not os.path.isfile(layout.patches_manifest):
        raise DataUnavailable(f"{layout.patches_manifest} does not exist, run tile first")
    records = read_manifest(layout.patches_manifest)
    os.makedirs(layout.normalized_dir, exist_ok=True)
    reference = _reference(config, reference_from, layout)
    params = _stain_parameters(config)

    def process(record):
        if not record.accepted:
            return None
        image = load_image(os.path.join(layout.patches_dir, record.output_path))
        normalized, status, angles = _normalize_or_flag(image, reference, params)
        save_image(os.path.join(layout.normalized_dir, record.output_path), normalized)
        return {
            "path": record.output_path,
            "status": status,
            "h_angle": angles[0],
            "e_angle": angles[1],
            "stain_angle": angles[2],
        }

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        rows = [row for row in executor.map(process, records) if row is not None]
    log = pd.DataFrame(rows, columns=["path", "status", "h_angle", "e_angle", "stain_angle"])
    _write_csv(log, layout.stain_log, float_format="%.6f")
    flagged = log[log["status"] != "ok"]
    if len(flagged):
        logger.warning(
            f"{len(flagged)} of {len(log)} patches copied unnormalized: "
            f"{flagged['status'].value_counts().to_dict()}"
        )
    write_manifest(records, layout.normalized_manifest)
    return layout.normalized_manifest


def training_manifest(config):
    """data.manifest if set, else the normalized manifest, else the tiled one."""
    layout = Layout(config.output_dir)
    configured = config.path(config["data"]["manifest"])
    if configured is not None:
        return configured
    for candidate in (layout.normalized_manifest, layout.patches_manifest):
        if os.path.isfile(candidate):
            return candidate
    raise DataUnavailable(f"no manifest in {config.output_dir}, run tile first")


def _check_labels(labels, num_classes, source):
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ArtifactMismatch(f"{source} has no accepted patches")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ArtifactMismatch(
            f"{source} has labels {sorted(set(labels.tolist()))}, "
            f"model.num_classes is {num_classes}"
        )


def split_manifest(config):
    """Plan the held-out test split and k folds; write split.csv.

    Returns
    -------
    test_indices : numpy.ndarray
    split : FoldSplit
    """
    layout = Layout(config.output_dir)
    manifest = training_manifest(config)
    labels = np.array([r.label for r in read_manifest(manifest) if r.accepted], dtype=int)
    _check_labels(labels, config["model"]["num_classes"], manifest)
    cfg = config.train_config
    test, split = plan_split(labels, cfg.test_fraction, cfg.k, config.seed)
    folds = split.assignments(len(labels))
    frame = pd.DataFrame({"index": np.arange(len(labels)), "fold": folds})
    _write_csv(frame, layout.split)
    logger.info(f"split {len(labels)} patches: {len(test)} test, {cfg.k} folds")
    return test, split


def _read_split(layout, size):
    """(test indices, FoldSplit) from split.csv, or None if absent."""
    if not os.path.isfile(layout.split):
        return None
    frame = pd.read_csv(layout.split)
    if list(frame.columns) != ["index", "fold"]:
        raise ArtifactMismatch(f"{layout.split} must have columns index,fold")
    if len(frame) != size:
        raise ArtifactMismatch(f"{layout.split} covers {len(frame)} patches but the manifest has {size}")
    folds = frame["fold"].to_numpy(dtype=int)
    return np.flatnonzero(folds == -1), FoldSplit.from_assignments(folds)


def _load_dataset(config):
    manifest = training_manifest(config)
    data = PatchDataset.from_manifest(manifest, config["model"]["input_size"], workers=config.workers)
    _check_labels(data.labels, config["model"]["num_classes"], manifest)
    return data


def _pretrained_extractor(config, layout):
    model = config["model"]
    if model["pretrained"] is not None:
        _, state = read_checkpoint(config.path(model["pretrained"]))
        logger.info(f"loaded pretrained extractor from {model['pretrained']}")
        return state
    source = config.path(config["pretrain"]["manifest"])
    if source is not None:
        data = PatchDataset.from_manifest(source, model["input_size"], workers=config.workers)
        logger.info(f"pretraining the extractor on {source} ({len(data)} patches)")
        state = pretrain_extractor(
            config.extractor,
            data,
            config.pretrain_config,
            config.input_shape,
            config["pretrain"]["val_fraction"],
        )
        _makedirs(layout.pretrained)
        metadata = {"kind": "extractor", "extractor": [layer.to_dict() for layer in config.extractor]}
        write_checkpoint(layout.pretrained, state, metadata)
        return state
    if model["kind"] == "base":
        logger.warning("base model without a pretrained extractor: only the head learns")
    return None


def train(config):
    """Run the cross-validated experiment; write epoch logs and fold checkpoints.

    Returns
    -------
    MetricsReport
        fold aggregate on the held-out test split
    """
    layout = Layout(config.output_dir)
    data = _load_dataset(config)
    plan = _read_split(layout, len(data))
    if plan is None:
        plan = split_manifest(config)
    pretrained = _pretrained_extractor(config, layout)
    spec = config.model_spec
    logger.info(f"training {config['model']['kind']} model: {len(spec.parameter_ids(True))} trainable tensors")

    def save_fold(result, fold_report, probabilities, test_indices):
        _write_csv(pd.DataFrame(logs_to_records(result.logs)), layout.fold_log(result.fold))
        _makedirs(layout.fold_checkpoint(result.fold))
        metadata = {
            "fold": result.fold,
            "best_epoch": result.best_epoch,
            "seed": config.seed,
            "spec": spec.to_dict(),
        }
        write_checkpoint(layout.fold_checkpoint(result.fold), result.model.state_dict(), metadata)

    summary = run_experiment(spec, data, config.train_config, pretrained, plan, on_fold=save_fold)
    logger.info(f"test accuracy over {len(summary.folds)} folds: {summary.formatted('accuracy')}")
    return summary


def load_fold_model(filename):
    """Rebuild a fold model from its checkpoint.

    Raises
    ------
    ArtifactMismatch
        if the checkpoint is missing, malformed or lacks a model spec
    """
    metadata, state = read_checkpoint(filename)
    if "spec" not in metadata:
        raise ArtifactMismatch(f"checkpoint {filename} has no model spec")
    try:
        spec = ModelSpec.from_dict(metadata["spec"])
    except (HistonavError, KeyError, TypeError) as exception:
        raise ArtifactMismatch(f"checkpoint {filename} has an invalid model spec") from exception
    model = Model(spec)
    model.load_state(state)
    return model


def _require_split(layout, size):
    plan = _read_split(layout, size)
    if plan is None:
        raise ArtifactMismatch(f"{layout.split} does not exist, run split and train first")
    return plan


def _predictions_frame(indices, labels, probabilities, paths):
    frame = pd.DataFrame(
        {
            "index": indices,
            "path": paths,
            "label": labels,
            "pred": probabilities.argmax(axis=1) if len(probabilities) else [],
        }
    )
    for k in range(probabilities.shape[1]):
        frame[f"p{k}"] = probabilities[:, k]
    return frame


def evaluate(config):
    """Score every fold checkpoint on the held-out test split; write reports.

    Returns
    -------
    MetricsReport
        fold aggregate

    Raises
    ------
    ArtifactMismatch
        if split.csv or a fold checkpoint is missing or does not fit the data
    """
    layout = Layout(config.output_dir)
    data = _load_dataset(config)
    test, split = _require_split(layout, len(data))
    n_classes = config["model"]["num_classes"]
    batch_size = config.train_config.batch_size
    reports = []
    for fold in range(split.k):
        model = load_fold_model(layout.fold_checkpoint(fold))
        if model.spec.num_classes != n_classes or model.spec.input_shape != config.input_shape:
            raise ArtifactMismatch(
                f"{layout.fold_checkpoint(fold)} was trained for {model.spec.num_classes} classes at "
                f"{model.spec.input_shape}, config has {n_classes} at {config.input_shape}"
            )
        fold_report, probabilities = evaluate_fold(model, data, test, batch_size)
        paths = [os.path.basename(data.paths[i]) for i in test]
        frame = _predictions_frame(test, data.labels[test], probabilities, paths)
        _write_csv(frame, layout.predictions(fold), float_format="%.17g")
        reports.append(fold_report)
        logger.info(f"fold {fold}: test accuracy {fold_report.accuracy:.2f}%")
    summary = aggregate(reports)
    _write_text(summary.render_table(), layout.report("metrics.txt"))
    _write_text(summary.to_json(), layout.report("metrics.json"))
    curves = {fold: fold_report.curves for fold, fold_report in enumerate(reports)}
    _write_csv(roc_frame(curves), layout.report("roc.csv"))
    logger.info(f"test accuracy {summary.formatted('accuracy')}")
    return summary


def _read_artifact(filename, hint):
    if not os.path.isfile(filename):
        raise ArtifactMismatch(f"{filename} does not exist, run {hint} first")
    return pd.read_csv(filename)


def report(config):
    """Render training curves, confusion matrices and ROC curves.

    Each figure is written as SVG next to a CSV of the plotted data.

    Returns
    -------
    list of str
        the written files
    """
    layout = Layout(config.output_dir)
    if not os.path.isfile(layout.split):
        raise ArtifactMismatch(f"{layout.split} does not exist, run split and train first")
    k = int(pd.read_csv(layout.split)["fold"].max()) + 1
    n_classes = config["model"]["num_classes"]
    logs = [_read_artifact(layout.fold_log(fold), "train") for fold in range(k)]
    reports = []
    for fold in range(k):
        frame = _read_artifact(layout.predictions(fold), "evaluate")
        columns = [f"p{c}" for c in range(n_classes)]
        if any(column not in frame for column in columns):
            raise ArtifactMismatch(f"{layout.predictions(fold)} lacks columns {columns}")
        reports.append(
            evaluate_predictions(frame[columns].to_numpy(), frame["label"].to_numpy(), n_classes)
        )
    written = []
    for name, plot in (
        ("training_curves", plot_training_curves(logs)),
        ("confusion_matrices", plot_confusion(reports)),
        ("roc_curves", plot_roc(reports)),
    ):
        _makedirs(layout.plot(f"{name}.svg"))
        plot.save(layout.plot(f"{name}.svg"))
        plot.save_data(layout.plot(f"{name}.csv"))
        plot.close()
        written += [layout.plot(f"{name}.svg"), layout.plot(f"{name}.csv")]
    logger.info(f"wrote {len(written)} report files to {os.path.dirname(written[0])}")
    return written


def _expand_inputs(inputs):
    paths = []
    for item in inputs:
        if os.path.isdir(item):
            paths += [os.path.join(item, name) for name in _image_files(item)]
        else:
            paths.append(item)
    return paths


def predict(config, inputs, output=None, normalize_inputs=False):
    """Classify new patches with the fold models, averaging their probabilities.

    Parameters
    ----------
    config : ExperimentConfig
    inputs : list of str
        patch images or directories of them
    output : str, optional
        CSV to write, defaults to reports/predictions.csv
    normalize_inputs : bool, defaults to False
        stain-normalize patches to the configured reference first

    Returns
    -------
    pandas.DataFrame
        path,pred,p0..pN-1
    """
    layout = Layout(config.output_dir)
    checkpoints = []
    while os.path.isfile(layout.fold_checkpoint(len(checkpoints))):
        checkpoints.append(layout.fold_checkpoint(len(checkpoints)))
    if not checkpoints:
        raise ArtifactMismatch(f"{layout.fold_checkpoint(0)} does not exist, run train first")
    models = [load_fold_model(filename) for filename in checkpoints]
    paths = _expand_inputs(inputs)
    size = config["model"]["input_size"]
    reference = _reference(config) if normalize_inputs else None
    params = _stain_parameters(config)

    def read(path):
        image = load_image(path)
        if reference is not None:
            image = _normalize_or_flag(image, reference, params)[0]
        return resize(image, size)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        images = list(executor.map(read, paths))
    n_classes = models[0].spec.num_classes
    if images:
        batch = to_inputs(np.stack(images))
        probabilities = np.mean([model.predict(batch) for model in models], axis=0)
    else:
        probabilities = np.zeros((0, n_classes))
    frame = pd.DataFrame({"path": paths, "pred": probabilities.argmax(axis=1) if len(paths) else []})
    for k in range(n_classes):
        frame[f"p{k}"] = probabilities[:, k]
    output = output or layout.report("predictions.csv")
    _write_csv(frame, output, float_format="%.6f")
    logger.info(f"predicted {len(frame)} patches with {len(models)} fold models")
    return frame


def run(config, reference_from=None):
    """tile, normalize, split, train, evaluate and report in one go."""
    tile_slides(config)
    normalize_patches(config, reference_from)
    split_manifest(config)
    train(config)
    summary = evaluate(config)
    report(config)
    return summary
