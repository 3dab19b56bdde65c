"""Experiment configuration: defaults, JSON documents and validation.

A config document is a JSON object with the sections of ``defaults``. Only
the fields to change need to be given; they are merged recursively into the
defaults. String paths may use ``{output_dir}``.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass
from importlib import resources

from histonav.data.patches import AugmentPolicy
from histonav.errors import ConfigError, HistonavError
from histonav.models.builder import build_base, build_hybrid, get_extractor
from histonav.training.cv import TrainConfig
from histonav.training.optim import ScheduleConfig

__all__ = [
    "CONFIG_ENV",
    "defaults",
    "update_copy",
    "Overrides",
    "ExperimentConfig",
    "load_config",
    "list_presets",
]

logger = logging.getLogger(__name__)

CONFIG_ENV = "HISTONAV_CONFIG"

defaults = {
    "seed": 0,
    "workers": 1,
    "output_dir": "histonav_out",
    "data": {
        "slides": "{output_dir}/slides",
        "classes": None,  # None: sorted class subdirectory names
        "manifest": None,  # None: normalized manifest if present, else tiled
    },
    "tiling": {
        "size": 1024,
        "stride": None,
        "mean_max": 200.0,
        "std_min": 60.0,
        "balance": None,  # per-class downsample count
        "targets": None,  # per-class counts reached by flipped copies
    },
    "stain": {
        "alpha": 1.0,
        "beta": 0.15,
        "i0": 255.0,
        "min_pixels": 100,
        "min_angle": 0.1,
        "reference": None,  # None: the shipped default profile
    },
    "augment": {
        "transforms": ["rot90"],
    },
    "model": {
        "kind": "hybrid",  # "base" or "hybrid"
        "extractor": "small",
        "freeze_boundary": None,  # None: everything below the last conv layer
        "head_widths": None,  # None: default_head halving rule
        "num_classes": 3,
        "input_size": 224,
        "pretrained": None,  # extractor checkpoint
    },
    "pretrain": {
        "manifest": None,  # source-task manifest; trains an extractor first
        "epochs": 12,
        "val_fraction": 0.2,
    },
    "train": {
        "batch_size": 64,
        "eta_max": 0.001,
        "eta_min": 0.0,
        "restart_period": 12,
        "epochs": 47,
        "patience": 10,
        "restore_best": True,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "k": 5,
        "test_fraction": 0.1,
    },
}


def update_copy(original_settings, user_settings):
    """Recursively merge user_settings into a copy of original_settings.

    Parameters
    ----------
    original_settings : dict
        a defaults dictionary, usually histonav.config.defaults
    user_settings : dict
        only the fields of original_settings that change

    Returns
    -------
    dict
        the merged copy

    Raises
    ------
    ConfigError
        if user_settings names a field the defaults do not have
    """
    unknown = set(user_settings) - set(original_settings)
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    new_settings = dict()
    for k, v in original_settings.items():
        if isinstance(v, dict):
            user_value = user_settings.get(k, {})
            if not isinstance(user_value, dict):
                raise ConfigError(f"config section '{k}' must be an object")
            new_settings[k] = update_copy(v, user_value)
        else:
            new_settings[k] = copy.deepcopy(user_settings.get(k, v))
    return new_settings


class Overrides:
    """Context manager for temporarily changing the module defaults.

    Parameters
    ----------
    user_settings : dict
        only the fields of histonav.config.defaults to change

    Example
    -------
    >>> with Overrides({"train": {"epochs": 3}}):
    ...     config = load_config()
    """

    def __init__(self, user_settings):
        self.original_settings = update_copy(defaults, {})
        self.user_settings = update_copy(defaults, user_settings)

    def __enter__(self):
        defaults.update(self.user_settings)

    def __exit__(self, *args, **kwargs):
        defaults.update(self.original_settings)


def _check(condition, message):
    if not condition:
        raise ConfigError(message)


def _is_count(value):
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def _check_targets(targets, num_classes):
    """tiling.targets: a list of counts, or an object of class index strings to counts."""
    if targets is None:
        return
    if isinstance(targets, dict):
        for key, count in targets.items():
            _check(
                str(key).isdigit() and int(key) < num_classes,
                f"tiling.targets keys must be class indices below {num_classes}, got {key!r}",
            )
            _check(_is_count(count), f"tiling.targets[{key!r}] must be a non-negative integer, got {count!r}")
        return
    _check(isinstance(targets, list), "tiling.targets must be a list or an object of per-class counts")
    _check(
        len(targets) <= num_classes,
        f"tiling.targets lists {len(targets)} counts for {num_classes} classes",
    )
    for count in targets:
        _check(_is_count(count), f"tiling.targets counts must be non-negative integers, got {count!r}")


@dataclass
class ExperimentConfig:
    """A validated experiment configuration.

    Build with ``ExperimentConfig.from_dict`` or ``load_config``; every
    value is checked against the preconditions of the module that uses it.

    Attributes
    ----------
    settings : dict
        the merged settings document
    source : str
        where the document came from
    """

    settings: dict
    source: str = "defaults"

    def __post_init__(self):
        self.settings = update_copy(defaults, self.settings)
        try:
            self._validate()
        except ConfigError:
            raise
        except HistonavError as exception:
            raise ConfigError(f"{self.source}: {exception}") from exception
        except (TypeError, ValueError, KeyError) as exception:
            raise ConfigError(f"{self.source}: invalid value: {exception}") from exception

    @classmethod
    def from_dict(cls, settings, source="dict"):
        return cls(settings, source)

    def _validate(self):
        s = self.settings
        _check(isinstance(s["seed"], int) and s["seed"] >= 0, "seed must be a non-negative integer")
        _check(isinstance(s["workers"], int) and s["workers"] >= 1, "workers must be >= 1")
        tiling = s["tiling"]
        _check(tiling["size"] >= 1, "tiling.size must be positive")
        _check(tiling["stride"] is None or tiling["stride"] >= 1, "tiling.stride must be positive")
        _check(0 <= tiling["mean_max"] <= 255, "tiling.mean_max must lie in [0, 255]")
        _check(tiling["std_min"] >= 0, "tiling.std_min must be >= 0")
        _check(tiling["balance"] is None or tiling["balance"] >= 1, "tiling.balance must be >= 1")
        stain = s["stain"]
        _check(stain["i0"] > 0, "stain.i0 must be positive")
        _check(stain["beta"] >= 0, "stain.beta must be >= 0")
        _check(0 <= stain["alpha"] < 50, "stain.alpha must lie in [0, 50)")
        _check(stain["min_pixels"] >= 1, "stain.min_pixels must be >= 1")
        model = s["model"]
        _check(model["kind"] in ("base", "hybrid"), "model.kind must be 'base' or 'hybrid'")
        _check(model["input_size"] >= 1, "model.input_size must be positive")
        _check_targets(tiling["targets"], model["num_classes"])
        _check(0 < s["pretrain"]["val_fraction"] < 1, "pretrain.val_fraction must lie in (0, 1)")
        _check(s["pretrain"]["epochs"] >= 1, "pretrain.epochs must be >= 1")
        self.augment_policy = AugmentPolicy.from_names(s["augment"]["transforms"], s["seed"])
        self.train_config = self._train_config(s["train"]["epochs"])
        self.model_spec = self._model_spec()

    def _train_config(self, epochs):
        train = self.settings["train"]
        schedule = ScheduleConfig(
            eta_max=float(train["eta_max"]),
            eta_min=float(train["eta_min"]),
            restart_period=int(train["restart_period"]),
            total_epochs=int(epochs),
        )
        return TrainConfig(
            batch_size=int(train["batch_size"]),
            schedule=schedule,
            beta1=float(train["beta1"]),
            beta2=float(train["beta2"]),
            epsilon=float(train["epsilon"]),
            patience=int(train["patience"]),
            restore_best=bool(train["restore_best"]),
            seed=self.settings["seed"],
            augment=self.augment_policy,
            test_fraction=float(train["test_fraction"]),
            k=int(train["k"]),
            workers=self.settings["workers"],
        )

    @property
    def pretrain_config(self):
        return self._train_config(self.settings["pretrain"]["epochs"])

    @property
    def input_shape(self):
        size = self.settings["model"]["input_size"]
        return (3, size, size)

    @property
    def extractor(self):
        return get_extractor(self.settings["model"]["extractor"])

    def _model_spec(self):
        model = self.settings["model"]
        extractor = self.extractor
        if model["kind"] == "base":
            return build_base(extractor, model["num_classes"], self.input_shape)
        boundary = model["freeze_boundary"]
        if boundary is None:
            convs = [i for i, layer in enumerate(extractor) if layer.kind == "conv2d"]
            boundary = convs[-1] if convs else len(extractor)
        return build_hybrid(
            extractor, boundary, model["head_widths"], model["num_classes"], self.input_shape
        )

    def __getitem__(self, key):
        return self.settings[key]

    @property
    def seed(self):
        return self.settings["seed"]

    @property
    def workers(self):
        return self.settings["workers"]

    @property
    def output_dir(self):
        return self.settings["output_dir"]

    def path(self, value):
        """Expand {output_dir} in a configured path; None stays None."""
        if value is None:
            return None
        return os.path.normpath(str(value).format(output_dir=self.output_dir))

    def to_json(self):
        return json.dumps(self.settings, indent=2, sort_keys=True) + "\n"


def list_presets():
    """Names of the presets shipped in histonav.examples.presets."""
    presets = resources.files("histonav.examples") / "presets"
    return sorted(p.name[: -len(".json")] for p in presets.iterdir() if p.name.endswith(".json"))


def _read_document(path):
    if path in list_presets():
        location = resources.files("histonav.examples") / "presets" / f"{path}.json"
        text = location.read_text()
    else:
        try:
            with open(path) as file:
                text = file.read()
        except OSError as exception:
            raise ConfigError(f"cannot read config {path}: {exception.strerror}") from exception
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exception:
        raise ConfigError(f"config {path} is not valid JSON: {exception}") from exception
    if not isinstance(document, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return document


def load_config(path=None, overrides=None):
    """Load, merge and validate a config document.

    Parameters
    ----------
    path : str, optional
        a JSON file or a preset name (see list_presets). Defaults to the
        HISTONAV_CONFIG environment variable, then to the built-in defaults.
    overrides : dict, optional
        fields applied on top of the document (e.g. from CLI flags)

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        if the document cannot be read or a value is invalid
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    document = {} if path is None else _read_document(path)
    merged = update_copy(update_copy(defaults, document), overrides or {})
    config = ExperimentConfig(merged, source=path or "defaults")
    logger.debug(f"loaded config from {config.source}")
    return config
