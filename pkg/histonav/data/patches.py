"""Slide tiling, tissue QC, resizing, augmentation and class balancing.

Images are numpy arrays of shape (H, W, 3), dtype uint8, in RGB order.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from histonav.errors import ConfigError, DataUnavailable, EmptyClass, InvalidArgument, NotSquare

__all__ = [
    "PatchRecord",
    "AugmentPolicy",
    "load_image",
    "save_image",
    "grayscale",
    "intensity_stats",
    "tile",
    "crop",
    "qc_accept",
    "resize",
    "resize224",
    "augment",
    "augment_rng",
    "apply_flip",
    "balance_downsample",
    "plan_expansion",
    "FLIPS",
    "with_path",
]

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
FLIPS = ("hflip", "vflip", "hvflip")


@dataclass(frozen=True)
class PatchRecord:
    """Provenance, QC statistics and label of one tile.

    Parameters
    ----------
    slide_id : str
        source slide name
    x, y : int
        top-left pixel offset in the slide
    size : int
        side length in pixels
    mean_intensity, std_intensity : float
        grayscale mean and population standard deviation
    label : int, defaults to -1
        class index, -1 if unlabeled
    accepted : bool, defaults to False
        whether the tile passed QC
    output_path : str, defaults to ""
        where the patch image is written
    """

    slide_id: str
    x: int
    y: int
    size: int
    mean_intensity: float
    std_intensity: float
    label: int = -1
    accepted: bool = False
    output_path: str = ""


@dataclass(frozen=True)
class AugmentPolicy:
    """Which random transforms dynamic augmentation may apply.

    Parameters
    ----------
    allow_hflip, allow_vflip, allow_rot90 : bool
        enabled transforms; each is applied with probability 0.5 (rot90
        draws k in 0..3 quarter turns)
    seed : int, defaults to 0
        experiment seed mixed into every per-sample draw
    """

    allow_hflip: bool = False
    allow_vflip: bool = False
    allow_rot90: bool = False
    seed: int = 0

    @property
    def active(self):
        return self.allow_hflip or self.allow_vflip or self.allow_rot90

    @classmethod
    def from_names(cls, names, seed=0):
        """Policy from transform names, e.g. ["rot90", "hflip"]."""
        names = set(names)
        unknown = names - {"hflip", "vflip", "rot90"}
        if unknown:
            raise ConfigError(f"unknown augmentation transforms {sorted(unknown)}")
        return cls("hflip" in names, "vflip" in names, "rot90" in names, seed)

    def names(self):
        flags = {"hflip": self.allow_hflip, "vflip": self.allow_vflip, "rot90": self.allow_rot90}
        return [name for name, allowed in flags.items() if allowed]


def load_image(path):
    """Read a raster image as an (H, W, 3) uint8 RGB array.

    Raises
    ------
    DataUnavailable
        if the file cannot be read or decoded
    """
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert("RGB"))
    except (OSError, ValueError) as exception:
        raise DataUnavailable(f"cannot read image {path}") from exception


def save_image(path, image):
    """Write an (H, W, 3) uint8 array as PNG."""
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(path, format="PNG")


def grayscale(image):
    """Luma (0.299 R + 0.587 G + 0.114 B) as float64."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    return image[..., :3] @ LUMA


def intensity_stats(image):
    """(mean, population std) of the grayscale image."""
    gray = grayscale(image)
    return float(gray.mean()), float(gray.std())


def tile(slide, size=1024, stride=None, slide_id="", label=-1):
    """Cut a slide into a row-major grid of square windows.

    Partial windows at the right and bottom edges are discarded.

    Parameters
    ----------
    slide : numpy.ndarray
        (H, W, 3) RGB slide
    size : int, defaults to 1024
        window side length
    stride : int, optional
        step between windows, defaults to size (non-overlapping)
    slide_id : str, optional
        recorded on every PatchRecord
    label : int, defaults to -1
        recorded on every PatchRecord

    Returns
    -------
    list of PatchRecord
        with intensity statistics filled in; empty if the slide is smaller
        than one window
    """
    stride = stride or size
    if size < 1 or stride < 1:
        raise InvalidArgument(f"size and stride must be positive, got {size} and {stride}")
    height, width = slide.shape[:2]
    if height < size or width < size:
        logger.warning(f"slide {slide_id!r} ({width}x{height}) is smaller than one {size}px tile")
        return []
    records = []
    for y in range(0, height - size + 1, stride):
        for x in range(0, width - size + 1, stride):
            mean, std = intensity_stats(slide[y : y + size, x : x + size])
            records.append(PatchRecord(slide_id, x, y, size, mean, std, label))
    return records


def crop(slide, record):
    """The pixels of a record's window."""
    return slide[record.y : record.y + record.size, record.x : record.x + record.size]


def qc_accept(record, mean_max=200, std_min=60):
    """Tissue QC: accept when mean <= mean_max and std >= std_min."""
    return record.mean_intensity <= mean_max and record.std_intensity >= std_min


def resize(patch, size=224):
    """Bilinear resize of a square patch to size x size x 3.

    Raises
    ------
    NotSquare
        if the patch is not square
    """
    patch = np.asarray(patch)
    if patch.shape[0] != patch.shape[1]:
        raise NotSquare(f"patch is {patch.shape[1]}x{patch.shape[0]}")
    if patch.ndim == 2:
        patch = np.repeat(patch[..., None], 3, axis=2)
    patch = np.ascontiguousarray(patch[..., :3], dtype=np.uint8)
    if patch.shape[0] == size:
        return patch.copy()
    resized = Image.fromarray(patch).resize((size, size), Image.BILINEAR)
    return np.asarray(resized)


def resize224(patch):
    return resize(patch, 224)


def augment_rng(seed, index, epoch):
    """Generator for one (experiment seed, sample index, epoch) draw."""
    return np.random.default_rng([seed, index, epoch])


def augment(patch, policy, draw):
    """Apply independently sampled enabled transforms.

    rot90 is drawn first (odd quarter turns only for square images), then
    hflip, then vflip, each with probability 0.5.

    Parameters
    ----------
    patch : numpy.ndarray
        (H, W, C) image
    policy : AugmentPolicy
    draw : numpy.random.Generator
        e.g. from augment_rng(policy.seed, index, epoch)

    Returns
    -------
    numpy.ndarray
        the transformed image (a copy)
    """
    if not policy.active:
        return np.array(patch)
    out = np.asarray(patch)
    if policy.allow_rot90:
        k = int(draw.integers(4))
        if out.shape[0] != out.shape[1]:
            k -= k % 2
        out = np.rot90(out, k, axes=(0, 1))
    if policy.allow_hflip and draw.random() < 0.5:
        out = out[:, ::-1]
    if policy.allow_vflip and draw.random() < 0.5:
        out = out[::-1]
    return np.ascontiguousarray(out)


def apply_flip(image, flip):
    """Deterministic flip by name: "hflip", "vflip" or "hvflip"."""
    if flip == "hflip":
        return np.ascontiguousarray(image[:, ::-1])
    if flip == "vflip":
        return np.ascontiguousarray(image[::-1])
    if flip == "hvflip":
        return np.ascontiguousarray(image[::-1, ::-1])
    raise InvalidArgument(f"unknown flip '{flip}'")


def _indices_by_class(records, n_classes=None):
    by_class = {}
    for index, record in enumerate(records):
        by_class.setdefault(record.label, []).append(index)
    if n_classes is not None:
        empty = [c for c in range(n_classes) if c not in by_class]
        if empty:
            raise EmptyClass(f"classes {empty} have no records")
    if not by_class:
        raise EmptyClass("no records to balance")
    return dict(sorted(by_class.items()))


def balance_downsample(records, per_class, seed, n_classes=None):
    """Subsample every class to min(per_class, class size) without replacement.

    Parameters
    ----------
    records : list of PatchRecord
    per_class : int
        target count per class
    seed : int
        selection seed
    n_classes : int, optional
        if given, every class in range(n_classes) must have records

    Returns
    -------
    list of PatchRecord
        the selection, in input order

    Raises
    ------
    EmptyClass
        if a class has no records
    """
    rng = np.random.default_rng(seed)
    keep = []
    for label, indices in _indices_by_class(records, n_classes).items():
        count = min(per_class, len(indices))
        keep.extend(rng.choice(indices, size=count, replace=False).tolist())
        logger.debug(f"class {label}: kept {count} of {len(indices)}")
    return [records[i] for i in sorted(keep)]


def plan_expansion(records, targets, seed):
    """Plan flipped copies that raise each class to its target count.

    Every (record, flip) pair is used at most once, so a class grows to at
    most four times its size.

    Parameters
    ----------
    records : list of PatchRecord
        accepted records
    targets : dict or list
        class index -> target count
    seed : int
        selection seed

    Returns
    -------
    list of (int, str)
        (index into records, flip name) per planned copy, ordered by class
        then by draw
    """
    if not isinstance(targets, dict):
        targets = dict(enumerate(targets))
    rng = np.random.default_rng(seed)
    plan = []
    for label, indices in _indices_by_class(records).items():
        deficit = int(targets.get(label, 0)) - len(indices)
        if deficit <= 0:
            continue
        pairs = [(i, flip) for i in indices for flip in FLIPS]
        if deficit > len(pairs):
            logger.warning(
                f"class {label}: target {targets[label]} needs {deficit} copies, "
                f"only {len(pairs)} distinct flips available"
            )
            deficit = len(pairs)
        chosen = rng.choice(len(pairs), size=deficit, replace=False)
        plan.extend(pairs[k] for k in chosen)
    return plan


def with_path(record, path, accepted=None):
    """Copy of a record with its output path (and acceptance) set."""
    if accepted is None:
        return replace(record, output_path=str(path))
    return replace(record, output_path=str(path), accepted=bool(accepted))
