"""Synthetic H&E-like images with known stains and concentrations.

Two uses:

* stain oracles: images rendered from a known stain matrix and known
  per-pixel concentrations (``stain_mixture``, ``single_stain_image``).
* the desk-scale corpus: stained textures per class for the target task
  (``TARGET_CLASSES``) and for extractor pretraining (``SOURCE_CLASSES``).

Example usage:

from histonav.examples import synthetic

data = synthetic.texture_dataset(synthetic.TARGET_CLASSES, n_per_class=200)
"""

import logging
import os

import numpy as np
from scipy.ndimage import gaussian_filter

from histonav.data.dataset import PatchDataset
from histonav.data.manifest import write_manifest
from histonav.data.patches import PatchRecord, intensity_stats, resize, save_image
from histonav.data.stain import ReferenceProfile, StainMatrix, od_to_rgb
from histonav.errors import InvalidArgument

__all__ = [
    "TARGET_CLASSES",
    "SOURCE_CLASSES",
    "random_stains",
    "render",
    "stain_mixture",
    "single_stain_image",
    "texture",
    "texture_patch",
    "texture_slide",
    "texture_dataset",
    "write_corpus",
]

logger = logging.getLogger(__name__)

TARGET_CLASSES = ("sparse_nuclei", "dense_nuclei", "fibrous")
SOURCE_CLASSES = ("stripes", "blobs", "smooth")


def random_stains(rng, jitter=0.05):
    """The default reference stains with every component moved by up to +/- jitter."""
    vectors = ReferenceProfile.default().stains.vectors
    moved = np.clip(vectors + rng.uniform(-jitter, jitter, size=vectors.shape), 0.01, None)
    return StainMatrix(moved)


def render(concentration_map, stains, i0=255):
    """RGB image of (H, W, 2) concentrations under a stain matrix."""
    vectors = stains.vectors if isinstance(stains, StainMatrix) else np.asarray(stains)
    return od_to_rgb(concentration_map @ vectors.T, i0)


def stain_mixture(rng, stains, size=128, pure=0.03, background=0.1):
    """Image whose tissue spans both stains, with its true concentrations.

    A share ``pure`` of the pixels carries only hematoxylin, the same share
    only eosin, ``background`` is white and the rest mixes both stains.

    Returns
    -------
    image : numpy.ndarray
        (size, size, 3) uint8
    concentration_map : numpy.ndarray
        (size, size, 2) true concentrations
    tissue : numpy.ndarray
        (size, size) bool, False on background
    """
    n = size * size
    n_pure = int(round(pure * n))
    n_background = int(round(background * n))
    n_mixed = n - 2 * n_pure - n_background
    total = rng.uniform(0.7, 1.1, n_mixed)
    share = rng.uniform(0.2, 0.8, n_mixed)
    mixed = np.column_stack([total * share, total * (1 - share)])
    hematoxylin = np.column_stack([rng.uniform(0.5, 1.0, n_pure), np.zeros(n_pure)])
    eosin = np.column_stack([np.zeros(n_pure), rng.uniform(1.0, 1.4, n_pure)])
    blank = np.zeros((n_background, 2))
    concentration_map = np.concatenate([hematoxylin, eosin, mixed, blank])
    order = rng.permutation(n)
    concentration_map = concentration_map[order].reshape(size, size, 2)
    tissue = (np.arange(n) < n - n_background)[order].reshape(size, size)
    return render(concentration_map, stains), concentration_map, tissue


def single_stain_image(rng, stains, size=64, stain=0):
    """Image carrying only one of the two stains."""
    concentration_map = np.zeros((size, size, 2))
    concentration_map[..., stain] = rng.uniform(0.5, 1.2, (size, size))
    return render(concentration_map, stains)


def _smooth(rng, shape, sigma):
    field = gaussian_filter(rng.random(shape), sigma)
    low, high = field.min(), field.max()
    return (field - low) / (high - low) if high > low else np.zeros(shape)


def _blobs(rng, shape, density, radius):
    impulses = (rng.random(shape) < density).astype(np.float64)
    field = gaussian_filter(impulses, radius) * (2 * np.pi * radius**2)
    return np.clip(field, 0, 1)


def _stripes(rng, shape, period):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    theta = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    return 0.5 * (1 + wave)


def texture(kind, shape, rng):
    """(H, W, 2) hematoxylin/eosin concentrations of a named texture."""
    if kind == "sparse_nuclei":
        h = 1.6 * _blobs(rng, shape, 0.004, 2.0)
        e = 0.4 + 0.3 * _smooth(rng, shape, 6)
    elif kind == "dense_nuclei":
        h = 1.6 * _blobs(rng, shape, 0.02, 3.0)
        e = 0.3 + 0.2 * _smooth(rng, shape, 6)
    elif kind == "fibrous":
        h = 1.2 * _blobs(rng, shape, 0.003, 2.0)
        e = 0.3 + 0.9 * _stripes(rng, shape, 8)
    elif kind == "stripes":
        h = 1.2 * _stripes(rng, shape, 6)
        e = np.full(shape, 0.3)
    elif kind == "blobs":
        h = 1.5 * _blobs(rng, shape, 0.01, 2.5)
        e = np.full(shape, 0.3)
    elif kind == "smooth":
        h = 0.2 + 0.8 * _smooth(rng, shape, 4)
        e = np.full(shape, 0.3)
    else:
        raise InvalidArgument(f"unknown texture '{kind}'")
    return np.stack([h, e], axis=-1)


def texture_patch(kind, rng, size=64, stains=None):
    """One stained texture patch; stains default to a random variant."""
    if stains is None:
        stains = random_stains(rng)
    return render(texture(kind, (size, size), rng), stains)


def texture_slide(kind, rng, tiles=(5, 5), tile_size=64, blank_rows=1, stains=None):
    """A slide of one texture with blank (white) rows of tiles at the bottom."""
    if stains is None:
        stains = random_stains(rng)
    rows, cols = tiles
    height, width = (rows + blank_rows) * tile_size, cols * tile_size
    concentration_map = np.zeros((height, width, 2))
    concentration_map[: rows * tile_size] = texture(kind, (rows * tile_size, width), rng)
    return render(concentration_map, stains)


def texture_dataset(classes=TARGET_CLASSES, n_per_class=200, size=64, seed=0, input_size=None):
    """In-memory PatchDataset of stained textures, one class per kind."""
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for label, kind in enumerate(classes):
        for _ in range(n_per_class):
            images.append(texture_patch(kind, rng, size))
            labels.append(label)
    images = np.stack(images)
    if input_size is not None and input_size != size:
        images = np.stack([resize(image, input_size) for image in images])
    return PatchDataset(images, labels)


def write_corpus(output_dir, seed=0, slides_per_class=8, tiles=(5, 5), tile_size=64,
                 source_per_class=150):
    """Write the desk corpus: target slides and pretraining source patches.

    Layout::

        output_dir/slides/Type{k}/slide{j}.png
        output_dir/source/Type{k}_{j}.png
        output_dir/source/manifest.csv

    Returns
    -------
    slides_dir, source_manifest : str
    """
    rng = np.random.default_rng(seed)
    slides_dir = os.path.join(output_dir, "slides")
    for label, kind in enumerate(TARGET_CLASSES):
        class_dir = os.path.join(slides_dir, f"Type{label}")
        os.makedirs(class_dir, exist_ok=True)
        for j in range(slides_per_class):
            save_image(os.path.join(class_dir, f"slide{j}.png"), texture_slide(kind, rng, tiles, tile_size))
    source_dir = os.path.join(output_dir, "source")
    os.makedirs(source_dir, exist_ok=True)
    records = []
    for label, kind in enumerate(SOURCE_CLASSES):
        for j in range(source_per_class):
            patch = texture_patch(kind, rng, tile_size)
            name = f"Type{label}_{j}.png"
            save_image(os.path.join(source_dir, name), patch)
            mean, std = intensity_stats(patch)
            records.append(PatchRecord(f"source_{kind}", 0, 0, tile_size, mean, std, label, True, name))
    source_manifest = os.path.join(source_dir, "manifest.csv")
    write_manifest(records, source_manifest)
    logger.info(
        f"wrote {slides_per_class * len(TARGET_CLASSES)} slides and {len(records)} source patches"
    )
    return slides_dir, source_manifest
