"""In-memory patch datasets feeding the training loop."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from histonav.data.manifest import read_manifest
from histonav.data.patches import augment, augment_rng, load_image, resize
from histonav.errors import DataUnavailable, LengthMismatch

__all__ = ["PatchDataset", "to_inputs"]

logger = logging.getLogger(__name__)


def to_inputs(images):
    """(N, H, W, 3) uint8 images to (N, 3, H, W) float64 inputs in [0, 1]."""
    images = np.asarray(images)
    return np.ascontiguousarray(images.transpose(0, 3, 1, 2), dtype=np.float64) / 255.0


class PatchDataset:
    """Labeled patches held in memory at the model input size.

    Parameters
    ----------
    images : numpy.ndarray
        (N, H, W, 3) uint8 images
    labels : array-like of int
        class index per image
    paths : list of str, optional
        source file of each image

    Attributes
    ----------
    images : numpy.ndarray
    labels : numpy.ndarray
    paths : list of str
    """

    def __init__(self, images, labels, paths=None):
        self.images = np.asarray(images, dtype=np.uint8)
        self.labels = np.asarray(labels, dtype=int)
        if len(self.images) != len(self.labels):
            raise LengthMismatch(f"{len(self.images)} images but {len(self.labels)} labels")
        self.paths = list(paths) if paths is not None else [""] * len(self.labels)

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        return f"PatchDataset({len(self)} patches, {self.num_classes} classes)"

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @classmethod
    def from_manifest(cls, manifest, input_size, accepted_only=True, workers=1):
        """Load the patches a manifest points to, resized to input_size.

        Parameters
        ----------
        manifest : str or list of PatchRecord
            manifest file (relative paths resolve against its directory)
            or records with absolute paths
        input_size : int
            side length of the model input
        accepted_only : bool, defaults to True
            skip records that failed QC
        workers : int, defaults to 1
            threads used to read images

        Raises
        ------
        DataUnavailable
            if a patch file is missing or unreadable
        """
        root = ""
        if isinstance(manifest, (str, os.PathLike)):
            root = os.path.dirname(os.fspath(manifest))
            manifest = read_manifest(manifest)
        records = [r for r in manifest if r.accepted or not accepted_only]
        paths = [os.path.join(root, r.output_path) for r in records]
        missing = [p for p in paths if not os.path.isfile(p)]
        if missing:
            raise DataUnavailable(f"{len(missing)} patch files are missing, first: {missing[0]}")

        def read(path):
            return resize(load_image(path), input_size)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            images = list(executor.map(read, paths))
        shape = (0, input_size, input_size, 3)
        images = np.stack(images) if images else np.zeros(shape, dtype=np.uint8)
        logger.info(f"loaded {len(images)} patches at {input_size}px")
        return cls(images, [r.label for r in records], paths)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return PatchDataset(self.images[indices], self.labels[indices], [self.paths[i] for i in indices])

    def batch(self, indices, epoch=0, policy=None, workers=1):
        """Model inputs and labels for dataset indices.

        Parameters
        ----------
        indices : array-like of int
            dataset indices, repeats allowed
        epoch : int, defaults to 0
            mixed into the augmentation draw
        policy : AugmentPolicy, optional
            dynamic augmentation; None disables it
        workers : int, defaults to 1
            threads used for augmentation. Results do not depend on it.

        Returns
        -------
        inputs : numpy.ndarray
            (B, 3, H, W) float64
        labels : numpy.ndarray
            (B,) int
        """
        indices = np.asarray(indices, dtype=int)
        if policy is None or not policy.active:
            return to_inputs(self.images[indices]), self.labels[indices]

        def transform(index):
            draw = augment_rng(policy.seed, int(index), epoch)
            return augment(self.images[index], policy, draw)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            images = list(executor.map(transform, indices))
        return to_inputs(np.stack(images)), self.labels[indices]
