"""Macenko stain estimation and color normalization.

Pixels are converted to optical density (OD), the plane of the two largest
principal directions of the tissue OD vectors is found, and the extreme
angles in that plane give the hematoxylin and eosin vectors. Concentrations
are solved per pixel and rescaled against a reference profile.
"""

import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np

from histonav.errors import (
    ArtifactMismatch,
    DataUnavailable,
    DegenerateStains,
    InsufficientTissue,
    InvalidArgument,
    SingularStains,
)

__all__ = [
    "StainMatrix",
    "ReferenceProfile",
    "rgb_to_od",
    "od_to_rgb",
    "estimate_stains",
    "concentrations",
    "concentrations_from_od",
    "normalize",
    "build_reference",
]

logger = logging.getLogger(__name__)

_PROFILE_FIELDS = ("h_r", "h_g", "h_b", "e_r", "e_g", "e_b", "max_c_h", "max_c_e")


@dataclass(frozen=True, eq=False)
class StainMatrix:
    """Two unit stain vectors in OD space, hematoxylin first.

    Parameters
    ----------
    vectors : array-like, shape (3, 2)
        columns are (hematoxylin, eosin) OD directions. Columns are
        normalized to unit length on construction.

    Raises
    ------
    DegenerateStains
        if a column is zero or negative, or the columns are (nearly)
        collinear
    """

    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.shape != (3, 2):
            raise DegenerateStains(f"stain matrix must be 3x2, got {vectors.shape}")
        if np.any(vectors < -1e-12):
            raise DegenerateStains(f"stain vectors have negative components:\n{vectors}")
        norms = np.linalg.norm(vectors, axis=0)
        if np.any(norms == 0):
            raise DegenerateStains("a stain vector is zero")
        vectors = np.clip(vectors, 0, None) / norms
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        if self.angle <= 1e-3:
            raise DegenerateStains(f"stain vectors are collinear (angle {self.angle:.2e} rad)")

    @property
    def hematoxylin(self):
        return self.vectors[:, 0]

    @property
    def eosin(self):
        return self.vectors[:, 1]

    @property
    def angle(self):
        """Angle between the two stain vectors in radians."""
        cosine = np.clip(self.hematoxylin @ self.eosin, -1.0, 1.0)
        return float(np.arccos(cosine))

    def angles_to(self, other):
        """Per-column angles (radians) between this matrix and another."""
        cosines = np.clip(np.sum(self.vectors * other.vectors, axis=0), -1.0, 1.0)
        return np.arccos(cosines)


@dataclass(frozen=True, eq=False)
class ReferenceProfile:
    """Normalization target: a stain matrix and 99th-percentile concentrations.

    Parameters
    ----------
    stains : StainMatrix
        target stain vectors
    max_concentrations : array-like, shape (2,)
        target 99th-percentile concentration of each stain, > 0
    """

    stains: StainMatrix
    max_concentrations: np.ndarray

    def __post_init__(self):
        max_c = np.array(self.max_concentrations, dtype=np.float64)
        if max_c.shape != (2,) or np.any(max_c <= 0):
            raise ArtifactMismatch(f"reference concentrations must be 2 positive values, got {max_c}")
        object.__setattr__(self, "max_concentrations", max_c)

    @classmethod
    def default(cls):
        """The profile shipped with histonav.examples."""
        path = resources.files("histonav.examples") / "reference" / "default_profile.txt"
        with resources.as_file(path) as filename:
            return cls.read(filename)

    @classmethod
    def read(cls, filename):
        """Read a profile document of "name value" lines.

        Raises
        ------
        DataUnavailable
            if the file cannot be read
        ArtifactMismatch
            if a field is missing or not a number
        """
        try:
            with open(filename) as file:
                lines = file.readlines()
        except OSError as exception:
            raise DataUnavailable(f"cannot read reference profile {filename}") from exception
        values = {}
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, _, value = line.partition(" ")
            try:
                values[name] = float(value)
            except ValueError as exception:
                raise ArtifactMismatch(f"{filename}: bad value for {name}: '{value}'") from exception
        missing = [name for name in _PROFILE_FIELDS if name not in values]
        if missing:
            raise ArtifactMismatch(f"{filename}: missing fields {missing}")
        vectors = np.array([[values["h_r"], values["e_r"]],
                            [values["h_g"], values["e_g"]],
                            [values["h_b"], values["e_b"]]])
        return cls(StainMatrix(vectors), [values["max_c_h"], values["max_c_e"]])

    def write(self, filename):
        """Write the profile as "name value" lines in a fixed field order."""
        numbers = [*self.stains.hematoxylin, *self.stains.eosin, *self.max_concentrations]
        with open(filename, "w") as file:
            for name, value in zip(_PROFILE_FIELDS, numbers):
                file.write(f"{name} {value:.17g}\n")


def rgb_to_od(rgb, i0=255):
    """Optical density -log10(max(rgb, 1) / i0) per channel.

    Parameters
    ----------
    rgb : array-like
        pixel values in [0, 255], any shape
    i0 : float, defaults to 255
        transmitted (white) light intensity

    Returns
    -------
    numpy.ndarray
        float64 optical densities, same shape as rgb
    """
    if i0 <= 0:
        raise InvalidArgument(f"i0 must be positive, got {i0}")
    rgb = np.asarray(rgb, dtype=np.float64)
    return -np.log10(np.maximum(rgb, 1.0) / i0)


def od_to_rgb(od, i0=255):
    """Inverse of rgb_to_od, rounded and clipped to uint8."""
    rgb = i0 * np.power(10.0, -np.asarray(od, dtype=np.float64))
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def _tissue_od(image, beta, i0, min_pixels):
    od = rgb_to_od(np.asarray(image)[..., :3].reshape(-1, 3), i0)
    od = od[np.all(od > beta, axis=1)]
    if len(od) < min_pixels:
        raise InsufficientTissue(
            f"only {len(od)} pixels with every OD channel above {beta} (need {min_pixels})"
        )
    return od


def _unit_nonnegative(vector):
    if vector.sum() < 0:
        vector = -vector
    vector = np.clip(vector, 0, None)
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise DegenerateStains("an extreme stain direction has no positive component")
    return vector / norm


def estimate_stains(image, alpha=1, beta=0.15, i0=255, min_pixels=100, min_angle=0.1):
    """Estimate the H&E stain matrix of an RGB image.

    Parameters
    ----------
    image : numpy.ndarray
        (H, W, 3) RGB image
    alpha : float, defaults to 1
        percentile of the extreme angles (alpha and 100 - alpha)
    beta : float, defaults to 0.15
        pixels with any OD channel <= beta are background
    i0 : float, defaults to 255
        transmitted light intensity
    min_pixels : int, defaults to 100
        minimum number of tissue pixels
    min_angle : float, defaults to 0.1
        extremes closer than this (radians) are one stain

    Returns
    -------
    StainMatrix

    Raises
    ------
    InsufficientTissue
        if fewer than min_pixels tissue pixels remain
    DegenerateStains
        if the extreme directions are collinear
    """
    od = _tissue_od(image, beta, i0, min_pixels)
    _, eigenvectors = np.linalg.eigh(np.cov(od.T))
    # largest two, principal first, oriented toward positive OD
    plane = eigenvectors[:, [2, 1]]
    plane = plane * np.where(plane.sum(axis=0) < 0, -1.0, 1.0)
    projected = od @ plane
    phi = np.arctan2(projected[:, 1], projected[:, 0])
    low, high = np.percentile(phi, [alpha, 100 - alpha])
    extremes = [
        _unit_nonnegative(plane @ np.array([np.cos(angle), np.sin(angle)]))
        for angle in (low, high)
    ]
    separation = np.arccos(np.clip(extremes[0] @ extremes[1], -1.0, 1.0))
    if separation < min_angle:
        raise DegenerateStains(
            f"extreme stain directions are {separation:.4f} rad apart (< {min_angle})"
        )
    # hematoxylin absorbs more red
    if extremes[0][0] < extremes[1][0]:
        extremes.reverse()
    stains = StainMatrix(np.column_stack(extremes))
    logger.debug(f"estimated stains from {len(od)} pixels, separation {stains.angle:.4f} rad")
    return stains


def concentrations_from_od(od, stains):
    """Least-squares stain concentrations of OD vectors, negatives clamped to 0.

    Parameters
    ----------
    od : array-like, shape (..., 3)
        optical densities
    stains : StainMatrix

    Returns
    -------
    numpy.ndarray, shape (..., 2)

    Raises
    ------
    SingularStains
        if the normal equations are singular
    """
    vectors = stains.vectors if isinstance(stains, StainMatrix) else np.asarray(stains)
    gram = vectors.T @ vectors
    if abs(np.linalg.det(gram)) < 1e-12:
        raise SingularStains("stain normal equations are singular")
    od = np.asarray(od, dtype=np.float64)
    solved = np.linalg.solve(gram, (od.reshape(-1, 3) @ vectors).T).T
    return np.maximum(solved, 0.0).reshape(od.shape[:-1] + (2,))


def concentrations(image, stains, i0=255):
    """Per-pixel (hematoxylin, eosin) concentrations of an RGB image."""
    return concentrations_from_od(rgb_to_od(np.asarray(image)[..., :3], i0), stains)


def _max_concentrations(concentration_map):
    return np.percentile(concentration_map.reshape(-1, 2), 99, axis=0)


def normalize(image, reference=None, alpha=1, beta=0.15, i0=255, min_pixels=100,
              min_angle=0.1, return_stains=False):
    """Macenko-normalize an RGB image to a reference profile.

    Parameters
    ----------
    image : numpy.ndarray
        (H, W, 3) RGB image
    reference : ReferenceProfile, optional
        defaults to ReferenceProfile.default()
    alpha, beta, i0, min_pixels, min_angle
        passed to estimate_stains
    return_stains : bool, defaults to False
        also return the estimated source StainMatrix

    Returns
    -------
    numpy.ndarray or (numpy.ndarray, StainMatrix)
        uint8 image with the input's dimensions
    """
    if reference is None:
        reference = ReferenceProfile.default()
    image = np.asarray(image)
    stains = estimate_stains(image, alpha, beta, i0, min_pixels, min_angle)
    concentration_map = concentrations(image, stains, i0)
    source_max = _max_concentrations(concentration_map)
    scale = np.divide(
        reference.max_concentrations,
        source_max,
        out=np.ones(2),
        where=source_max > 0,
    )
    od = (concentration_map * scale) @ reference.stains.vectors.T
    normalized = od_to_rgb(od, i0)
    if return_stains:
        return normalized, stains
    return normalized


def build_reference(image, alpha=1, beta=0.15, i0=255, min_pixels=100, min_angle=0.1):
    """Promote an image to a ReferenceProfile.

    Raises
    ------
    InsufficientTissue
        if a stain has no concentration above zero
    """
    stains = estimate_stains(image, alpha, beta, i0, min_pixels, min_angle)
    max_c = _max_concentrations(concentrations(image, stains, i0))
    if np.any(max_c <= 0):
        raise InsufficientTissue(f"reference image lacks one of the stains (99th pct {max_c})")
    return ReferenceProfile(stains, max_c)
