"""Patches, manifests, stain normalization and datasets."""

from histonav.data.patches import (
    PatchRecord,
    AugmentPolicy,
    load_image,
    save_image,
    grayscale,
    intensity_stats,
    tile,
    crop,
    qc_accept,
    resize,
    resize224,
    augment,
    augment_rng,
    apply_flip,
    balance_downsample,
    plan_expansion,
    with_path,
    FLIPS,
)
from histonav.data.manifest import (
    MANIFEST_COLUMNS,
    records_to_frame,
    frame_to_records,
    write_manifest,
    read_manifest,
)
from histonav.data.stain import (
    StainMatrix,
    ReferenceProfile,
    rgb_to_od,
    od_to_rgb,
    estimate_stains,
    concentrations,
    concentrations_from_od,
    normalize,
    build_reference,
)
from histonav.data.dataset import PatchDataset, to_inputs
from histonav.data.checkpoint import write_checkpoint, read_checkpoint

__all__ = [
    # from patches
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
    "with_path",
    "FLIPS",
    # from manifest
    "MANIFEST_COLUMNS",
    "records_to_frame",
    "frame_to_records",
    "write_manifest",
    "read_manifest",
    # from stain
    "StainMatrix",
    "ReferenceProfile",
    "rgb_to_od",
    "od_to_rgb",
    "estimate_stains",
    "concentrations",
    "concentrations_from_od",
    "normalize",
    "build_reference",
    # from dataset
    "PatchDataset",
    "to_inputs",
    # from checkpoint
    "write_checkpoint",
    "read_checkpoint",
]
