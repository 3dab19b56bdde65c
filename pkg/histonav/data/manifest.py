"""Patch manifests: comma-separated PatchRecord tables."""

import logging
from dataclasses import astuple

import pandas as pd

from histonav.data.patches import PatchRecord
from histonav.errors import ArtifactMismatch, DataUnavailable

__all__ = ["MANIFEST_COLUMNS", "records_to_frame", "frame_to_records", "write_manifest", "read_manifest"]

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["slide_id", "x", "y", "size", "mean", "std", "label", "accepted", "path"]


def records_to_frame(records):
    """PatchRecords as a DataFrame with the manifest columns."""
    return pd.DataFrame([astuple(r) for r in records], columns=MANIFEST_COLUMNS)


def frame_to_records(frame):
    return [
        PatchRecord(
            slide_id=str(row.slide_id),
            x=int(row.x),
            y=int(row.y),
            size=int(row.size),
            mean_intensity=float(row.mean),
            std_intensity=float(row.std),
            label=int(row.label),
            accepted=bool(row.accepted),
            output_path="" if pd.isna(row.path) else str(row.path),
        )
        for row in frame.itertuples(index=False)
    ]


def write_manifest(records, filename):
    """Write records with header slide_id,x,y,size,mean,std,label,accepted,path."""
    frame = records_to_frame(records)
    frame["accepted"] = frame["accepted"].astype(int)
    frame.to_csv(filename, index=False, float_format="%.4f", lineterminator="\n")
    logger.info(f"wrote {len(frame)} manifest rows to {filename}")


def read_manifest(filename):
    """Read a manifest into a list of PatchRecord.

    Raises
    ------
    DataUnavailable
        if the file cannot be read
    ArtifactMismatch
        if the header is not the manifest header
    """
    try:
        frame = pd.read_csv(filename, dtype={"slide_id": str, "path": str})
    except pd.errors.EmptyDataError as exception:
        raise ArtifactMismatch(f"manifest {filename} is empty") from exception
    except OSError as exception:
        raise DataUnavailable(f"cannot read manifest {filename}") from exception
    if list(frame.columns) != MANIFEST_COLUMNS:
        raise ArtifactMismatch(
            f"manifest {filename} has columns {list(frame.columns)}, expected {MANIFEST_COLUMNS}"
        )
    return frame_to_records(frame)
