"""Model checkpoints as a sequence of .npy records.

A checkpoint starts with a JSON metadata record, followed by one pair of
records per parameter: its id (a unicode scalar array) and its float64
values. Shapes travel in the .npy headers.
"""

import json
import logging
import os

import numpy as np

from histonav.errors import ArtifactMismatch

__all__ = ["write_checkpoint", "read_checkpoint"]

logger = logging.getLogger(__name__)


def write_checkpoint(filename, state, metadata=None):
    """Write parameter values keyed by id.

    Parameters
    ----------
    filename : str or path
        checkpoint file to write
    state : dict
        parameter id -> numpy.ndarray, written in iteration order
    metadata : dict, optional
        JSON-serializable description (e.g. the model spec)
    """
    header = json.dumps(metadata or {}, sort_keys=True)
    with open(filename, "wb") as file:
        np.lib.format.write_array(file, np.array(header), allow_pickle=False)
        for key, values in state.items():
            np.lib.format.write_array(file, np.array(key), allow_pickle=False)
            np.lib.format.write_array(
                file, np.ascontiguousarray(values, dtype=np.float64), allow_pickle=False
            )
    logger.debug(f"wrote {len(state)} parameters to {filename}")


def read_checkpoint(filename):
    """Read a checkpoint written by write_checkpoint.

    Returns
    -------
    metadata : dict
    state : dict
        parameter id -> numpy.ndarray

    Raises
    ------
    ArtifactMismatch
        if the file is missing or malformed
    """
    if not os.path.isfile(filename):
        raise ArtifactMismatch(f"checkpoint {filename} does not exist")
    state = {}
    try:
        with open(filename, "rb") as file:
            end = os.fstat(file.fileno()).st_size
            metadata = json.loads(str(np.lib.format.read_array(file, allow_pickle=False)))
            while file.tell() < end:
                key = str(np.lib.format.read_array(file, allow_pickle=False))
                state[key] = np.lib.format.read_array(file, allow_pickle=False)
    except (ValueError, EOFError) as exception:
        raise ArtifactMismatch(f"checkpoint {filename} is malformed") from exception
    return metadata, state
