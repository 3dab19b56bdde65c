import os

import numpy as np
import pytest

from histonav.data import (
    MANIFEST_COLUMNS,
    AugmentPolicy,
    PatchDataset,
    PatchRecord,
    read_checkpoint,
    read_manifest,
    save_image,
    write_checkpoint,
    write_manifest,
)
from histonav.errors import ArtifactMismatch, DataUnavailable


@pytest.fixture
def records():
    return [
        PatchRecord("Type0-slide0", 0, 0, 16, 150.25, 61.5, 0, True, "a.png"),
        PatchRecord("Type0-slide0", 16, 0, 16, 250.0, 2.0, 0, False, ""),
        PatchRecord("Type1-slide0", 0, 16, 16, 140.0, 70.125, 1, True, "b.png"),
    ]


def test_manifest_header_and_rows(tmp_path, records):
    filename = tmp_path / "manifest.csv"
    write_manifest(records, filename)
    lines = filename.read_text().splitlines()
    assert lines[0] == ",".join(MANIFEST_COLUMNS)
    assert lines[1] == "Type0-slide0,0,0,16,150.2500,61.5000,0,1,a.png"
    assert read_manifest(filename) == records


def test_manifest_rewrite_is_byte_identical(tmp_path, records):
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    write_manifest(records, first)
    write_manifest(read_manifest(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_manifest_errors(tmp_path):
    with pytest.raises(DataUnavailable):
        read_manifest(tmp_path / "missing.csv")
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("path,label\na.png,0\n")
    with pytest.raises(ArtifactMismatch):
        read_manifest(wrong)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ArtifactMismatch):
        read_manifest(empty)


def test_checkpoint_keeps_order_values_and_metadata(tmp_path, small_model):
    filename = tmp_path / "fold0.ckpt"
    metadata = {"fold": 0, "spec": small_model.spec.to_dict()}
    write_checkpoint(filename, small_model.state_dict(), metadata)
    restored_metadata, state = read_checkpoint(filename)
    assert restored_metadata == metadata
    assert list(state) == list(small_model.parameters)
    for key, values in small_model.state_dict().items():
        assert np.array_equal(state[key], values)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(ArtifactMismatch):
        read_checkpoint(tmp_path / "missing.ckpt")
    broken = tmp_path / "broken.ckpt"
    broken.write_bytes(b"not a checkpoint")
    with pytest.raises(ArtifactMismatch):
        read_checkpoint(broken)


@pytest.fixture
def patch_dir(tmp_path, rng):
    records = []
    for i in range(6):
        name = f"p{i}.png"
        save_image(tmp_path / name, rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        records.append(PatchRecord("s", i, 0, 16, 100.0, 70.0, i % 3, i != 5, name))
    write_manifest(records, tmp_path / "manifest.csv")
    return tmp_path


def test_dataset_from_manifest(patch_dir):
    data = PatchDataset.from_manifest(str(patch_dir / "manifest.csv"), input_size=8)
    assert len(data) == 5
    assert data.image_shape == (8, 8, 3)
    assert data.labels.tolist() == [0, 1, 2, 0, 1]
    assert data.num_classes == 3
    assert os.path.basename(data.paths[0]) == "p0.png"
    everything = PatchDataset.from_manifest(str(patch_dir / "manifest.csv"), 8, accepted_only=False)
    assert len(everything) == 6


def test_dataset_missing_patch(patch_dir):
    os.remove(patch_dir / "p1.png")
    with pytest.raises(DataUnavailable):
        PatchDataset.from_manifest(str(patch_dir / "manifest.csv"), input_size=8)


def test_batches_do_not_depend_on_workers(patch_dir):
    data = PatchDataset.from_manifest(str(patch_dir / "manifest.csv"), input_size=16)
    policy = AugmentPolicy(True, True, True, seed=4)
    indices = [0, 1, 2, 3, 4, 0, 1]
    single, labels = data.batch(indices, epoch=2, policy=policy, workers=1)
    threaded, _ = data.batch(indices, epoch=2, policy=policy, workers=4)
    assert single.shape == (7, 3, 16, 16)
    assert np.array_equal(single, threaded)
    assert labels.tolist() == [0, 1, 2, 0, 1, 0, 1]
    plain, _ = data.batch(indices)
    assert plain.max() <= 1.0 and plain.min() >= 0.0
