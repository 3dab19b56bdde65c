import json

import numpy as np
import pytest

from histonav.engine import LayerSpec
from histonav.examples import synthetic
from histonav.models import Model, build_hybrid


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def stained(rng):
    """A two-stain image, its true stain matrix, concentrations and tissue mask."""
    stains = synthetic.random_stains(rng)
    image, concentration_map, tissue = synthetic.stain_mixture(rng, stains)
    return image, stains, concentration_map, tissue


@pytest.fixture
def small_extractor():
    """6 layers on (3, 8, 8) input: two conv/relu/pool blocks."""
    return [
        LayerSpec.conv2d(4, 3, padding=1),
        LayerSpec.relu(),
        LayerSpec.maxpool2d(2),
        LayerSpec.conv2d(6, 3, padding=1),
        LayerSpec.relu(),
        LayerSpec.maxpool2d(2),
    ]


@pytest.fixture
def small_model(small_extractor):
    spec = build_hybrid(small_extractor, 3, [8, 3], 3, input_shape=(3, 8, 8))
    return Model(spec, seed=1)


@pytest.fixture
def write_config(tmp_path):
    """Write a config document under tmp_path and return its path."""

    def write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return str(path)

    return write
