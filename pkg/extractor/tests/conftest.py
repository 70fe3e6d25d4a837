import numpy as np
import pytest

from echo_extractor.backbones import BACKBONE_DIMS, BACKBONE_ORDER


class StubBackbone:
    """Deterministic stand-in: fills its block with a per-backbone marker value
    plus the input mean, so block order and boundaries are observable."""

    def __init__(self, name, marker, dim=None):
        self.name = name
        self.dim = dim if dim is not None else BACKBONE_DIMS[name]
        self.marker = marker

    def extract(self, tensor):
        return np.full(self.dim, self.marker + float(tensor.pixels.mean()))


@pytest.fixture
def stub_backbones():
    return [StubBackbone(name, marker=10.0 * (i + 1))
            for i, name in enumerate(BACKBONE_ORDER)]


@pytest.fixture
def tiny_stub_backbones():
    # small dims keep emitted CSVs desk-sized for pipeline tests
    return [StubBackbone(name, marker=10.0 * (i + 1), dim=4 * (i + 1))
            for i, name in enumerate(BACKBONE_ORDER)]
