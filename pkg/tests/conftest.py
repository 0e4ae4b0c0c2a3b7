import numpy as np
import pytest

from pcgraph.core import CONVENTIONS, LayerSpec, activation
from pcgraph.pcn import PcnModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_pcn(rng, sizes, act="tanh", convention="matrix-activation", scale=None):
    """Random layered model; default scale keeps spectral norms near one."""
    sizes = tuple(sizes)
    weights = []
    for l in range(len(sizes) - 1):
        m, n = sizes[l + 1], sizes[l]
        s = scale if scale is not None else 1.0 / (np.sqrt(m) + np.sqrt(n))
        weights.append(s * rng.standard_normal((m, n)))
    return PcnModel(LayerSpec(sizes), tuple(weights), activation(act), convention)


def both_conventions():
    return CONVENTIONS
