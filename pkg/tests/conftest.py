import numpy as np
import pytest

from lipbound import Box, MlpNetwork


@pytest.fixture
def ex1():
    """f(x) = max(x-1,0) - max(1-x,0) = x - 1."""
    return MlpNetwork.from_arrays([([[1.0], [-1.0]], [-1.0, 1.0]), ([[1.0, -1.0]], [0.0])])


@pytest.fixture
def ex2():
    """f(x) = max(x+1,0) - max(x-1,0)."""
    return MlpNetwork.from_arrays([([[1.0], [1.0]], [-1.0, 1.0]), ([[-1.0, 1.0]], [0.0])])


def random_net(seed, n_hidden_layers=None, max_width=4, bias_scale=0.5):
    """Seeded random network with widths in 1..max_width."""
    rng = np.random.default_rng(seed)
    if n_hidden_layers is None:
        n_hidden_layers = int(rng.integers(2, 4))
    widths = (
        [int(rng.integers(1, max_width + 1))]
        + [int(rng.integers(1, max_width + 1)) for _ in range(n_hidden_layers)]
        + [int(rng.integers(1, max_width + 1))]
    )
    layers = [
        (rng.normal(size=(widths[k + 1], widths[k])), bias_scale * rng.normal(size=widths[k + 1]))
        for k in range(len(widths) - 1)
    ]
    return MlpNetwork.from_arrays(layers)


def unit_box(net):
    n0 = net.input_dim
    return Box(-np.ones(n0), np.ones(n0))
