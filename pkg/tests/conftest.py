import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def random_occupancy(n, rng, density=None):
    d = rng.random() if density is None else density
    return (rng.random(n) < d).astype(np.int64)


class FakeGenerator:
    """Replays a preset sequence of uniforms for deterministic draw tests."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)
