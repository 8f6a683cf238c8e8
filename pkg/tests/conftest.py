import numpy as np
import pytest

from lcwcheck.catalog import random_metric_near_flat, random_polynomial


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def near_flat(dim, rng, amplitude=0.04):
    return random_metric_near_flat(dim, rng, amplitude=amplitude)


def small_poly(dim, rng, amplitude=0.08):
    return random_polynomial(dim, rng, amplitude=amplitude)


def random_point(rng, dim, radius=0.2):
    return rng.uniform(-radius, radius, dim)
