import numpy as np
import pytest

from poincare_lab import load_corpus, rasterize


@pytest.fixture(scope="session")
def specs():
    names = [
        "interval",
        "square",
        "rect2x1",
        "disk",
        "tiny_disk",
        "annulus",
        "slit_disk",
        "split_disk",
        "two_disks",
        "strip",
        "two_bars",
        "cusp",
        "ellipse",
        "shrink_disk",
    ]
    return {n: load_corpus(n) for n in names}


@pytest.fixture(scope="session")
def disk128(specs):
    return rasterize(specs["disk"], (), 128)


@pytest.fixture(scope="session")
def square64(specs):
    return rasterize(specs["square"], (), 64)


@pytest.fixture(scope="session")
def interval64(specs):
    return rasterize(specs["interval"], (), 64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
