import warnings

import numpy as np
import pytest

from qetsim import chain, ising


@pytest.fixture(scope="session")
def ising8():
    return ising.build(ising.IsingParams(1.0, 8))


@pytest.fixture(scope="session")
def ising12():
    return ising.build(ising.IsingParams(1.0, 12))


@pytest.fixture(scope="session")
def random_chains10():
    rng = np.random.default_rng(2024)
    return tuple(chain.random_chain_model(10, rng) for _ in range(5))


@pytest.fixture(autouse=True)
def _silence_separation_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message=".*separation.*", category=UserWarning)
        warnings.filterwarnings(
            "ignore", message=".*closer than 5.*", category=UserWarning)
        yield
