import numpy as np
import pytest

from maplab import fixtures


@pytest.fixture
def two_state():
    return fixtures.two_state()


@pytest.fixture
def ct_two_state():
    return fixtures.ct_two_state()


def random_kernel(rng, n_states):
    """Strictly positive random row-stochastic matrix (irreducible)."""
    P = rng.uniform(0.05, 1.0, size=(n_states, n_states))
    return P / P.sum(axis=1, keepdims=True)
