import numpy as np
import pytest

from nvreadout.nvmodel import ModelParams, RateTable


@pytest.fixture(scope="session")
def p():
    return ModelParams()


@pytest.fixture(scope="session")
def r():
    return RateTable()


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)
