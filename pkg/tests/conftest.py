import pytest

import evtsim as es


@pytest.fixture(scope="session")
def grid():
    return es.make_grid(201)


@pytest.fixture(scope="session")
def const():
    return es.ConstantGenerator()


@pytest.fixture(scope="session")
def g2(grid):
    return es.two_ramp_generator(grid)


@pytest.fixture(scope="session")
def g3(grid):
    return es.shifted_ramp_generator(grid)


@pytest.fixture(scope="session")
def clg(grid):
    return es.CappedLogGaussianGenerator().calibrate(grid, n=100_000, seed=314)


@pytest.fixture(scope="session")
def bank(grid):
    return es.default_bank(grid)
