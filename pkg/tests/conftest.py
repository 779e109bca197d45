import math

import pytest

from quotefilter import ExpIntensity, GaussianPrior, Quotes, characteristic_time


@pytest.fixture
def intensity() -> ExpIntensity:
    return ExpIntensity(lambda0=50.0, a=5.0)


@pytest.fixture
def quotes() -> Quotes:
    return Quotes.around(100.0, 0.1)


@pytest.fixture
def prior() -> GaussianPrior:
    return GaussianPrior(x0=100.0, sigma0=0.05)


@pytest.fixture
def t1(intensity) -> float:
    return characteristic_time(intensity, 0.1)


@pytest.fixture
def base_sigma() -> float:
    return 0.06


def approx_rel(value, target, rel):
    return math.isclose(value, target, rel_tol=rel, abs_tol=0.0)
