import numpy as np
import pytest

from bandtoeplitz.symbol import parse_symbol

ARCSINE = {1: 1, -1: 1}
EX1 = {2: 4 / 27, 1: 12 / 27, 0: 12 / 27, -1: 4 / 27}  # 4(z+1)^3/(27z)
EX2 = {2: 1, 1: 1, -1: 1, -2: 1}
EX3 = {2: 1, -3: 1}

STAR_RADIUS = 5 * 2 ** (-2 / 5) * 3 ** (-3 / 5)


@pytest.fixture(scope="session")
def arcsine():
    return parse_symbol(ARCSINE)


@pytest.fixture(scope="session")
def ex1():
    return parse_symbol(EX1)


@pytest.fixture(scope="session")
def ex2():
    return parse_symbol(EX2)


@pytest.fixture(scope="session")
def ex3():
    return parse_symbol(EX3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ex1_density0(x):
    """Arclength density of the limiting eigenvalue measure of the first example on (0, 1)."""
    x = np.asarray(x, float)
    s = np.sqrt(1 - x)
    return (np.sqrt(3) / (4 * np.pi) * ((1 + s) ** (1 / 3) + (1 - s) ** (1 / 3))
            / (x ** (2 / 3) * s))


def ex1_density1(x):
    """Density of the second measure of the first example on (-inf, 0)."""
    x = np.asarray(x, float)
    s = np.sqrt(1 - x)
    return (np.sqrt(3) / (4 * np.pi) * ((1 + s) ** (1 / 3) - np.cbrt(s - 1))
            / ((-x) ** (2 / 3) * s))
