from __future__ import annotations

import pytest

from superapprox.modgroup import ResidueMatrix, SymmetricGenSet, elementary, enumerate_group, lubotzky
from superapprox.walk import uniform_on


def unipotent_gens(p: int, k: int = 1) -> SymmetricGenSet:
    """{L^(+-1), U^(+-1)} with L = [[1,1],[0,1]], U = [[1,0],[1,1]]."""
    mats = [elementary(2, 0, 1, s, p, k) for s in (1, -1)] + [elementary(2, 1, 0, s, p, k) for s in (1, -1)]
    return SymmetricGenSet.close(mats)


def cyclic_gens(p: int) -> SymmetricGenSet:
    """{g, g^-1} for g = [[1,1],[0,1]] mod p, generating a cyclic group of order p."""
    return SymmetricGenSet.close([ResidueMatrix.from_rows([[1, 1], [0, 1]], p)])


@pytest.fixture(scope="session")
def sl2_5():
    return enumerate_group(lubotzky(5))


@pytest.fixture(scope="session")
def sl2_7():
    return enumerate_group(lubotzky(7))


@pytest.fixture(scope="session")
def sl2_25():
    return enumerate_group(lubotzky(5, 2))


@pytest.fixture(scope="session")
def mu5(sl2_5):
    return uniform_on(sl2_5)


@pytest.fixture(scope="session")
def mu7(sl2_7):
    return uniform_on(sl2_7)
