"""Shared fixtures: parameter presets and small engines over the real bases.

The toy engines reuse the preset moduli at ring degree 64, which keeps every
congruence condition of the full-size rings while making keygen and the
homomorphic ops fast enough for per-test use.
"""

import pytest

from medha.heaan import Engine
from medha.params import get_param_set

TOY_DEGREE = 64


@pytest.fixture(scope="session")
def set1():
    return get_param_set("set1")


@pytest.fixture(scope="session")
def set2():
    return get_param_set("set2")


@pytest.fixture(scope="session")
def logreg_pset():
    return get_param_set("logreg")


@pytest.fixture(scope="session")
def toy_native(set1):
    eng = Engine(set1.base, TOY_DEGREE, "native", seed=5)
    eng.keygen(rotation_steps=(1, 3))
    return eng


@pytest.fixture(scope="session")
def toy_split(set1):
    eng = Engine(set1.base, TOY_DEGREE, "split", seed=5)
    eng.keygen(rotation_steps=(1, 3))
    return eng


@pytest.fixture(scope="session")
def toy_split2(set2):
    eng = Engine(set2.base, TOY_DEGREE, "split", seed=5)
    eng.keygen(rotation_steps=(1,))
    return eng
