import pytest

from gricelab.semantics import make_synthetic_language
from gricelab.speakers import (
    CostFunction,
    DynamicGriceanSpeaker,
    DynamicRsaListener,
    NonredundantSpeaker,
    UniformTruthfulSpeaker,
)


@pytest.fixture(scope="session")
def synthetic3():
    return make_synthetic_language(3)


@pytest.fixture(scope="session")
def uniform3(synthetic3):
    ws, lang = synthetic3
    return UniformTruthfulSpeaker(lang, ws)


@pytest.fixture(scope="session")
def gricean3(synthetic3):
    """The reference informative speaker: alpha 5, cost 0.1 per label
    character, literal listener."""
    ws, lang = synthetic3
    cost = CostFunction.length_cost(lang, 0.1)
    listener = DynamicRsaListener(lang, ws, depth=0, cost=cost)
    return DynamicGriceanSpeaker(lang, ws, 5.0, cost, listener)


@pytest.fixture(scope="session")
def nonredundant3(synthetic3):
    ws, lang = synthetic3
    return NonredundantSpeaker(lang, ws)
