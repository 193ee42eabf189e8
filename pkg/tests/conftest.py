"""Shared fixtures: the absorbing benchmark game and a warm solution cache."""

import numpy as np
import pytest

from stochgame import (CounterConfig, SolutionCache, big_match, make_config,
                       normalize_payoffs)


@pytest.fixture(scope="session")
def bm_game():
    return big_match()


@pytest.fixture(scope="session")
def bm(bm_game):
    return normalize_payoffs(bm_game)


@pytest.fixture(scope="session")
def config() -> CounterConfig:
    return make_config(0.2, 100.0)


@pytest.fixture(scope="session")
def cache(bm, config) -> SolutionCache:
    return SolutionCache(bm, config)


@pytest.fixture(scope="session")
def live(bm_game) -> int:
    return bm_game.states.index("live")


def make_rng(tag: int) -> np.random.Generator:
    # one seed root so reruns – and failures – are reproducible
    return np.random.default_rng(0x5EED0000 + tag)
