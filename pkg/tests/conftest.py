"""
Pytest configuration and fixtures for interimcore tests.
"""
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

PROBLEMS_DIR = Path(__file__).parent.parent / 'problems'


@pytest.fixture(scope="session", autouse=True)
def init_config():
    """Initialize ConfigManager once for all tests."""
    from utils import ConfigManager
    ConfigManager.initialize()
    yield ConfigManager


@pytest.fixture
def config_manager(init_config):
    """Provide ConfigManager instance."""
    return init_config


@pytest.fixture
def override_config(config_manager):
    """Set config values for one test and restore them afterwards."""
    saved = []

    def override(value, *keys):
        saved.append((config_manager.get_config_value(*keys), keys))
        config_manager.set_config_value(value, *keys)

    yield override
    for value, keys in reversed(saved):
        config_manager.set_config_value(value, *keys)


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR


@pytest.fixture
def worked():
    """The three-player, two-state reference economy."""
    from worked_example import worked_economy
    return worked_economy()


def _random_partition(rng, size):
    from probability import all_partitions
    options = list(all_partitions(size))
    return options[rng.integers(len(options))]


def _random_utility(rng, n_states, n_goods):
    from games import AffinePiece, UtilitySpec
    per_state = []
    for _ in range(n_states):
        pieces = []
        for _ in range(int(rng.integers(1, 4))):
            coefficients = tuple(float(c) for c in rng.choice([0.5, 1.0, 2.0], size=n_goods))
            pieces.append(AffinePiece(coefficients, float(rng.choice([0.0, 0.5, 1.0]))))
        per_state.append(tuple(pieces))
    return UtilitySpec(tuple(per_state))


@pytest.fixture
def random_economy():
    """Factory for small seeded economies with concave nonnegative utilities.

    Endowments are drawn per block of each player's partition, so they are
    measurable under interim delivery.
    """
    from games import Delivery, Economy
    from probability import InformationStructure, StateSpace

    def make(seed, n_players=None, n_states=None, n_goods=1, delivery=Delivery.INTERIM):
        rng = np.random.default_rng(seed)
        n_players = n_players or int(rng.integers(1, 4))
        n_states = n_states or int(rng.integers(1, 4))
        raw = rng.integers(1, 4, size=n_states).astype(float)
        space = StateSpace(tuple(f"s{w}" for w in range(n_states)), tuple(raw / raw.sum()))
        info = InformationStructure(tuple(
            _random_partition(rng, n_states) for _ in range(n_players)
        ))
        endowments = np.zeros((n_players, n_states, n_goods))
        for i in range(n_players):
            for block in info[i].blocks:
                endowments[i, sorted(block)] = rng.choice([0.0, 0.5, 1.0], size=n_goods)
        endowments[0] += 0.5
        utilities = tuple(_random_utility(rng, n_states, n_goods) for _ in range(n_players))
        return Economy(space, info, endowments, utilities, delivery)

    return make
