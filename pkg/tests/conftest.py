import numpy as np
import pytest

from concepts.mdp_core.algorithms import TabularMDP
from tests.helpers import make_config


@pytest.fixture
def grid_config():
    return make_config()


@pytest.fixture
def oracle_mdp():
    """4 states, 2 actions, deterministic moves: action 1 walks right, action 0 resets to state 0."""
    transition = np.zeros((4, 2, 4))
    for s in range(4):
        transition[s, 0, 0] = 1.0
        transition[s, 1, min(s + 1, 3)] = 1.0
    reward = np.array([[0.0, -1.0], [0.0, -1.0], [0.0, -1.0], [0.0, 5.0]])
    return TabularMDP(transition, reward, gamma=0.9)
