import numpy as np
import pytest

from ter.core import Transition


def make_transition(step: int = 0, s: int = 0, s2: int = 1, a: int = 0, r: float = 0.0,
                    terminal: bool = False, timeout: bool = False, dim: int = 4) -> Transition:
    obs = np.zeros(dim)
    nxt = np.zeros(dim)
    obs[s % dim] = 1.0
    nxt[s2 % dim] = 1.0
    return Transition(obs, a, r, nxt, terminal, timeout, step)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
