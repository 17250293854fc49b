from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, NamedTuple, Optional, Sequence

import numpy as np


class EnvStep(NamedTuple):
    obs: np.ndarray
    reward: float
    terminal: bool
    timeout: bool


class EpisodeOverError(RuntimeError):
    """``step`` was called on a finished episode."""


# one outcome of (state, action): (probability, next_state, reward, terminal)
Outcome = tuple[float, Hashable, float, bool]


@dataclass
class TabularModel:
    """Exact, enumerable dynamics over the non-terminal states of an env."""

    states: Sequence[Hashable]
    n_actions: int
    outcomes: Callable[[Hashable, int], list[Outcome]]
    observe: Callable[[Hashable], np.ndarray]
    # actions available in a state; None means all of them everywhere
    valid_actions: Optional[Callable[[Hashable], Sequence[int]]] = None


class Env:
    """Minimal episodic environment interface shared by every task."""

    n_actions: int
    obs_dim: int
    max_steps: int

    @property
    def return_bounds(self) -> tuple[float, float]:
        """(worst, best) achievable undiscounted episode return."""
        raise NotImplementedError

    @property
    def r_max(self) -> float:
        return self.return_bounds[1]

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: int) -> EnvStep:
        raise NotImplementedError

    def model(self) -> TabularModel:
        raise NotImplementedError(f"{type(self).__name__} has no enumerable model")

    def normalize_return(self, g: float) -> float:
        lo, hi = self.return_bounds
        return (g - lo) / (hi - lo)
