"""Comparison replay strategies: uniform, prioritized, episodic backward, DisCor."""

from ter.baselines.discor import ErrorModel
from ter.baselines.ebu import EBUReplay, EpisodeBuffer, episode_targets
from ter.baselines.prioritized import LinearSchedule, PrioritizedReplay
from ter.baselines.sumtree import SumTree
from ter.baselines.uniform import UniformReplay

__all__ = [
    "EBUReplay",
    "EpisodeBuffer",
    "ErrorModel",
    "LinearSchedule",
    "PrioritizedReplay",
    "SumTree",
    "UniformReplay",
    "episode_targets",
]
