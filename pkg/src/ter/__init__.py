"""Topological experience replay and baseline replay strategies for Q-learning."""

__version__ = "0.1.0"
