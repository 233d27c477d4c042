"""Parallel bandit reinforcement learning on cart-pole, with a Q-learning baseline."""

__version__ = "0.1.0"
