"""Tabu-tenure dropout and bandit-adaptive tenure selection for small dense networks."""

__version__ = "0.1.0"
