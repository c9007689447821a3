"""Locally differentially private greedy contextual bandits (private OLS / private SGD)."""

__version__ = "0.1.0"
