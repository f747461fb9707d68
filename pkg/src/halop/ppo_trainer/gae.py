"""Generalized advantage estimation for terminal-reward episodes."""

from __future__ import annotations

import numpy as np

__all__ = ["compute_advantages"]


def compute_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step advantages and value targets for one complete episode.

    The episode is terminal after the last step (bootstrap value 0); with the
    execution reward granted only at the horizon, ``rewards`` is zero except
    for its final entry.  Targets are advantage plus the rollout value.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError("rewards and values must be 1-d and aligned")
    n = rewards.size
    adv = np.empty(n)
    last = 0.0
    next_value = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
        next_value = values[t]
    return adv, adv + values
