"""Model-free learning primitives: TD(0), Q-learning, exploration, schedules.

Update functions mutate the caller's table in place and return it. The
``discount`` argument is the transition's bootstrap weight, which is 0 at
termination, so callers never special-case episode ends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def td0_update(values, state, reward, discount, next_state, step_size):
    """One tabular TD(0) update toward ``reward + discount * v(next_state)``."""
    td_error = reward + discount * values[next_state] - values[state]
    values[state] += step_size * td_error
    return values


def q_learning_update(q, state, action, reward, discount, next_state, step_size):
    """One Q-learning update; touches only the (state, action) entry."""
    target = reward + discount * np.max(q[next_state])
    q[state, action] += step_size * (target - q[state, action])
    return q


def epsilon_greedy(q, state, epsilon, rng: np.random.Generator) -> int:
    """Epsilon-greedy action choice with uniform tie-breaking among maxima.

    The random stream is consumed identically for identical tie structure, so
    adding a constant to a Q row cannot change the chosen actions.
    """
    row = q[state]
    if rng.random() < epsilon:
        return int(rng.integers(len(row)))
    best = np.flatnonzero(row == row.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


@dataclass(frozen=True)
class LinearSchedule:
    """Linear interpolation from ``start`` at step 0 to ``end`` at ``horizon``.

    Clamped to ``end`` afterwards. Monotone between the endpoints.
    """

    start: float
    end: float
    horizon: int

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError(f"schedule horizon must be at least 1, got {self.horizon}")

    def value(self, t: int) -> float:
        frac = min(max(t, 0), self.horizon) / self.horizon
        return self.start + (self.end - self.start) * frac
