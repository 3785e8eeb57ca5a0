"""Multi-step predecessor models: matrix powers and TD-style mixtures."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..core import TabularChain
from ..errors import ValidationError


def n_step_backward(reversed_chain: TabularChain, n: int) -> np.ndarray:
    """n-step predecessor kernel: the reversed transition matrix to the n-th power.

    Row ``t`` of the result is the distribution over states visited ``n``
    steps before arriving at ``t``.
    """
    if n < 1:
        raise ValidationError(f"step count must be positive, got {n}")
    return np.linalg.matrix_power(reversed_chain.transition, n)


class LambdaModel:
    """Incrementally learned mixture over predecessor horizons.

    Each observed move (previous -> current) nudges the current state's row
    toward a blend of the immediate predecessor indicator and the model's own
    row at the previous state, with per-state blend weight ``lambda``. With a
    constant lambda the fixed point is the geometric mixture
    ``(1 - lambda) * sum_n lambda^(n-1) * K^n`` over n-step predecessor
    kernels ``K^n``. Rows start uniform so the table is a valid distribution
    throughout learning.
    """

    def __init__(
        self,
        n_states: int,
        lam: float | np.ndarray | Callable[[int], float],
        step_size: float = 0.1,
    ):
        self.n_states = n_states
        self.step_size = step_size
        if callable(lam):
            values = np.array([float(lam(s)) for s in range(n_states)])
        else:
            values = np.broadcast_to(np.asarray(lam, dtype=float), (n_states,)).copy()
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValidationError("lambda values must lie in [0, 1]")
        self.lam = values
        self.table = np.full((n_states, n_states), 1.0 / n_states)

    def update(self, prev_state: int, state: int, step_size: float | None = None):
        """One TD-style row update for the observed move prev_state -> state."""
        alpha = self.step_size if step_size is None else step_size
        lam = self.lam[state]
        target = lam * self.table[prev_state].copy()
        target[prev_state] += 1.0 - lam
        self.table[state] += alpha * (target - self.table[state])

    def row(self, state: int) -> np.ndarray:
        return self.table[state]


def geometric_mixture(reversed_chain: TabularChain, lam: float, max_n: int = 30) -> np.ndarray:
    """Truncated geometric mixture of n-step predecessor kernels (reference form)."""
    p = reversed_chain.transition
    term = np.array(p)
    total = np.zeros_like(p)
    for n in range(1, max_n + 1):
        total += (1.0 - lam) * lam ** (n - 1) * term
        term = term @ p
    return total
