"""Shared step result type."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StepOutcome:
    """What one environment step produced.

    ``discount`` is the bootstrap weight for the next state: 0 exactly when
    the episode terminated, the environment discount otherwise. Truncation
    (hitting a step cap) is flagged separately and does not zero the
    discount, since the episode was cut rather than finished.
    """

    reward: float
    discount: float
    next_state: int
    terminated: bool
    truncated: bool = False

    def __post_init__(self):
        if self.terminated != (self.discount == 0.0):
            raise ValueError("terminated must hold exactly when discount is 0")
