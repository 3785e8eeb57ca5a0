"""Leveled random chains: episodic MRPs with controllable fan shape.

A leveled chain arranges states in consecutive levels. Every state in level
``l`` transitions only to states in level ``l + 1``, with probabilities drawn
uniformly at random and row-normalized. States in the final level are
terminal; entering one collects a reward drawn once, at build time, from a
normal distribution per (source, target) edge. All other edges pay zero.

Narrowing level sizes (say 100 -> 20 -> 5) funnel many histories into few
outcomes; widening sizes (5 -> 20 -> 100) spread few histories over many
outcomes. That asymmetry is exactly what forward and backward planners trade
off over, which makes these chains the unit of account for the prediction
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import TabularChain
from ..errors import ValidationError
from .outcome import StepOutcome


@dataclass(frozen=True)
class LeveledChainSpec:
    """Build recipe for a leveled chain.

    Args:
        level_sizes: number of states per level, first entry is the entry
            level and last entry the terminal level. At least two levels.
        reward_mean: mean of the terminal-edge reward draw.
        reward_std: standard deviation of the terminal-edge reward draw.
        seed: build seed; same spec and seed give bit-identical chains.
    """

    level_sizes: tuple[int, ...]
    reward_mean: float = 10.0
    reward_std: float = 10.0
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.level_sizes)
        if len(sizes) < 2:
            raise ValidationError("a leveled chain needs at least two levels")
        if any(s < 1 for s in sizes):
            raise ValidationError(f"level sizes must be positive, got {sizes}")
        object.__setattr__(self, "level_sizes", sizes)

    @property
    def n_states(self) -> int:
        return sum(self.level_sizes)


def leveled_initial_distribution(spec: LeveledChainSpec) -> np.ndarray:
    """Uniform distribution over the entry level."""
    init = np.zeros(spec.n_states)
    init[: spec.level_sizes[0]] = 1.0 / spec.level_sizes[0]
    return init


def build_leveled_chain(spec: LeveledChainSpec) -> TabularChain:
    """Materialize the chain described by ``spec``.

    States are indexed level by level. Terminal rows are pre-wired with
    restart semantics: they return to the entry level uniformly at zero
    reward, so the built chain is directly usable for stationary-distribution
    and time-reversal analysis while the terminal mask keeps episode
    boundaries visible.

    Draw order (fixed, part of the reproducibility contract): one uniform
    block per level transition in level order, then one normal block for the
    terminal-edge rewards. Discount is 1: episodes are short and finite.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = spec.level_sizes
    n = spec.n_states
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    p = np.zeros((n, n))
    for level in range(len(sizes) - 1):
        rows = slice(offsets[level], offsets[level + 1])
        cols = slice(offsets[level + 1], offsets[level + 2])
        block = rng.uniform(0.0, 1.0, size=(sizes[level], sizes[level + 1]))
        p[rows, cols] = block / block.sum(axis=1, keepdims=True)
    r = np.zeros((n, n))
    r[offsets[-3] : offsets[-2], offsets[-2] :] = rng.normal(
        spec.reward_mean, spec.reward_std, size=(sizes[-2], sizes[-1])
    )
    terminal = np.zeros(n, dtype=bool)
    terminal[offsets[-2] :] = True
    p[terminal] = 0.0
    p[terminal, : sizes[0]] = 1.0 / sizes[0]
    return TabularChain(p, r, discount=1.0, terminal_mask=terminal)


class ChainEnv:
    """Sampling session over an episodic chain MRP.

    The chain has a single implicit action; ``step`` ignores whatever action
    index it is given. Stepping follows the chain's transition rows, rewards
    are the (deterministic) edge rewards, and reaching a terminal state ends
    the episode.
    """

    def __init__(self, chain: TabularChain, initial_distribution: np.ndarray, rng: np.random.Generator):
        init = np.asarray(initial_distribution, dtype=float)
        if init.shape != (chain.n_states,):
            raise ValidationError(
                f"initial distribution shape {init.shape} does not match {chain.n_states} states"
            )
        self.chain = chain
        self.n_states = chain.n_states
        self.n_actions = 1
        self.terminal_mask = chain.terminal_mask
        self.discount = chain.discount
        self._init_cdf = np.cumsum(init)
        self._cdf = np.cumsum(chain.transition, axis=1)
        self._rng = rng
        self.state = self.reset()

    @classmethod
    def from_spec(cls, spec: LeveledChainSpec, rng: np.random.Generator) -> "ChainEnv":
        return cls(build_leveled_chain(spec), leveled_initial_distribution(spec), rng)

    def reset(self) -> int:
        self.state = int(np.searchsorted(self._init_cdf, self._rng.random(), side="right"))
        return self.state

    def step(self, action: int = 0) -> StepOutcome:
        del action  # single implicit action
        s = self.state
        nxt = int(np.searchsorted(self._cdf[s], self._rng.random(), side="right"))
        terminated = bool(self.terminal_mask[nxt])
        outcome = StepOutcome(
            reward=float(self.chain.reward[s, nxt]),
            discount=0.0 if terminated else self.discount,
            next_state=nxt,
            terminated=terminated,
        )
        self.state = nxt
        return outcome
