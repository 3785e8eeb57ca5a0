"""Count-based maximum-likelihood transition models.

Both directions share the same diet of observed transitions. The forward
model conditions on (state, action) and predicts the successor; the backward
model conditions on the successor and predicts which (state, action) pair
produced it. Queries against conditions that were never observed return
``None``: not knowing is a normal answer here, and planners simply skip.
"""

from __future__ import annotations

import numpy as np

from ..core import TabularChain, TabularMDP
from ..errors import ValidationError


def _check_transition(n_states, n_actions, state, action, next_state):
    if not (0 <= state < n_states and 0 <= next_state < n_states):
        raise ValidationError(f"state pair ({state}, {next_state}) outside {n_states} states")
    if not (0 <= action < n_actions):
        raise ValidationError(f"action {action} outside {n_actions} actions")


class ForwardModel:
    """Empirical next-state model with reward and continuation heads.

    ``counts[s, a, t]`` accumulates observed moves, ``reward_estimate`` keeps
    a running average per edge, and ``continuation[t]`` tracks the bootstrap
    weight observed on arrival at ``t`` (0 when arrivals terminate, the
    discount otherwise). Continuation starts optimistically at the discount
    until the first arrival says otherwise.
    """

    def __init__(self, n_states: int, n_actions: int, discount: float, step_size: float = 1.0):
        if not (0.0 < discount <= 1.0):
            raise ValidationError(f"discount must lie in (0, 1], got {discount}")
        self.n_states = n_states
        self.n_actions = n_actions
        self.discount = discount
        self.step_size = step_size
        self.counts = np.zeros((n_states, n_actions, n_states))
        self.reward_estimate = np.zeros((n_states, n_actions, n_states))
        self.continuation = np.full(n_states, discount)

    @classmethod
    def from_chain(cls, chain: TabularChain) -> "ForwardModel":
        """Exact single-action model of a chain (probabilities double as counts)."""
        model = cls(chain.n_states, 1, chain.discount)
        model.counts[:, 0, :] = chain.transition
        model.reward_estimate[:, 0, :] = chain.reward
        model.continuation = np.where(chain.terminal_mask, 0.0, chain.discount)
        return model

    @classmethod
    def from_mdp(cls, mdp: TabularMDP) -> "ForwardModel":
        """Exact model of an MDP."""
        model = cls(mdp.n_states, mdp.n_actions, mdp.discount)
        model.counts = np.array(mdp.transition)
        model.reward_estimate = np.array(mdp.reward)
        model.continuation = np.where(mdp.terminal_mask, 0.0, mdp.discount)
        return model

    def update(self, state, action, reward, next_state, terminated, step_size=None):
        alpha = self.step_size if step_size is None else step_size
        _check_transition(self.n_states, self.n_actions, state, action, next_state)
        self.counts[state, action, next_state] += 1.0
        self.reward_estimate[state, action, next_state] += alpha * (
            reward - self.reward_estimate[state, action, next_state]
        )
        arrived = 0.0 if terminated else self.discount
        self.continuation[next_state] += alpha * (arrived - self.continuation[next_state])

    def visited(self, state, action) -> bool:
        return float(self.counts[state, action].sum()) > 0.0

    def transition_probs(self, state, action) -> np.ndarray | None:
        """Estimated successor distribution, or None if (state, action) is unvisited."""
        row = self.counts[state, action]
        total = row.sum()
        if total == 0.0:
            return None
        return row / total


class BackwardModel:
    """Empirical predecessor model: who led here, and by which action.

    ``counts[u, a, t]`` accumulates observations of (u, a) producing ``t``,
    indexed by the destination on the last axis. Queried for a destination,
    the model answers with a joint distribution over predecessor
    (state, action) pairs. ``reward_estimate[u, t]`` keeps a running average
    of the reward paid on the edge u -> t.
    """

    def __init__(self, n_states: int, n_actions: int, discount: float, step_size: float = 1.0):
        if not (0.0 < discount <= 1.0):
            raise ValidationError(f"discount must lie in (0, 1], got {discount}")
        self.n_states = n_states
        self.n_actions = n_actions
        self.discount = discount
        self.step_size = step_size
        self.counts = np.zeros((n_states, n_actions, n_states))
        self.reward_estimate = np.zeros((n_states, n_states))

    @classmethod
    def from_reversed_chain(cls, reversed_chain: TabularChain) -> "BackwardModel":
        """Exact single-action predecessor model from a time-reversed chain.

        The reversed chain's row for destination ``t`` is exactly the
        predecessor distribution, and its (re-indexed) rewards are the
        forward edge rewards.
        """
        model = cls(reversed_chain.n_states, 1, reversed_chain.discount)
        model.counts[:, 0, :] = reversed_chain.transition.T
        model.reward_estimate = reversed_chain.reward.T
        return model

    def update(self, state, action, reward, next_state, step_size=None):
        alpha = self.step_size if step_size is None else step_size
        _check_transition(self.n_states, self.n_actions, state, action, next_state)
        self.counts[state, action, next_state] += 1.0
        self.reward_estimate[state, next_state] += alpha * (reward - self.reward_estimate[state, next_state])

    def visited(self, next_state) -> bool:
        return float(self.counts[:, :, next_state].sum()) > 0.0

    def joint_distribution(self, next_state) -> np.ndarray | None:
        """(n_states, n_actions) predecessor distribution, or None if unvisited."""
        block = self.counts[:, :, next_state]
        total = block.sum()
        if total == 0.0:
            return None
        return block / total

    def state_distribution(self, next_state) -> np.ndarray | None:
        """Predecessor distribution marginalized over actions, or None."""
        joint = self.joint_distribution(next_state)
        if joint is None:
            return None
        return joint.sum(axis=1)

    def sample_predecessor(self, next_state, rng: np.random.Generator) -> tuple[int, int] | None:
        """Draw one (state, action) predecessor of ``next_state``, or None."""
        joint = self.joint_distribution(next_state)
        if joint is None:
            return None
        flat = joint.ravel()
        idx = int(rng.choice(flat.size, p=flat))
        return divmod(idx, self.n_actions)
