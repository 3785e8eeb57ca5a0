"""Exact algebra on tabular Markov chains.

This module holds the analytic backbone of the package: immutable chain and
MDP containers, policy-induced chain construction, stationary distributions,
time reversal, closed-form value solving, and the offline equivalence between
return-based and TD-error-based episode updates.

All container types validate on construction and freeze their arrays, so a
value that exists is a value that satisfies its invariants. Operations are
pure: they take containers in and hand new containers (or fresh arrays) back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDistributionError, NumericalError, ValidationError

ROW_SUM_TOL = 1e-12
STATIONARY_RESIDUAL_TOL = 1e-10
BELLMAN_RESIDUAL_TOL = 1e-10


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _check_row_stochastic(matrix: np.ndarray, name: str) -> None:
    if np.any(matrix < -ROW_SUM_TOL) or np.any(matrix > 1.0 + ROW_SUM_TOL):
        raise ValidationError(f"{name} entries must lie in [0, 1]")
    sums = matrix.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > ROW_SUM_TOL:
        raise ValidationError(f"{name} rows must sum to 1 (worst deviation {worst:.3e})")


@dataclass(frozen=True)
class TabularChain:
    """A Markov reward process over a finite state set.

    ``transition[s, t]`` is the probability of moving from state ``s`` to
    state ``t`` and ``reward[s, t]`` the expected reward collected on that
    move. ``terminal_mask`` marks episode boundaries: reaching a marked state
    ends the episode and zeroes the continuation. With restart semantics
    (see :func:`make_ergodic`) terminal rows point back at the initial-state
    distribution so the chain can also be analysed as a continuing process.

    Args:
        transition: (n, n) row-stochastic matrix.
        reward: (n, n) per-edge expected rewards.
        discount: scalar in (0, 1].
        terminal_mask: (n,) booleans; defaults to no terminal states.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    terminal_mask: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
            raise ValidationError(f"transition must be square, got shape {transition.shape}")
        n = transition.shape[0]
        reward = np.asarray(self.reward, dtype=float)
        if reward.shape != (n, n):
            raise ValidationError(f"reward shape {reward.shape} does not match transition {transition.shape}")
        if not (0.0 < self.discount <= 1.0):
            raise ValidationError(f"discount must lie in (0, 1], got {self.discount}")
        _check_row_stochastic(transition, "transition")
        mask = self.terminal_mask
        if mask is None:
            mask = np.zeros(n, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n,):
            raise ValidationError(f"terminal_mask shape {mask.shape} does not match {n} states")
        object.__setattr__(self, "transition", _frozen_array(transition))
        object.__setattr__(self, "reward", _frozen_array(reward))
        object.__setattr__(self, "terminal_mask", _frozen_array(mask, dtype=bool))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


@dataclass(frozen=True)
class TabularMDP:
    """A finite MDP with dense transition and reward tensors.

    ``transition[s, a, t]`` is the probability of landing in ``t`` after
    taking action ``a`` in ``s``; ``reward[s, a, t]`` the expected reward for
    that transition.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    terminal_mask: np.ndarray = None  # type: ignore[assignment]
    initial_distribution: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValidationError(f"transition must have shape (n, m, n), got {transition.shape}")
        n = transition.shape[0]
        reward = np.asarray(self.reward, dtype=float)
        if reward.shape != transition.shape:
            raise ValidationError(f"reward shape {reward.shape} does not match transition {transition.shape}")
        if not (0.0 < self.discount <= 1.0):
            raise ValidationError(f"discount must lie in (0, 1], got {self.discount}")
        _check_row_stochastic(transition, "transition")
        mask = self.terminal_mask
        if mask is None:
            mask = np.zeros(n, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n,):
            raise ValidationError(f"terminal_mask shape {mask.shape} does not match {n} states")
        init = self.initial_distribution
        if init is None:
            init = np.full(n, 1.0 / n)
        init = np.asarray(init, dtype=float)
        if init.shape != (n,):
            raise ValidationError(f"initial_distribution shape {init.shape} does not match {n} states")
        if np.any(init < 0.0) or abs(float(init.sum()) - 1.0) > ROW_SUM_TOL:
            raise ValidationError("initial_distribution must be a probability vector")
        object.__setattr__(self, "transition", _frozen_array(transition))
        object.__setattr__(self, "reward", _frozen_array(reward))
        object.__setattr__(self, "terminal_mask", _frozen_array(mask, dtype=bool))
        object.__setattr__(self, "initial_distribution", _frozen_array(init))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class Policy:
    """A stationary stochastic policy: ``probs[s, a]`` sums to 1 over ``a``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ValidationError(f"policy must be a (states, actions) matrix, got shape {probs.shape}")
        _check_row_stochastic(probs, "policy")
        object.__setattr__(self, "probs", _frozen_array(probs))

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


def uniform_policy(n_states: int, n_actions: int) -> Policy:
    return Policy(np.full((n_states, n_actions), 1.0 / n_actions))


@dataclass(frozen=True)
class StationaryDistribution:
    """State-visitation fixed point ``d = d P`` of a chain.

    ``residual`` records the achieved ``max |dP - d|`` so downstream users can
    judge how much to trust derived quantities.
    """

    d: np.ndarray
    residual: float

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1:
            raise ValidationError(f"d must be a vector, got shape {d.shape}")
        if np.any(d < 0.0):
            raise ValidationError("stationary distribution entries must be non-negative")
        if abs(float(d.sum()) - 1.0) > STATIONARY_RESIDUAL_TOL:
            raise ValidationError("stationary distribution must sum to 1")
        object.__setattr__(self, "d", _frozen_array(d))


class Transition(NamedTuple):
    """One environment interaction. ``discount`` is 0 exactly at termination."""

    state: int
    action: int
    reward: float
    discount: float
    next_state: int


@dataclass(frozen=True)
class Episode:
    """A chained sequence of transitions, optionally ending in termination.

    Consecutive transitions must chain (``steps[t].next_state ==
    steps[t + 1].state``). All discounts before the final step must be equal,
    and the final discount must be 0 exactly when ``terminated`` is True.
    """

    steps: tuple[Transition, ...]
    terminated: bool

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps:
            raise ValidationError("an episode needs at least one transition")
        for t in range(len(steps) - 1):
            if steps[t].next_state != steps[t + 1].state:
                raise ValidationError(f"episode breaks at step {t}: {steps[t].next_state} != {steps[t + 1].state}")
            if steps[t].discount <= 0.0:
                raise ValidationError(f"non-final step {t} has non-positive discount")
        internal = {s.discount for s in steps[:-1]}
        if len(internal) > 1:
            raise ValidationError("non-final discounts must all be equal")
        last = steps[-1].discount
        if self.terminated and last != 0.0:
            raise ValidationError("a terminated episode must end with discount 0")
        if not self.terminated and last == 0.0:
            raise ValidationError("a non-terminated episode must not end with discount 0")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)


def induce_chain(mdp: TabularMDP, policy: Policy) -> TabularChain:
    """Collapse an MDP under a fixed policy into a chain.

    The induced transition matrix mixes action kernels by policy weight and
    the induced edge reward is the policy- and transition-weighted average of
    the action rewards, defined as 0 on edges with zero probability.

    Raises:
        ValidationError: if the policy shape does not match the MDP.
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(
            f"policy shape {policy.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )
    p = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    weighted = np.einsum("sa,sat,sat->st", policy.probs, mdp.transition, mdp.reward)
    r = np.divide(weighted, p, out=np.zeros_like(weighted), where=p > 0.0)
    # Normalization guards against einsum round-off breaking row sums.
    p = p / p.sum(axis=1, keepdims=True)
    return TabularChain(p, r, mdp.discount, mdp.terminal_mask)


def make_ergodic(chain: TabularChain, initial_distribution: np.ndarray) -> TabularChain:
    """Rewire terminal rows to restart from ``initial_distribution`` at zero reward.

    The result treats episode boundaries as ordinary transitions, which makes
    an episodic chain amenable to stationary-distribution analysis. The
    terminal mask is preserved so value computations still know where
    episodes end.
    """
    init = np.asarray(initial_distribution, dtype=float)
    if init.shape != (chain.n_states,):
        raise ValidationError(f"initial distribution shape {init.shape} does not match {chain.n_states} states")
    if np.any(init < 0.0) or abs(float(init.sum()) - 1.0) > ROW_SUM_TOL:
        raise ValidationError("initial distribution must be a probability vector")
    p = np.array(chain.transition)
    r = np.array(chain.reward)
    p[chain.terminal_mask] = init
    r[chain.terminal_mask] = 0.0
    return TabularChain(p, r, chain.discount, chain.terminal_mask)


def _stationary_direct(p: np.ndarray) -> np.ndarray:
    """Solve d(P - I) = 0 with the normalization row appended, by least squares."""
    n = p.shape[0]
    a = np.vstack([p.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    d, *_ = np.linalg.lstsq(a, b, rcond=None)
    return d


def stationary_distribution(
    chain: TabularChain,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
) -> StationaryDistribution:
    """Stationary distribution of a chain, accurate to ``max |dP - d| < 1e-10``.

    The solver runs power iteration from the uniform vector. If the residual
    stalls (periodic or very slowly mixing chains oscillate rather than
    converge) it first mixes in 1e-3 of the uniform distribution as damping,
    and if that still cannot hit the accuracy target it falls back to a direct
    least-squares solve of the fixed-point equations. Whatever the route, the
    result is polished with extra power steps while they keep helping.

    Args:
        chain: the chain, assumed irreducible (rewire terminals first via
            :func:`make_ergodic` if needed).
        tol: iteration stopping tolerance on the per-step change.
        max_iter: power-iteration budget.

    Raises:
        NumericalError: if not even the direct solve reaches the residual
            target, for example on reducible chains. Carries the residual.
    """
    p = chain.transition
    n = chain.n_states
    uniform = np.full(n, 1.0 / n)
    d = uniform.copy()
    damping = 0.0
    check = 1000
    prev_window_res = np.inf
    res = np.inf
    iterations = 0
    while iterations < max_iter:
        stop = False
        for _ in range(min(check, max_iter - iterations)):
            d_next = d @ p
            if damping > 0.0:
                d_next = (1.0 - damping) * d_next + damping * uniform
            d_next /= d_next.sum()
            res = float(np.max(np.abs(d_next - d)))
            d = d_next
            iterations += 1
            if res < tol:
                stop = True
                break
        if stop:
            break
        if res > 0.9 * prev_window_res:
            # No real progress over a whole window: oscillation or stall.
            if damping == 0.0:
                damping = 1e-3
            else:
                break
        prev_window_res = res

    residual = float(np.max(np.abs(d @ p - d)))
    if residual > STATIONARY_RESIDUAL_TOL or damping > 0.0:
        d = _stationary_direct(p)
        if np.any(~np.isfinite(d)):
            raise NumericalError("stationary solve produced non-finite values", residual=residual)
        d = np.clip(d, 0.0, None)
        total = float(d.sum())
        if total <= 0.0:
            raise NumericalError("stationary solve collapsed to zero", residual=residual)
        d /= total
        residual = float(np.max(np.abs(d @ p - d)))

    # Polish: extra power steps are free accuracy while the residual drops.
    for _ in range(100):
        d_next = d @ p
        d_next /= d_next.sum()
        next_res = float(np.max(np.abs(d_next @ p - d_next)))
        if next_res >= residual:
            break
        d, residual = d_next, next_res

    if residual > STATIONARY_RESIDUAL_TOL:
        raise NumericalError("stationary distribution did not converge", residual=residual)
    return StationaryDistribution(np.clip(d, 0.0, None) / np.clip(d, 0.0, None).sum(), residual)


def reverse_chain(chain: TabularChain, sd: StationaryDistribution) -> TabularChain:
    """Time reversal of ``chain`` with respect to its stationary distribution.

    The reversed kernel redistributes each forward edge by Bayes' rule,
    ``reversed[s, t] = d[t] * transition[t, s] / d[s]``, so flow balance
    ``d[s] * reversed[s, t] == d[t] * transition[t, s]`` holds by
    construction. Rewards are re-indexed, not changed: the reward for the
    reversed move ``s -> t`` is the forward reward of ``t -> s``. Rows are
    renormalized to absorb the (tiny) stationary residual; the terminal mask
    and discount carry over unchanged.

    Raises:
        DegenerateDistributionError: if any state has zero stationary mass.
        ValidationError: on dimension mismatch.
    """
    d = sd.d
    if d.shape != (chain.n_states,):
        raise ValidationError(f"distribution over {d.shape[0]} states does not match chain with {chain.n_states}")
    if np.any(d <= 0.0):
        raise DegenerateDistributionError("time reversal needs strictly positive stationary mass everywhere")
    reversed_p = (chain.transition.T * d[None, :]) / d[:, None]
    reversed_p = reversed_p / reversed_p.sum(axis=1, keepdims=True)
    return TabularChain(reversed_p, chain.reward.T, chain.discount, chain.terminal_mask)


def expected_rewards(chain: TabularChain) -> np.ndarray:
    """Per-state expected one-step reward ``sum_t transition[s, t] * reward[s, t]``."""
    return np.einsum("st,st->s", chain.transition, chain.reward)


def exact_value(chain: TabularChain) -> np.ndarray:
    """Closed-form state values by direct linear solve.

    Solves ``v = rbar + discount * P v`` with the continuation zeroed on
    entering a terminal state, and the terminal states themselves pinned to
    value 0 (an episode that has ended collects nothing more).

    Raises:
        NumericalError: if the Bellman system is singular (for example a
            continuing chain with discount exactly 1) or the solution fails
            the residual check.
    """
    n = chain.n_states
    rbar = expected_rewards(chain)
    continuing = ~chain.terminal_mask
    a = np.eye(n) - chain.discount * (chain.transition * continuing[None, :].astype(float))
    b = rbar.copy()
    if np.any(chain.terminal_mask):
        idx = np.where(chain.terminal_mask)[0]
        a[idx] = 0.0
        a[idx, idx] = 1.0
        b[idx] = 0.0
    try:
        v = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Bellman system is singular: {exc}") from exc
    residual = bellman_residual(chain, v)
    if not np.isfinite(residual) or residual > BELLMAN_RESIDUAL_TOL:
        raise NumericalError("exact value solve failed the Bellman residual check", residual=residual)
    return v


def bellman_residual(chain: TabularChain, values: np.ndarray) -> float:
    """Max absolute Bellman error of ``values`` under the termination convention."""
    values = np.asarray(values, dtype=float)
    if values.shape != (chain.n_states,):
        raise ValidationError(f"values shape {values.shape} does not match {chain.n_states} states")
    continuing = (~chain.terminal_mask).astype(float)
    backed_up = expected_rewards(chain) + chain.discount * (chain.transition @ (continuing * values))
    errors = values - backed_up
    errors[chain.terminal_mask] = values[chain.terminal_mask]
    return float(np.max(np.abs(errors)))


def episode_offline_updates(
    episode: Episode,
    values: np.ndarray,
    step_size: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Total offline tabular value update of an episode, computed two ways.

    The first route accumulates the return-based update
    ``step_size * (G_t - v(S_t))`` at each visited state. The second route
    accumulates TD errors against a discount-decayed visitation trace. Both
    are computed from scratch against the same fixed ``values``; for a
    terminated episode the two totals agree identically, which is the
    algebraic heart of learning from the future versus learning from the
    past. Callers assert the equality; this function just reports both.

    Args:
        episode: a terminated episode.
        values: (n,) fixed value table the updates are evaluated against.
        step_size: scalar learning rate applied to both totals.

    Returns:
        ``(return_based, trace_based)`` total update vectors, shaped like
        ``values``.

    Raises:
        ValidationError: if the episode did not terminate, or on state
            indices outside the table.
    """
    if not episode.terminated:
        raise ValidationError("offline update equivalence is only defined for terminated episodes")
    values = np.asarray(values, dtype=float)
    n_states = values.shape[0]
    steps = episode.steps
    for s in steps:
        if not (0 <= s.state < n_states and 0 <= s.next_state < n_states):
            raise ValidationError(f"transition {s} indexes outside a {n_states}-state table")
    gamma = steps[0].discount if len(steps) > 1 else 0.0

    return_based = np.zeros(n_states)
    g = 0.0
    targets = np.empty(len(steps))
    for t in range(len(steps) - 1, -1, -1):
        g = steps[t].reward + steps[t].discount * g
        targets[t] = g
    for t, tr in enumerate(steps):
        return_based[tr.state] += step_size * (targets[t] - values[tr.state])

    trace_based = np.zeros(n_states)
    trace = np.zeros(n_states)
    for tr in steps:
        trace *= gamma
        trace[tr.state] += 1.0
        td_error = tr.reward + tr.discount * values[tr.next_state] - values[tr.state]
        trace_based += step_size * td_error * trace
    return return_based, trace_based


def sample_episode(
    chain: TabularChain,
    initial_distribution: np.ndarray,
    rng: np.random.Generator,
    max_steps: int = 10_000,
    reward_noise: Callable[[np.random.Generator], float] | None = None,
) -> Episode:
    """Roll one episode from an episodic chain (helper for tests and demos).

    Rewards are the chain's expected edge rewards plus optional sampled noise.

    Raises:
        ValidationError: if no terminal state is reached within ``max_steps``.
    """
    init = np.asarray(initial_distribution, dtype=float)
    state = int(rng.choice(chain.n_states, p=init))
    steps: list[Transition] = []
    for _ in range(max_steps):
        nxt = int(rng.choice(chain.n_states, p=chain.transition[state]))
        reward = float(chain.reward[state, nxt])
        if reward_noise is not None:
            reward += reward_noise(rng)
        terminal = bool(chain.terminal_mask[nxt])
        discount = 0.0 if terminal else chain.discount
        steps.append(Transition(state, 0, reward, discount, nxt))
        if terminal:
            return Episode(tuple(steps), terminated=True)
        state = nxt
    raise ValidationError(f"no terminal state reached within {max_steps} steps")
