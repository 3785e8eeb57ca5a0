"""Action-conditioned predecessor distributions, tethered to a policy."""

from __future__ import annotations

import numpy as np

from ..core import Policy, StationaryDistribution, TabularMDP
from ..errors import DegenerateDistributionError, ValidationError


def action_conditioned_backward(
    mdp: TabularMDP,
    policy: Policy,
    sd: StationaryDistribution,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior over predecessor states given the destination and the action taken.

    Bayes' rule over the stationary flow: the joint weight of arriving at
    ``t`` from ``(u, a)`` is ``d[u] * policy[u, a] * P[u, a, t] / d[t]``.
    Marginalizing over ``u`` gives the backward action probabilities; the
    quotient gives the conditional.

    Args:
        mdp: environment dynamics.
        policy: the behaviour the predecessors are tethered to.
        sd: stationary distribution of the induced chain, strictly positive.

    Returns:
        ``(conditional, action_marginal)`` where ``conditional[t, a, u]`` is
        the probability that ``u`` preceded ``t`` given the incoming action
        was ``a``, and ``action_marginal[t, a]`` the probability that the
        incoming action was ``a``. Slices with zero marginal are undefined
        and filled with NaN; mixing the conditional by the action marginal
        recovers the state-only predecessor distribution.

    Raises:
        DegenerateDistributionError: if any stationary mass is zero.
        ValidationError: on shape mismatch.
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(
            f"policy shape {policy.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )
    d = sd.d
    if d.shape != (mdp.n_states,):
        raise ValidationError(f"distribution shape {d.shape} does not match {mdp.n_states} states")
    if np.any(d <= 0.0):
        raise DegenerateDistributionError("conditioning requires strictly positive stationary mass")
    joint = np.einsum("u,ua,uat->tau", d, policy.probs, mdp.transition) / d[:, None, None]
    action_marginal = joint.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        conditional = joint / action_marginal[:, :, None]
    conditional[action_marginal == 0.0] = np.nan
    return conditional, action_marginal
