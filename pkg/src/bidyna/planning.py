"""Dyna planning: expected backups from learned models, forward and backward.

A planning step picks a reference state out of the latest interaction,
queries a model there, and applies an expected backup. Forward planning
refreshes the reference state's own estimate from where the model says it
leads. Backward planning pushes the reference state's freshly grounded value
out to everything the model says could have led there, all predecessors in
one pass, weighted by their posterior probability. Within one planning step
targets are read from the pre-update table; consecutive planning steps see
each other's writes.

Two guarantees are enforced here rather than assumed: reads never write (the
bootstrap source is only read), and terminal states keep value exactly 0 (a
backup never writes into a terminal entry).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .envs import ChainEnv, MazeEnv, StepOutcome
from .errors import ValidationError
from .learn import LinearSchedule, epsilon_greedy, q_learning_update, td0_update
from .models import BackwardModel, ForwardModel

FORWARD = "forward"
BACKWARD = "backward"
PREVIOUS_STATE = "previous"
CURRENT_STATE = "current"


@dataclass(frozen=True)
class PlannerConfig:
    """How planning interleaves with one learning loop.

    Args:
        direction: "forward", "backward", or None for no planning at all.
        reference: which end of the latest transition to plan from,
            "previous" or "current".
        steps_per_interaction: planning steps per environment step.
        model_free_learning_enabled: whether the direct TD / Q-learning
            update runs alongside planning.
        planning_step_size: fixed planning rate; None follows the learning
            rate schedule.
    """

    direction: str | None = None
    reference: str = CURRENT_STATE
    steps_per_interaction: int = 1
    model_free_learning_enabled: bool = True
    planning_step_size: float | None = None

    def __post_init__(self):
        if self.direction not in (None, FORWARD, BACKWARD):
            raise ValidationError(f"direction must be 'forward', 'backward' or None, got {self.direction!r}")
        if self.reference not in (PREVIOUS_STATE, CURRENT_STATE):
            raise ValidationError(f"reference must be 'previous' or 'current', got {self.reference!r}")
        if self.steps_per_interaction < 0:
            raise ValidationError("steps_per_interaction must be non-negative")


@dataclass
class RateSchedules:
    """Learning-rate and exploration schedules driving one run."""

    alpha: LinearSchedule
    alpha_model: LinearSchedule
    epsilon: LinearSchedule | None = None


def select_reference_state(state: int, next_state: int, reference: str) -> int:
    """The transition endpoint planning starts from."""
    if reference == PREVIOUS_STATE:
        return state
    if reference == CURRENT_STATE:
        return next_state
    raise ValidationError(f"unknown reference frame {reference!r}")


def forward_planning_update_v(
    values: np.ndarray,
    model: ForwardModel,
    ref_state: int,
    step_size: float,
    terminal_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Expected TD backup of v(ref_state) from the model's successor row.

    Marginalizes the model's action axis by visit frequency (a chain model
    has a single action, so this is just its row). No-op if the reference
    state was never left, or is terminal (terminal values stay pinned at 0).
    """
    if terminal_mask is not None and terminal_mask[ref_state]:
        return values
    weights = model.counts[ref_state]
    total = weights.sum()
    if total == 0.0:
        return values
    probs = weights / total
    target = float(
        np.einsum("at,at->", probs, model.reward_estimate[ref_state])
        + (probs.sum(axis=0) * model.continuation) @ values
    )
    values[ref_state] += step_size * (target - values[ref_state])
    return values


def backward_planning_update_v(
    values: np.ndarray,
    model: BackwardModel,
    ref_state: int,
    step_size: float,
    terminal_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Distributional backup of all predecessors from v(ref_state).

    Every state the model considers a possible predecessor of the reference
    state moves toward the one-step target through the reference state,
    scaled by its predecessor probability. Only predecessor entries are
    written; the bootstrap source is read, never written. No-op if the
    reference state has never been reached.
    """
    probs = model.state_distribution(ref_state)
    if probs is None:
        return values
    if terminal_mask is not None:
        bootstrap = 0.0 if terminal_mask[ref_state] else values[ref_state]
        probs = np.where(terminal_mask, 0.0, probs)
    else:
        bootstrap = values[ref_state]
    targets = model.reward_estimate[:, ref_state] + model.discount * bootstrap
    values += step_size * probs * (targets - values)
    return values


def forward_planning_update_q(
    q: np.ndarray,
    model: ForwardModel,
    ref_state: int,
    step_size: float,
    terminal_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Expected Q backup of every visited action at the reference state.

    Targets for all actions are computed against the pre-update table before
    any write happens.
    """
    if terminal_mask is not None and terminal_mask[ref_state]:
        return q
    greedy = q.max(axis=1)
    boot = model.continuation * greedy
    for action in range(model.n_actions):
        row = model.counts[ref_state, action]
        total = row.sum()
        if total == 0.0:
            continue
        probs = row / total
        target = float(probs @ (model.reward_estimate[ref_state, action] + boot))
        q[ref_state, action] += step_size * (target - q[ref_state, action])
    return q


def backward_planning_update_q(
    q: np.ndarray,
    model: BackwardModel,
    ref_state: int,
    step_size: float,
    terminal_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Distributional backup of all predecessor (state, action) pairs at once.

    Each pair moves toward the edge reward into the reference state plus the
    discounted greedy value there, weighted by its posterior probability of
    having produced the reference state. The greedy bootstrap and all updated
    entries are read from the pre-update table.
    """
    joint = model.joint_distribution(ref_state)
    if joint is None:
        return q
    if terminal_mask is not None:
        bootstrap = 0.0 if terminal_mask[ref_state] else float(q[ref_state].max())
        joint = joint * (~terminal_mask)[:, None]
    else:
        bootstrap = float(q[ref_state].max())
    targets = model.reward_estimate[:, ref_state] + model.discount * bootstrap
    q += step_size * joint * (targets[:, None] - q)
    return q


@dataclass
class PredictionRun:
    """Per-step value-error curve and the final value table of one run."""

    errors: np.ndarray
    values: np.ndarray


@dataclass
class ControlRun:
    """Per-episode steps and discounted returns, plus the final Q table.

    ``probe`` holds per-episode values of the optional evaluation callable
    (None when no probe was requested).
    """

    steps: np.ndarray
    returns: np.ndarray
    q: np.ndarray
    probe: np.ndarray | None = None


def run_dyna_prediction(
    env: ChainEnv,
    config: PlannerConfig,
    schedules: RateSchedules,
    n_interactions: int,
    reference_values: np.ndarray,
    model: ForwardModel | BackwardModel | None = None,
    model_learning_enabled: bool = True,
) -> PredictionRun:
    """Online policy evaluation with optional Dyna planning on a chain MRP.

    Per interaction, in order: step the environment, update the model, apply
    the TD(0) update (if enabled), then run the configured planning steps
    from the reference state. The recorded error is the Euclidean distance
    between the value table and ``reference_values`` after each interaction.
    Episode boundaries reset the environment without producing a learning or
    model datum. Schedules advance per interaction.

    Args:
        env: chain environment session (owns the stepping randomness).
        config: planning arrangement.
        schedules: alpha drives TD and (unless overridden) planning;
            alpha_model drives model estimates.
        n_interactions: total environment steps; also the curve length.
        reference_values: ground-truth values for the error curve.
        model: planning model. Required when planning; pass a prebuilt exact
            model with ``model_learning_enabled=False`` for true-model runs.
        model_learning_enabled: whether observed transitions update ``model``.
    """
    if config.direction is not None and model is None:
        raise ValidationError("planning requires a model")
    if config.direction == FORWARD and not isinstance(model, ForwardModel):
        raise ValidationError("forward planning requires a ForwardModel")
    if config.direction == BACKWARD and not isinstance(model, BackwardModel):
        raise ValidationError("backward planning requires a BackwardModel")
    values = np.zeros(env.n_states)
    terminal = env.terminal_mask
    errors = np.empty(n_interactions)
    state = env.reset()
    for t in range(n_interactions):
        alpha = schedules.alpha.value(t)
        out = env.step()
        if model is not None and model_learning_enabled:
            rate = schedules.alpha_model.value(t)
            if isinstance(model, ForwardModel):
                model.update(state, 0, out.reward, out.next_state, out.terminated, step_size=rate)
            else:
                model.update(state, 0, out.reward, out.next_state, step_size=rate)
        if config.model_free_learning_enabled:
            td0_update(values, state, out.reward, out.discount, out.next_state, alpha)
        if config.direction is not None:
            ref = select_reference_state(state, out.next_state, config.reference)
            plan_alpha = config.planning_step_size if config.planning_step_size is not None else alpha
            for _ in range(config.steps_per_interaction):
                if config.direction == BACKWARD:
                    backward_planning_update_v(values, model, ref, plan_alpha, terminal)
                else:
                    forward_planning_update_v(values, model, ref, plan_alpha, terminal)
        errors[t] = float(np.linalg.norm(values - reference_values))
        state = out.next_state
        if out.terminated or out.truncated:
            state = env.reset()
    return PredictionRun(errors, values)


def run_dyna_control(
    env: MazeEnv,
    config: PlannerConfig,
    schedules: RateSchedules,
    n_episodes: int,
    agent_rng: np.random.Generator,
    model: ForwardModel | BackwardModel | None = None,
    model_learning_enabled: bool = True,
    schedule_unit: str = "step",
    episode_probe: Callable[[np.ndarray], float] | None = None,
) -> ControlRun:
    """Online control with optional Dyna planning on an episodic environment.

    Same per-step order as prediction, with epsilon-greedy acting and
    Q-learning as the direct update. Records steps-to-termination and the
    discounted return of every episode. Schedules advance per environment
    step by default ("step"), or per episode ("episode"). When given,
    ``episode_probe`` is called with the Q table after every episode and its
    values are collected on the result; it must not mutate the table.

    Planning consumes no randomness, so with planning disabled the Q table
    trajectory is identical to a bare Q-learning agent on the same streams.
    """
    if config.direction is not None and model is None:
        raise ValidationError("planning requires a model")
    if config.direction == FORWARD and not isinstance(model, ForwardModel):
        raise ValidationError("forward planning requires a ForwardModel")
    if config.direction == BACKWARD and not isinstance(model, BackwardModel):
        raise ValidationError("backward planning requires a BackwardModel")
    if schedule_unit not in ("episode", "step"):
        raise ValidationError(f"schedule_unit must be 'episode' or 'step', got {schedule_unit!r}")
    if schedules.epsilon is None:
        raise ValidationError("control needs an epsilon schedule")
    q = np.zeros((env.n_states, env.n_actions))
    terminal = env.terminal_mask
    steps = np.zeros(n_episodes, dtype=int)
    returns = np.zeros(n_episodes)
    probed = np.zeros(n_episodes) if episode_probe is not None else None
    clock = 0
    for episode in range(n_episodes):
        state = env.reset()
        discount_acc = 1.0
        while True:
            tick = episode if schedule_unit == "episode" else clock
            alpha = schedules.alpha.value(tick)
            epsilon = schedules.epsilon.value(tick)
            action = epsilon_greedy(q, state, epsilon, agent_rng)
            out = env.step(action)
            if model is not None and model_learning_enabled:
                if isinstance(model, ForwardModel):
                    model.update(state, action, out.reward, out.next_state, out.terminated,
                                 step_size=schedules.alpha_model.value(tick))
                else:
                    model.update(state, action, out.reward, out.next_state,
                                 step_size=schedules.alpha_model.value(tick))
            if config.model_free_learning_enabled:
                q_learning_update(q, state, action, out.reward, out.discount, out.next_state, alpha)
            if config.direction is not None:
                ref = select_reference_state(state, out.next_state, config.reference)
                plan_alpha = config.planning_step_size if config.planning_step_size is not None else alpha
                for _ in range(config.steps_per_interaction):
                    if config.direction == BACKWARD:
                        backward_planning_update_q(q, model, ref, plan_alpha, terminal)
                    else:
                        forward_planning_update_q(q, model, ref, plan_alpha, terminal)
            steps[episode] += 1
            returns[episode] += discount_acc * out.reward
            discount_acc *= env.discount
            clock += 1
            state = out.next_state
            if out.terminated or out.truncated:
                break
        if probed is not None:
            probed[episode] = episode_probe(q)
    return ControlRun(steps, returns, q, probed)
