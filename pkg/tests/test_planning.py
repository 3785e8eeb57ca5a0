"""Planning backups and the Dyna loops that drive them."""

import numpy as np
import pytest

from bidyna.core import TabularMDP, exact_value, reverse_chain, stationary_distribution
from bidyna.envs import ChainEnv, LeveledChainSpec, MazeEnv, MazeSpec, build_leveled_chain, default_layout
from bidyna.errors import ValidationError
from bidyna.learn import LinearSchedule, epsilon_greedy, q_learning_update, td0_update
from bidyna.models import BackwardModel, ForwardModel
from bidyna.planning import (
    BACKWARD,
    CURRENT_STATE,
    FORWARD,
    PREVIOUS_STATE,
    PlannerConfig,
    RateSchedules,
    backward_planning_update_q,
    backward_planning_update_v,
    forward_planning_update_q,
    forward_planning_update_v,
    run_dyna_control,
    run_dyna_prediction,
    select_reference_state,
)

from conftest import greedy_rollout_steps, random_ergodic_chain


def constant(x):
    return LinearSchedule(x, x, 1)


def oracle_q_star(mdp, iters=200):
    """Plain synchronous value iteration on Q."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    mean_reward = np.einsum("sat,sat->sa", mdp.transition, mdp.reward)
    for _ in range(iters):
        greedy = q.max(axis=1) * (~mdp.terminal_mask)
        q = mean_reward + mdp.discount * mdp.transition @ greedy
    return q


def random_mdp(rng, n=4, m=2, discount=0.5):
    p = rng.uniform(0.1, 1.0, size=(n, m, n))
    p /= p.sum(axis=2, keepdims=True)
    r = rng.normal(size=(n, m, n))
    return TabularMDP(p, r, discount, np.zeros(n, dtype=bool), np.full(n, 1.0 / n))


# --- reference selection and config -----------------------------------------------

def test_reference_selection():
    assert select_reference_state(3, 8, PREVIOUS_STATE) == 3
    assert select_reference_state(3, 8, CURRENT_STATE) == 8
    with pytest.raises(ValidationError):
        select_reference_state(3, 8, "midpoint")


def test_planner_config_validation():
    with pytest.raises(ValidationError):
        PlannerConfig(direction="sideways")
    with pytest.raises(ValidationError):
        PlannerConfig(reference="midpoint")
    with pytest.raises(ValidationError):
        PlannerConfig(steps_per_interaction=-1)
    assert PlannerConfig().direction is None


# --- forward value backups ----------------------------------------------------------

def test_forward_v_skips_unvisited_and_terminal():
    model = ForwardModel(3, 1, 0.9)
    v = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(forward_planning_update_v(v.copy(), model, 0, 1.0), v)
    model.update(0, 0, 1.0, 1, terminated=False)
    mask = np.array([True, False, False])
    assert np.array_equal(forward_planning_update_v(v.copy(), model, 0, 1.0, mask), v)


def test_forward_v_single_edge_arithmetic():
    model = ForwardModel(2, 1, 0.9)
    model.update(0, 0, 2.0, 1, terminated=False)
    v = np.array([0.0, 3.0])
    forward_planning_update_v(v, model, 0, 0.5)
    assert v[0] == pytest.approx(0.5 * (2.0 + 0.9 * 3.0))
    assert v[1] == 3.0


def test_forward_v_sweeps_contract_to_exact_values(rng):
    chain = random_ergodic_chain(rng, 5)
    truth = exact_value(chain)
    model = ForwardModel.from_chain(chain)
    v = np.zeros(5)
    prev_err = np.abs(v - truth).max()
    for _ in range(300):
        for ref in range(5):
            forward_planning_update_v(v, model, ref, 1.0)
        err = np.abs(v - truth).max()
        assert err <= chain.discount * prev_err + 1e-12
        prev_err = err
    assert prev_err < 1e-6


# --- backward value backups ----------------------------------------------------------

def test_backward_v_skips_unreached():
    model = BackwardModel(3, 1, 0.9)
    v = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(backward_planning_update_v(v.copy(), model, 1, 1.0), v)


def test_backward_v_unique_predecessor_arithmetic():
    model = BackwardModel(3, 1, 0.9)
    model.update(1, 0, 2.0, 2)
    v = np.array([5.0, 0.0, 3.0])
    backward_planning_update_v(v, model, 2, 0.5)
    assert v[1] == pytest.approx(0.5 * (2.0 + 0.9 * 3.0))
    # The bootstrap source is read, never written; bystanders untouched.
    assert v[2] == 3.0 and v[0] == 5.0


def test_backward_v_terminal_reference_bootstraps_zero():
    model = BackwardModel(3, 1, 0.9)
    model.update(0, 0, 2.0, 2)
    v = np.array([0.0, 0.0, 50.0])
    mask = np.array([False, False, True])
    backward_planning_update_v(v, model, 2, 1.0, mask)
    assert v[0] == 2.0  # reward only, no bootstrap through a terminal
    assert v[2] == 50.0


def test_backward_v_masks_terminal_predecessors():
    model = BackwardModel(3, 1, 0.9)
    model.update(0, 0, 1.0, 1)
    model.update(2, 0, 1.0, 1)
    v = np.zeros(3)
    mask = np.array([False, False, True])
    backward_planning_update_v(v, model, 1, 1.0, mask)
    assert v[2] == 0.0  # terminal predecessor entry stays pinned
    assert v[0] != 0.0


def test_backward_v_equals_expected_sampled_update(rng):
    # The distributional backup is exactly the predecessor-weighted average
    # of every single-predecessor sampled update.
    model = BackwardModel(5, 1, 0.9)
    for _ in range(40):
        model.update(int(rng.integers(5)), 0, float(rng.normal()), int(rng.integers(5)))
    v = rng.normal(size=5)
    ref = 2
    alpha = 0.3
    probs = model.state_distribution(ref)
    assert probs is not None
    targets = model.reward_estimate[:, ref] + 0.9 * v[ref]
    expected = np.zeros(5)
    for u in range(5):
        single = v.copy()
        single[u] += alpha * (targets[u] - single[u])
        expected += probs[u] * single
    actual = backward_planning_update_v(v.copy(), model, ref, alpha)
    assert np.allclose(actual, expected, atol=1e-12)


def test_backward_v_flow_weighted_sweeps_reach_exact_values():
    # Aggregated synchronous sweeps with per-state rates equal to the
    # stationary mass have the exact values as their unique fixed point.
    chain = random_ergodic_chain(np.random.default_rng(2), 5)
    truth = exact_value(chain)
    sd = stationary_distribution(chain)
    model = BackwardModel.from_reversed_chain(reverse_chain(chain, sd))
    v = np.zeros(5)
    for _ in range(2000):
        base = v.copy()
        delta = np.zeros(5)
        for ref in range(5):
            stepped = backward_planning_update_v(base.copy(), model, ref, float(sd.d[ref]))
            delta += stepped - base
        v = base + delta
    assert np.abs(v - truth).max() < 1e-6


# --- forward action-value backups -----------------------------------------------------

def test_forward_q_fixed_at_optimum(rng):
    mdp = random_mdp(rng)
    star = oracle_q_star(mdp)
    model = ForwardModel.from_mdp(mdp)
    q = star.copy()
    for ref in range(4):
        forward_planning_update_q(q, model, ref, 1.0, mdp.terminal_mask)
    assert np.allclose(q, star, atol=1e-9)


def test_forward_q_sweeps_contract_to_optimum(rng):
    mdp = random_mdp(rng)
    star = oracle_q_star(mdp)
    model = ForwardModel.from_mdp(mdp)
    q = np.zeros((4, 2))
    prev_err = np.abs(q - star).max()
    for _ in range(80):
        for ref in range(4):
            forward_planning_update_q(q, model, ref, 1.0, mdp.terminal_mask)
        err = np.abs(q - star).max()
        assert err <= mdp.discount * prev_err + 1e-12
        prev_err = err
    assert prev_err < 1e-9


def test_forward_q_goal_adjacent_single_backup():
    env = MazeEnv(MazeSpec(layout="SG"), np.random.default_rng(0))
    model = ForwardModel.from_mdp(env.mdp)
    q = np.zeros((2, 4))
    forward_planning_update_q(q, model, 0, 1.0, env.terminal_mask)
    assert q[0, 3] == 1.0  # right into the goal; continuation there is 0
    assert np.allclose(q[0, :3], 0.0)
    assert np.allclose(q[1], 0.0)


def test_forward_q_skips_unvisited_actions():
    model = ForwardModel(3, 2, 0.9)
    model.update(0, 1, 1.0, 2, terminated=False)
    q = np.full((3, 2), 0.25)
    forward_planning_update_q(q, model, 0, 1.0)
    assert q[0, 0] == 0.25
    assert q[0, 1] != 0.25


def test_forward_q_terminal_reference_untouched():
    model = ForwardModel(2, 2, 0.9)
    model.update(1, 0, 1.0, 0, terminated=False)
    q = np.ones((2, 2))
    mask = np.array([False, True])
    assert np.array_equal(forward_planning_update_q(q.copy(), model, 1, 1.0, mask), q)


# --- backward action-value backups ----------------------------------------------------

def test_backward_q_skips_unreached():
    model = BackwardModel(2, 2, 0.9)
    q = np.ones((2, 2))
    assert np.array_equal(backward_planning_update_q(q.copy(), model, 0, 1.0), q)


def test_backward_q_unique_predecessor_arithmetic():
    model = BackwardModel(3, 2, 0.9)
    model.update(0, 1, 2.0, 2)
    q = np.array([[0.0, 0.0], [9.0, 9.0], [4.0, 1.0]])
    backward_planning_update_q(q, model, 2, 0.5)
    assert q[0, 1] == pytest.approx(0.5 * (2.0 + 0.9 * 4.0))
    assert q[0, 0] == 0.0
    assert np.array_equal(q[1], [9.0, 9.0])
    assert np.array_equal(q[2], [4.0, 1.0])


def test_backward_q_terminal_reference_bootstraps_zero():
    model = BackwardModel(2, 1, 0.9)
    model.update(0, 0, 1.0, 1)
    q = np.array([[0.0], [7.0]])
    mask = np.array([False, True])
    backward_planning_update_q(q, model, 1, 1.0, mask)
    assert q[0, 0] == 1.0
    assert q[1, 0] == 7.0


def test_backward_q_masks_terminal_predecessors():
    model = BackwardModel(3, 1, 0.9)
    model.update(0, 0, 1.0, 1)
    model.update(2, 0, 1.0, 1)
    q = np.zeros((3, 1))
    mask = np.array([False, False, True])
    backward_planning_update_q(q, model, 1, 1.0, mask)
    assert q[2, 0] == 0.0
    assert q[0, 0] != 0.0


def test_backward_q_equals_expected_sampled_update(rng):
    model = BackwardModel(4, 2, 0.9)
    for _ in range(30):
        model.update(int(rng.integers(4)), int(rng.integers(2)), float(rng.normal()), int(rng.integers(4)))
    q = rng.normal(size=(4, 2))
    ref, alpha = 1, 0.4
    joint = model.joint_distribution(ref)
    assert joint is not None
    targets = model.reward_estimate[:, ref] + 0.9 * q[ref].max()
    expected = np.zeros((4, 2))
    for u in range(4):
        for a in range(2):
            single = q.copy()
            single[u, a] += alpha * (targets[u] - single[u, a])
            expected += joint[u, a] * single
    actual = backward_planning_update_q(q.copy(), model, ref, alpha)
    assert np.allclose(actual, expected, atol=1e-12)


# --- prediction loop ------------------------------------------------------------------

def oracle_td_curve(spec, seed, n_steps, alpha, truth):
    """Bare TD(0) session written independently of the Dyna driver."""
    env = ChainEnv.from_spec(spec, np.random.default_rng(seed))
    v = np.zeros(env.n_states)
    errors = np.empty(n_steps)
    state = env.reset()
    for t in range(n_steps):
        out = env.step()
        td0_update(v, state, out.reward, out.discount, out.next_state, alpha.value(t))
        errors[t] = float(np.linalg.norm(v - truth))
        state = out.next_state
        if out.terminated or out.truncated:
            state = env.reset()
    return errors, v


def test_prediction_without_planning_is_bare_td():
    spec = LeveledChainSpec((3, 3), seed=6)
    truth = exact_value(build_leveled_chain(spec))
    alpha = LinearSchedule(0.3, 0.01, 500)
    env = ChainEnv.from_spec(spec, np.random.default_rng(12))
    run = run_dyna_prediction(
        env, PlannerConfig(), RateSchedules(alpha, constant(0.1)), 500, truth
    )
    errors, values = oracle_td_curve(spec, 12, 500, alpha, truth)
    assert np.array_equal(run.errors, errors)
    assert np.array_equal(run.values, values)


def test_prediction_planning_reduces_error():
    spec = LeveledChainSpec((3, 3), seed=6)
    chain = build_leveled_chain(spec)
    truth = exact_value(chain)
    n = 4000
    schedules = RateSchedules(LinearSchedule(0.2, 0.0, n), LinearSchedule(0.1, 0.01, n))
    for direction, ref, model in (
        (BACKWARD, CURRENT_STATE, BackwardModel(6, 1, 1.0)),
        (FORWARD, PREVIOUS_STATE, ForwardModel(6, 1, 1.0)),
    ):
        env = ChainEnv.from_spec(spec, np.random.default_rng(1))
        cfg = PlannerConfig(direction=direction, reference=ref, steps_per_interaction=3)
        run = run_dyna_prediction(env, cfg, schedules, n, truth, model=model)
        assert run.errors.shape == (n,)
        assert run.errors[-1] < 1.5
        assert run.errors[-1] < 0.05 * run.errors[0]
        # Episode boundaries never feed the model: no terminal-row sources.
        assert model.counts[chain.terminal_mask].sum() == 0.0


def test_prediction_validates_model_pairing():
    spec = LeveledChainSpec((2, 2), seed=0)
    truth = np.zeros(4)
    schedules = RateSchedules(constant(0.1), constant(0.1))
    env = ChainEnv.from_spec(spec, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        run_dyna_prediction(env, PlannerConfig(direction=FORWARD), schedules, 10, truth)
    with pytest.raises(ValidationError):
        run_dyna_prediction(
            env, PlannerConfig(direction=FORWARD), schedules, 10, truth, model=BackwardModel(4, 1, 1.0)
        )
    with pytest.raises(ValidationError):
        run_dyna_prediction(
            env, PlannerConfig(direction=BACKWARD), schedules, 10, truth, model=ForwardModel(4, 1, 1.0)
        )


# --- control loop ---------------------------------------------------------------------

def oracle_q_curve(spec, env_seed, agent_seed, n_episodes, alpha, epsilon, unit):
    """Bare Q-learning session written independently of the Dyna driver."""
    env = MazeEnv(spec, np.random.default_rng(env_seed))
    agent = np.random.default_rng(agent_seed)
    q = np.zeros((env.n_states, env.n_actions))
    steps = np.zeros(n_episodes, dtype=int)
    returns = np.zeros(n_episodes)
    clock = 0
    for episode in range(n_episodes):
        state = env.reset()
        weight = 1.0
        while True:
            tick = episode if unit == "episode" else clock
            action = epsilon_greedy(q, state, epsilon.value(tick), agent)
            out = env.step(action)
            q_learning_update(q, state, action, out.reward, out.discount, out.next_state, alpha.value(tick))
            steps[episode] += 1
            returns[episode] += weight * out.reward
            weight *= env.discount
            clock += 1
            state = out.next_state
            if out.terminated or out.truncated:
                break
    return steps, returns, q


@pytest.mark.parametrize("unit", ["step", "episode"])
def test_control_without_planning_is_bare_q_learning(unit):
    spec = MazeSpec(max_episode_steps=150)
    alpha = LinearSchedule(0.5, 0.1, 30)
    epsilon = LinearSchedule(0.3, 0.05, 30)
    env = MazeEnv(spec, np.random.default_rng(21))
    run = run_dyna_control(
        env,
        PlannerConfig(),
        RateSchedules(alpha, constant(1.0), epsilon),
        40,
        np.random.default_rng(31),
        schedule_unit=unit,
    )
    steps, returns, q = oracle_q_curve(spec, 21, 31, 40, alpha, epsilon, unit)
    assert np.array_equal(run.steps, steps)
    assert np.array_equal(run.returns, returns)
    assert np.array_equal(run.q, q)
    assert run.probe is None


def test_control_backward_planning_finds_shortest_path():
    env = MazeEnv(MazeSpec(), np.random.default_rng(102))
    model = BackwardModel(env.n_states, env.n_actions, env.discount)
    cfg = PlannerConfig(direction=BACKWARD, reference=PREVIOUS_STATE, steps_per_interaction=5)
    schedules = RateSchedules(
        LinearSchedule(0.5, 0.1, 3000), constant(1.0), LinearSchedule(0.2, 0.05, 3000)
    )
    run = run_dyna_control(env, cfg, schedules, 300, np.random.default_rng(202), model=model)
    assert greedy_rollout_steps(default_layout(), run.q) == 7
    assert run.steps[-1] < 50


def test_control_probe_runs_every_episode():
    env = MazeEnv(MazeSpec(max_episode_steps=60), np.random.default_rng(2))
    run = run_dyna_control(
        env,
        PlannerConfig(),
        RateSchedules(constant(0.5), constant(1.0), constant(0.2)),
        10,
        np.random.default_rng(3),
        episode_probe=lambda q: float(q.max()),
    )
    assert run.probe.shape == (10,)
    assert np.all(np.isfinite(run.probe))
    assert run.probe[-1] == run.q.max()


def test_control_validation():
    env = MazeEnv(MazeSpec(max_episode_steps=10), np.random.default_rng(0))
    agent = np.random.default_rng(0)
    no_eps = RateSchedules(constant(0.5), constant(1.0))
    with pytest.raises(ValidationError):
        run_dyna_control(env, PlannerConfig(), no_eps, 2, agent)
    full = RateSchedules(constant(0.5), constant(1.0), constant(0.1))
    with pytest.raises(ValidationError):
        run_dyna_control(env, PlannerConfig(direction=BACKWARD), full, 2, agent)
    with pytest.raises(ValidationError):
        run_dyna_control(
            env, PlannerConfig(direction=BACKWARD), full, 2, agent,
            model=ForwardModel(env.n_states, 4, 0.99),
        )
    with pytest.raises(ValidationError):
        run_dyna_control(env, PlannerConfig(), full, 2, agent, schedule_unit="hour")
