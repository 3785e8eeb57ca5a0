"""Gridworld maze with optional reward or dynamics noise.

Layouts are small UTF-8 text files, one row of cells per line: ``#`` wall,
``.`` free, ``S`` the unique start, ``G`` the unique goal. The agent moves
up, down, left or right; bumping a wall or the edge leaves it in place.
Entering the goal pays +1 and ends the episode, everything else pays 0.
Episodes that outlast the step cap are truncated, not terminated.

Two noise knobs, mutually exclusive by construction:

* ``StochasticDynamics(p)``: with probability ``p`` the move is redirected to
  a uniformly random one of the four directions (wall-blocked redirections
  collapse to staying put).
* ``StochasticReward(p)``: the goal pays +1 with probability ``p``, else 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..core import TabularMDP
from ..errors import LayoutError, ValidationError
from .outcome import StepOutcome

N_ACTIONS = 4
# Row/col deltas for up, down, left, right.
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class Deterministic:
    pass


@dataclass(frozen=True)
class StochasticDynamics:
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError(f"dynamics noise level must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class StochasticReward:
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError(f"reward probability must lie in [0, 1], got {self.p}")


Stochasticity = Deterministic | StochasticDynamics | StochasticReward


@dataclass(frozen=True)
class MazeSpec:
    """Build recipe for a maze.

    Args:
        layout: layout text (see module docstring). Defaults to the packaged
            48-cell layout.
        stochasticity: noise variant.
        max_episode_steps: truncation cap.
        discount: per-step discount.
    """

    layout: str = None  # type: ignore[assignment]
    stochasticity: Stochasticity = field(default_factory=Deterministic)
    max_episode_steps: int = 400
    discount: float = 0.99

    def __post_init__(self):
        if self.layout is None:
            object.__setattr__(self, "layout", default_layout())
        if self.max_episode_steps < 1:
            raise ValidationError("max_episode_steps must be positive")
        if not (0.0 < self.discount <= 1.0):
            raise ValidationError(f"discount must lie in (0, 1], got {self.discount}")


@dataclass(frozen=True)
class ParsedLayout:
    grid: tuple[str, ...]
    start: tuple[int, int]
    goal: tuple[int, int]
    cells: tuple[tuple[int, int], ...]  # free cells in row-major order

    @property
    def n_states(self) -> int:
        return len(self.cells)

    def state_of(self, cell: tuple[int, int]) -> int:
        return self.cells.index(cell)


def default_layout() -> str:
    return resources.files("bidyna.envs").joinpath("layouts/dyna48.txt").read_text(encoding="utf-8")


def detour_layout() -> str:
    """48-cell maze whose wall lines force a long detour around the top."""
    return resources.files("bidyna.envs").joinpath("layouts/detour48.txt").read_text(encoding="utf-8")


def corridor_layout() -> str:
    """48-cell maze that snakes through one corridor; hard exploration."""
    return resources.files("bidyna.envs").joinpath("layouts/corridor48.txt").read_text(encoding="utf-8")


def load_layout(path: str) -> str:
    """Read and validate a layout file, returning its text."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parse_layout(text)
    return text


def parse_layout(text: str) -> ParsedLayout:
    """Parse layout text into grid structure.

    Raises:
        LayoutError: on unknown characters, ragged rows, or a start/goal
            count other than exactly one each. Carries row and column.
    """
    rows = [line for line in text.splitlines() if line.strip() != ""]
    if not rows:
        raise LayoutError("layout is empty")
    width = len(rows[0])
    start = None
    goal = None
    cells = []
    for r, line in enumerate(rows):
        if len(line) != width:
            raise LayoutError(f"row has length {len(line)}, expected {width}", row=r)
        for c, ch in enumerate(line):
            if ch not in "#.SG":
                raise LayoutError(f"unknown cell character {ch!r}", row=r, col=c)
            if ch == "S":
                if start is not None:
                    raise LayoutError("duplicate start cell", row=r, col=c)
                start = (r, c)
            if ch == "G":
                if goal is not None:
                    raise LayoutError("duplicate goal cell", row=r, col=c)
                goal = (r, c)
            if ch != "#":
                cells.append((r, c))
    if start is None:
        raise LayoutError("layout has no start cell")
    if goal is None:
        raise LayoutError("layout has no goal cell")
    return ParsedLayout(tuple(rows), start, goal, tuple(cells))


def _move_targets(layout: ParsedLayout) -> np.ndarray:
    """Deterministic landing state for every (state, action); walls mean stay."""
    index = {cell: i for i, cell in enumerate(layout.cells)}
    targets = np.empty((layout.n_states, N_ACTIONS), dtype=int)
    n_rows = len(layout.grid)
    n_cols = len(layout.grid[0])
    for s, (r, c) in enumerate(layout.cells):
        for a, (dr, dc) in enumerate(MOVES):
            rr, cc = r + dr, c + dc
            if 0 <= rr < n_rows and 0 <= cc < n_cols and (rr, cc) in index:
                targets[s, a] = index[(rr, cc)]
            else:
                targets[s, a] = s
    return targets


def build_maze(spec: MazeSpec) -> TabularMDP:
    """Expected-model form of the maze: transition and mean-reward tensors.

    The goal state is absorbing with zero reward and carries the terminal
    mark; its rows are never exercised during episodes. Under
    ``StochasticReward`` the reward tensor holds the mean goal payout; the
    sampling environment draws the Bernoulli itself.
    """
    layout = parse_layout(spec.layout)
    n = layout.n_states
    targets = _move_targets(layout)
    goal = layout.state_of(layout.goal)
    start = layout.state_of(layout.start)

    p = np.zeros((n, N_ACTIONS, n))
    noise = spec.stochasticity.p if isinstance(spec.stochasticity, StochasticDynamics) else 0.0
    for s in range(n):
        if s == goal:
            p[s, :, s] = 1.0
            continue
        for a in range(N_ACTIONS):
            p[s, a, targets[s, a]] += 1.0 - noise
            for d in range(N_ACTIONS):
                p[s, a, targets[s, d]] += noise / N_ACTIONS

    goal_pay = spec.stochasticity.p if isinstance(spec.stochasticity, StochasticReward) else 1.0
    r = np.zeros((n, N_ACTIONS, n))
    r[:, :, goal] = goal_pay
    r[goal] = 0.0

    terminal = np.zeros(n, dtype=bool)
    terminal[goal] = True
    init = np.zeros(n)
    init[start] = 1.0
    return TabularMDP(p, r, spec.discount, terminal, init)


class MazeEnv:
    """Sampling session over a maze.

    Exposes the expected model as ``mdp`` for analysis while stepping off the
    true generative process, so reward noise really is sampled rather than
    averaged.
    """

    def __init__(self, spec: MazeSpec, rng: np.random.Generator):
        self.spec = spec
        self.layout = parse_layout(spec.layout)
        self.mdp = build_maze(spec)
        self.n_states = self.mdp.n_states
        self.n_actions = N_ACTIONS
        self.terminal_mask = self.mdp.terminal_mask
        self.discount = spec.discount
        self._goal = self.layout.state_of(self.layout.goal)
        self._start = self.layout.state_of(self.layout.start)
        self._cdf = np.cumsum(self.mdp.transition, axis=2)
        self._rng = rng
        self.steps_taken = 0
        self.state = self._start

    def reset(self) -> int:
        self.state = self._start
        self.steps_taken = 0
        return self.state

    def step(self, action: int) -> StepOutcome:
        if not (0 <= action < self.n_actions):
            raise ValidationError(f"action {action} out of range [0, {self.n_actions})")
        s = self.state
        nxt = int(np.searchsorted(self._cdf[s, action], self._rng.random(), side="right"))
        reward = 0.0
        if nxt == self._goal:
            if isinstance(self.spec.stochasticity, StochasticReward):
                reward = 1.0 if self._rng.random() < self.spec.stochasticity.p else 0.0
            else:
                reward = 1.0
        terminated = bool(self.terminal_mask[nxt])
        self.steps_taken += 1
        truncated = (not terminated) and self.steps_taken >= self.spec.max_episode_steps
        outcome = StepOutcome(
            reward=reward,
            discount=0.0 if terminated else self.discount,
            next_state=nxt,
            terminated=terminated,
            truncated=truncated,
        )
        self.state = nxt
        return outcome
