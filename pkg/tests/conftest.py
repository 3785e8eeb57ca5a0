"""Shared oracle helpers.

Everything here is deliberately written from scratch against the math, not
against the package: plain loops, no reuse of the implementations under test.
"""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from bidyna.core import TabularChain

# Action order the maze contract fixes: up, down, left, right.
ORACLE_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def random_ergodic_chain(rng: np.random.Generator, n_states: int, discount: float = 0.9) -> TabularChain:
    """Dense chain with all entries positive, hence irreducible and aperiodic."""
    p = rng.uniform(0.1, 1.0, size=(n_states, n_states))
    p = p / p.sum(axis=1, keepdims=True)
    r = rng.normal(0.0, 1.0, size=(n_states, n_states))
    return TabularChain(p, r, discount)


def parse_maze_text(text: str):
    """(free cell list, index map, start, goal) parsed with standalone logic."""
    rows = [line for line in text.splitlines() if line.strip() != ""]
    cells = []
    start = goal = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                continue
            if ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
            cells.append((r, c))
    index = {cell: i for i, cell in enumerate(cells)}
    return cells, index, start, goal


def maze_move_table(text: str) -> np.ndarray:
    """Deterministic landing cell index per (state, action); walls mean stay."""
    cells, index, _, _ = parse_maze_text(text)
    rows = [line for line in text.splitlines() if line.strip() != ""]
    height, width = len(rows), len(rows[0])
    table = np.empty((len(cells), 4), dtype=int)
    for s, (r, c) in enumerate(cells):
        for a, (dr, dc) in enumerate(ORACLE_MOVES):
            rr, cc = r + dr, c + dc
            if 0 <= rr < height and 0 <= cc < width and (rr, cc) in index:
                table[s, a] = index[(rr, cc)]
            else:
                table[s, a] = s
    return table


def bfs_steps_to_goal(text: str) -> int:
    """Shortest step count from S to G, moving through free cells only."""
    cells, index, start, goal = parse_maze_text(text)
    table = maze_move_table(text)
    dist = {index[start]: 0}
    frontier = deque([index[start]])
    while frontier:
        s = frontier.popleft()
        for a in range(4):
            t = int(table[s, a])
            if t not in dist:
                dist[t] = dist[s] + 1
                frontier.append(t)
    return dist[index[goal]]


def greedy_rollout_steps(text: str, q: np.ndarray, cap: int = 400) -> int:
    """Steps the argmax policy (first index on ties) takes from S to G, or cap."""
    cells, index, start, goal = parse_maze_text(text)
    table = maze_move_table(text)
    state = index[start]
    for steps in range(1, cap + 1):
        state = int(table[state, int(np.argmax(q[state]))])
        if state == index[goal]:
            return steps
    return cap


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
