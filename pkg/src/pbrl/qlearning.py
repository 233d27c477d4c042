"""Tabular Q-learning baseline with a decaying epsilon-greedy policy."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Protocol

import numpy as np

from .cartpole import N_STATES

FAIL_GRACE_STEP = 145


class UniformSource(Protocol):
    def random(self) -> float: ...


@dataclass(frozen=True)
class QParams:
    r_penalty: float
    gamma: float
    alpha: float
    epsilon0: float

    def as_list(self) -> List[float]:
        return [self.r_penalty, self.gamma, self.alpha, self.epsilon0]


Q_TABLE1 = QParams(773.8, 0.8494, 0.2265, 0.4653)


class UniformStream:
    """Replays a pre-drawn buffer of uniforms through a ``random()`` method.

    Lets the pure-Python agent consume exactly the draws the compiled round
    kernel sees.
    """

    def __init__(self, values: np.ndarray):
        self.values = values
        self.position = 0

    def random(self) -> float:
        value = float(self.values[self.position])
        self.position += 1
        return value


def new_q_table(n_states: int = N_STATES) -> np.ndarray:
    return np.zeros((n_states, 2), dtype=float)


def epsilon_schedule(epsilon0: float, episode: int) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return epsilon0 / (episode + 1)


def select_action(q: np.ndarray, state: int, epsilon: float, rng: UniformSource) -> int:
    """Epsilon-greedy over actions {1, 2}; greedy ties split uniformly.

    Always consumes one draw for the exploration test and a second one when
    exploring or breaking a tie.
    """
    if rng.random() < epsilon:
        return 1 if rng.random() < 0.5 else 2
    q1, q2 = q[state, 0], q[state, 1]
    if q1 > q2:
        return 1
    if q2 > q1:
        return 2
    return 1 if rng.random() < 0.5 else 2


def q_update(
    q: np.ndarray,
    state: int,
    action: int,
    reward: float,
    next_state: int,
    terminal: bool,
    params: QParams,
) -> None:
    a = action - 1
    bootstrap = 0.0 if terminal else max(q[next_state, 0], q[next_state, 1])
    q[state, a] += params.alpha * (reward + params.gamma * bootstrap - q[state, a])


def reward_of(failed: bool, step: int, r_penalty: float, grace_step: int = FAIL_GRACE_STEP) -> float:
    """+1 for surviving the step, -r_penalty for failing before ``grace_step``, else 0."""
    if step < 1:
        raise ValueError("step must be >= 1")
    if not failed:
        return 1.0
    if step < grace_step:
        return -r_penalty
    return 0.0


class QAgent:
    def __init__(self, params: QParams, rng: UniformSource, n_states: int = N_STATES):
        self.params = params
        self.rng = rng
        self.q = new_q_table(n_states)
        self.epsilon = params.epsilon0

    def begin_episode(self, episode: int) -> None:
        self.epsilon = epsilon_schedule(self.params.epsilon0, episode)

    def act(self, state: int, step: int) -> int:
        return select_action(self.q, state, self.epsilon, self.rng)

    def learn(
        self, state: int, action: int, step: int, failed: bool, next_state: int, truncated: bool
    ) -> None:
        # truncation is not a terminal state, so it still bootstraps
        reward = reward_of(failed, step, self.params.r_penalty)
        q_update(self.q, state, action, reward, next_state, failed, self.params)


def dump_q_table(q: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_index", "q_action1", "q_action2"])
        for j, (q1, q2) in enumerate(q):
            writer.writerow([j, repr(float(q1)), repr(float(q2))])
