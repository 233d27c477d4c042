"""Parallel bandit agent: one threshold per discrete state.

Each state holds a two-armed bandit solved by comparing a threshold with the
next sample from a random sequence.  Success shifts the current state's
threshold toward repeating the action; failure pushes every threshold
visited during the episode away from its action, discounted by the distance
to the failure step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from .cartpole import N_STATES
from .sequences import StridedCursor


@dataclass(frozen=True)
class PbrlParams:
    delta_th: float
    a0: float
    gamma: float

    def as_list(self) -> List[float]:
        return [self.delta_th, self.a0, self.gamma]


# Tuned settings per source distribution; chaos shares the surrogate's values.
PBRL_TABLE1 = {
    "chaos": PbrlParams(1.767, 301.3, 0.6774),
    "surrogate": PbrlParams(1.767, 301.3, 0.6774),
    "normal": PbrlParams(2.151, 366.8, 0.6774),
    "uniform": PbrlParams(4.881, 832.5, 0.6774),
}


def new_threshold_table(n_states: int = N_STATES) -> np.ndarray:
    return np.zeros(n_states, dtype=float)


@dataclass
class EpisodeTrace:
    """(state, action, step) triples visited since the episode started."""

    entries: List[Tuple[int, int, int]] = field(default_factory=list)

    def append(self, state: int, action: int, step: int) -> None:
        if self.entries and step <= self.entries[-1][2]:
            raise ValueError(f"step {step} not after {self.entries[-1][2]}")
        self.entries.append((state, action, step))

    def clear(self) -> None:
        self.entries.clear()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def sign_of(action: int) -> int:
    """(-1)**action for action in {1, 2}."""
    if action == 1:
        return -1
    if action == 2:
        return 1
    raise ValueError(f"action must be 1 or 2, got {action}")


def decide(th_value: float, sample: float) -> int:
    """Action 1 iff the sample exceeds the threshold; ties go to action 2."""
    return 1 if sample > th_value else 2


def reward_update(table: np.ndarray, state: int, action: int, params: PbrlParams) -> None:
    table[state] += sign_of(action) * params.delta_th


def penalize_trace(
    table: np.ndarray, trace: EpisodeTrace, fail_step: int, params: PbrlParams
) -> None:
    for state, action, t_prime in trace:
        if not 1 <= t_prime <= fail_step:
            raise ValueError(f"trace step {t_prime} outside [1, {fail_step}]")
        table[state] -= sign_of(action) * params.a0 * params.gamma ** (fail_step - t_prime)


def act_and_learn(
    table: np.ndarray,
    trace: EpisodeTrace,
    state: int,
    cursor: StridedCursor,
    params: PbrlParams,
    env_outcome: Callable[[int], bool],
    step: int,
    max_steps: Optional[int] = None,
) -> int:
    """Decide, let ``env_outcome(action)`` report failure, then learn.

    Reaching ``max_steps`` without failure ends the episode: the trace is
    dropped and no penalty is applied.
    """
    action = decide(table[state], cursor.read())
    trace.append(state, action, step)
    if env_outcome(action):
        penalize_trace(table, trace, step, params)
        trace.clear()
    else:
        reward_update(table, state, action, params)
        if max_steps is not None and step >= max_steps:
            trace.clear()
    return action


class PbrlAgent:
    """Threshold-table learner fed by a strided sample cursor."""

    def __init__(self, params: PbrlParams, cursor: StridedCursor, n_states: int = N_STATES):
        self.params = params
        self.cursor = cursor
        self.table = new_threshold_table(n_states)
        self.trace = EpisodeTrace()

    def begin_episode(self, episode: int) -> None:
        self.trace.clear()

    def act(self, state: int, step: int) -> int:
        action = decide(self.table[state], self.cursor.read())
        self.trace.append(state, action, step)
        return action

    def learn(
        self, state: int, action: int, step: int, failed: bool, next_state: int, truncated: bool
    ) -> None:
        if failed:
            penalize_trace(self.table, self.trace, step, self.params)
            self.trace.clear()
            return
        reward_update(self.table, state, action, self.params)
        if truncated:
            self.trace.clear()


def dump_thresholds(table: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_index", "threshold"])
        for j, th in enumerate(table):
            writer.writerow([j, repr(float(th))])
