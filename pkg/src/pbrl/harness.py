"""Episodes, learning rounds, and multi-round experiments.

A round is a fresh agent learning over ``episodes`` consecutive episodes.
An experiment averages independent rounds into a continuous-success curve
and a variety-of-states curve, and reduces the success curve to a figure of
merit (FOM).  Round ``r`` of an experiment uses seed ``config.seed + r`` and
nothing else, so rounds may run in any order or in parallel.
"""

from __future__ import annotations

import csv
import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Set, Tuple

import numpy as np

from . import _kernels
from .agent import PbrlAgent
from .cartpole import N_STATES, CartState, EnvConfig, discretize, step
from .config import RunConfig, SourceSpec
from .qlearning import FAIL_GRACE_STEP, QAgent, UniformStream
from .sequences import (
    SampleSeries,
    StridedCursor,
    gen_normal,
    gen_synthetic_chaos,
    gen_uniform,
    load_chaos_path,
    shuffle_surrogate,
)

log = logging.getLogger(__name__)

WINDOW = 10
FOM_THRESHOLD = 145.0
FOM_CAP = 1000
FOM_GUARD = 2000
# Round r of a shared series starts reading at (seed_r * OFFSET_PRIME) mod length.
OFFSET_PRIME = 1_000_003

# Substream tags for np.random.default_rng([round_seed, tag]).
_INIT_TAG = 0
_SOURCE_TAG = 1
_POLICY_TAG = 2


class Agent(Protocol):
    def begin_episode(self, episode: int) -> None: ...

    def act(self, state: int, step: int) -> int: ...

    def learn(
        self, state: int, action: int, step: int, failed: bool, next_state: int, truncated: bool
    ) -> None: ...


class CartPoleEnv:
    """Stateless wrapper binding the dynamics to one configuration."""

    def __init__(self, config: EnvConfig = EnvConfig()):
        self.config = config

    def step(self, state: CartState, action: int) -> Tuple[CartState, bool]:
        return step(state, action, self.config)

    def discretize(self, state: CartState) -> int:
        return discretize(state, self.config)


@dataclass
class RoundResult:
    success_steps: np.ndarray
    window_visits: np.ndarray = field(repr=False)  # (n_windows, N_STATES) bool

    @property
    def window_states(self) -> List[Set[int]]:
        return [set(np.flatnonzero(row).tolist()) for row in self.window_visits]

    @property
    def window_counts(self) -> np.ndarray:
        return self.window_visits.sum(axis=1)


@dataclass
class ExperimentCurves:
    mean_success: np.ndarray
    mean_variety: np.ndarray
    fom: int
    success_matrix: np.ndarray = field(repr=False)
    variety_matrix: np.ndarray = field(repr=False)

    @property
    def rounds(self) -> int:
        return int(self.success_matrix.shape[0])


def run_episode(
    agent: Agent,
    env: CartPoleEnv,
    initial_state: CartState,
    max_steps: int = 150,
) -> Tuple[int, Set[int]]:
    """Play one episode; return successful steps and the states entered."""
    state = initial_state
    s = env.discretize(state)
    visited = {s}
    for t in range(1, max_steps + 1):
        action = agent.act(s, t)
        state, failed = env.step(state, action)
        ns = env.discretize(state)
        agent.learn(s, action, t, failed, ns, truncated=not failed and t == max_steps)
        if failed:
            return t - 1, visited
        visited.add(ns)
        s = ns
    return max_steps, visited


def initial_states(round_seed: int, episodes: int) -> np.ndarray:
    rng = np.random.default_rng([round_seed, _INIT_TAG])
    return rng.uniform(-0.05, 0.05, size=(episodes, 4))


def prepare_series(config: RunConfig) -> Optional[SampleSeries]:
    """Build the series shared by every round, or None for fresh-per-round sources."""
    return _shared_series(config.source, config.seed, config.chaos_length, config.base_period)


@functools.lru_cache(maxsize=8)
def _shared_series(
    source: SourceSpec, seed: int, chaos_length: int, base_period: float
) -> Optional[SampleSeries]:
    if source.kind == "synthetic-chaos":
        return gen_synthetic_chaos(chaos_length, source.lag, seed)
    if source.kind == "chaos-file":
        return load_chaos_path(source.path, base_period=base_period)
    if source.kind == "surrogate":
        return shuffle_surrogate(_shared_series(source.inner, seed, chaos_length, base_period), seed)
    return None


def round_cursor(config: RunConfig, round_seed: int, series: Optional[SampleSeries]) -> StridedCursor:
    if series is not None:
        start = (round_seed * OFFSET_PRIME) % len(series)
        return StridedCursor(series, config.stride, start)
    # pseudorandom streams have no sampling interval, so read them contiguously
    length = config.episodes * config.max_steps
    seed = [round_seed, _SOURCE_TAG]
    if config.source.kind == "uniform":
        fresh = gen_uniform(length, seed)
    else:
        fresh = gen_normal(length, seed, sigma=config.source.sigma)
    return StridedCursor(fresh, 1, 0)


def policy_uniforms(round_seed: int, episodes: int, max_steps: int) -> np.ndarray:
    # at most two draws per step: exploration test plus action or tie-break
    rng = np.random.default_rng([round_seed, _POLICY_TAG])
    return rng.random(2 * episodes * max_steps)


def make_agent(config: RunConfig, round_seed: int, series: Optional[SampleSeries] = None) -> Agent:
    if config.agent == "pbrl":
        return PbrlAgent(config.pbrl_params, round_cursor(config, round_seed, series))
    return QAgent(
        config.q_params, UniformStream(policy_uniforms(round_seed, config.episodes, config.max_steps))
    )


def run_round(
    config: RunConfig,
    round_seed: int,
    series: Optional[SampleSeries] = None,
    engine: str = "compiled",
) -> RoundResult:
    """One learning round; ``engine='python'`` runs the reference loop."""
    if series is None:
        series = prepare_series(config)
    inits = initial_states(round_seed, config.episodes)
    if engine == "python":
        return _run_round_python(config, round_seed, series, inits)
    if engine != "compiled":
        raise ValueError(f"unknown engine {engine!r}")
    phys = config.env.physics_array()
    ranges = np.array(config.env.ranges)
    if config.agent == "pbrl":
        cursor = round_cursor(config, round_seed, series)
        p = config.pbrl_params
        success, seen, _ = _kernels.pbrl_round(
            cursor.series.samples, cursor.position, cursor.stride, inits, phys, ranges,
            p.delta_th, p.a0, p.gamma, config.max_steps, WINDOW,
        )
    else:
        p = config.q_params
        success, seen, _ = _kernels.q_round(
            policy_uniforms(round_seed, config.episodes, config.max_steps), inits, phys, ranges,
            p.r_penalty, p.gamma, p.alpha, p.epsilon0, config.max_steps, WINDOW, FAIL_GRACE_STEP,
        )
    return RoundResult(success, seen)


def _run_round_python(
    config: RunConfig, round_seed: int, series: Optional[SampleSeries], inits: np.ndarray
) -> RoundResult:
    agent = make_agent(config, round_seed, series)
    env = CartPoleEnv(config.env)
    n_windows = -(-config.episodes // WINDOW)
    success = np.zeros(config.episodes, dtype=np.int64)
    seen = np.zeros((n_windows, N_STATES), dtype=bool)
    for e in range(config.episodes):
        agent.begin_episode(e)
        steps, visited = run_episode(agent, env, CartState(*inits[e]), config.max_steps)
        success[e] = steps
        seen[e // WINDOW, list(visited)] = True
    return RoundResult(success, seen)


def variety_of_states(results: Sequence[RoundResult]) -> np.ndarray:
    """Distinct states per 10-episode window, averaged over rounds."""
    if not results:
        raise ValueError("no rounds to average")
    return np.mean([r.window_counts for r in results], axis=0)


def compute_fom(mean_success: np.ndarray, threshold: float = FOM_THRESHOLD, cap: int = FOM_CAP) -> int:
    """Last 1-based episode whose averaged success is below ``threshold``.

    Returns 0 when every episode clears the threshold and ``cap`` when the
    final episode still falls short.
    """
    curve = np.asarray(mean_success, dtype=float)
    below = np.flatnonzero(curve < threshold)
    if below.size == 0:
        return 0
    if curve[-1] < threshold:
        return cap
    return int(below[-1]) + 1


def _round_worker(config: RunConfig, seeds: Sequence[int]) -> List[Tuple[np.ndarray, np.ndarray]]:
    series = prepare_series(config)
    out = []
    for seed in seeds:
        result = run_round(config, seed, series)
        out.append((result.success_steps, result.window_counts))
    return out


def run_experiment(config: RunConfig, jobs: int = 1) -> ExperimentCurves:
    """Run ``config.rounds`` rounds and average them.

    With ``jobs > 1`` rounds are spread over worker processes; results are
    gathered back in round order, so the averages do not depend on ``jobs``.
    """
    seeds = [config.seed + r for r in range(config.rounds)]
    if jobs <= 1:
        pairs = _round_worker(config, seeds)
    else:
        chunks = [seeds[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_round_worker, [config] * jobs, chunks))
        by_seed: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
        for chunk, part in zip(chunks, parts):
            by_seed.update(zip(chunk, part))
        pairs = [by_seed[s] for s in seeds]
    success = np.stack([p[0] for p in pairs])
    variety = np.stack([p[1] for p in pairs])
    mean_success = success.mean(axis=0)
    log.info("finished %d rounds of %s on %s", config.rounds, config.agent, config.source)
    return ExperimentCurves(
        mean_success=mean_success,
        mean_variety=variety.mean(axis=0),
        fom=compute_fom(mean_success),
        success_matrix=success,
        variety_matrix=variety,
    )


def metadata_lines(config: RunConfig) -> List[str]:
    resolved = config.resolved()
    keys = ["agent", "source", "stride", "rounds", "episodes", "max_steps", "seed"]
    if config.agent == "pbrl":
        keys += ["delta_th", "a0", "pbrl_gamma"]
    else:
        keys += ["r_penalty", "q_gamma", "alpha", "epsilon0"]
    items = resolved.to_items()
    return [f"# {k}={items[k]}" for k in keys]


def write_artifacts(curves: ExperimentCurves, config: RunConfig, out_dir: str | Path) -> None:
    """Write success_curve.csv, variety.csv, fom.txt and manifest.cfg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = metadata_lines(config)
    with open(out / "success_curve.csv", "w", newline="") as fh:
        fh.writelines(line + "\n" for line in header)
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_steps"])
        for e, v in enumerate(curves.mean_success, 1):
            writer.writerow([e, repr(float(v))])
    with open(out / "variety.csv", "w", newline="") as fh:
        fh.writelines(line + "\n" for line in header)
        writer = csv.writer(fh)
        writer.writerow(["window_start_episode", "mean_distinct_states"])
        for w, v in enumerate(curves.mean_variety):
            writer.writerow([w * WINDOW + 1, repr(float(v))])
    (out / "fom.txt").write_text(f"{curves.fom}\n")
    (out / "manifest.cfg").write_text(config.resolved().dumps())
