import numpy as np
import pytest

from pbrl.agent import PbrlAgent, PBRL_TABLE1
from pbrl.cartpole import CartState, EnvConfig
from pbrl.config import RunConfig, SourceSpec
from pbrl.harness import (
    CartPoleEnv,
    RoundResult,
    compute_fom,
    run_episode,
    run_experiment,
    run_round,
    variety_of_states,
)
from pbrl.qlearning import Q_TABLE1, QAgent
from pbrl.sequences import SampleSeries, StridedCursor

START = CartState(0.01, 0.0, -0.01, 0.0)


class RiggedEnv(CartPoleEnv):
    def __init__(self, fail_on_step):
        super().__init__()
        self.fail_on_step = fail_on_step
        self.t = 0

    def step(self, state, action):
        self.t += 1
        new, _ = super().step(state, action)
        return new, self.t == self.fail_on_step


def cursor(value=20):
    return StridedCursor(SampleSeries(np.array([value])), 1)


def test_immediate_failure_penalizes_pbrl():
    agent = PbrlAgent(PBRL_TABLE1["chaos"], cursor())
    steps, visited = run_episode(agent, RiggedEnv(1), START)
    assert steps == 0
    s0 = CartPoleEnv().discretize(START)
    assert visited == {s0}
    assert agent.table[s0] == pytest.approx(PBRL_TABLE1["chaos"].a0)


def test_immediate_failure_q_penalty():
    agent = QAgent(Q_TABLE1, np.random.default_rng(0))
    agent.begin_episode(0)
    steps, _ = run_episode(agent, RiggedEnv(1), START)
    assert steps == 0
    s0 = CartPoleEnv().discretize(START)
    assert agent.q[s0].min() == pytest.approx(Q_TABLE1.alpha * -Q_TABLE1.r_penalty)


def test_never_failing_env_caps_at_150():
    agent = PbrlAgent(PBRL_TABLE1["chaos"], cursor())
    env = RiggedEnv(fail_on_step=-1)
    steps, visited = run_episode(agent, env, START)
    assert steps == 150
    assert env.discretize(START) in visited
    assert len(agent.trace) == 0
    assert np.all(agent.table <= 0)  # only success updates for action 1


@pytest.mark.parametrize("agent", ["pbrl", "qlearning"])
@pytest.mark.parametrize("source", ["normal", "uniform", "synthetic-chaos:5", "surrogate:synthetic-chaos:5"])
def test_compiled_round_matches_python_reference(agent, source):
    cfg = RunConfig(agent=agent, source=SourceSpec.parse(source), episodes=40, stride=3,
                    chaos_length=50_000)
    fast = run_round(cfg, 17)
    ref = run_round(cfg, 17, engine="python")
    assert np.array_equal(fast.success_steps, ref.success_steps)
    assert np.array_equal(fast.window_visits, ref.window_visits)


def test_round_shape_and_determinism():
    cfg = RunConfig(rounds=1)
    a = run_round(cfg, 5)
    b = run_round(cfg, 5)
    assert a.success_steps.shape == (1000,)
    assert len(a.window_states) == 100
    assert np.array_equal(a.success_steps, b.success_steps)
    assert np.all((a.success_steps >= 0) & (a.success_steps <= 150))
    counts = a.window_counts
    assert np.all((counts >= 1) & (counts <= 1296))


def test_windows_never_undercount_round_total():
    r = run_round(RunConfig(agent="qlearning", episodes=200), 2)
    whole = set().union(*r.window_states)
    assert r.window_counts.sum() >= len(whole)


def test_variety_examples():
    only = np.zeros((100, 1296), bool)
    only[:, 777] = True
    assert np.all(variety_of_states([RoundResult(np.zeros(1000, int), only)]) == 1)
    disjoint = np.zeros((1, 1296), bool)
    disjoint[0, :50] = True  # 10 episodes x 5 distinct states
    assert variety_of_states([RoundResult(np.zeros(10, int), disjoint)])[0] == 50
    with pytest.raises(ValueError):
        variety_of_states([])


def test_fom_examples():
    assert compute_fom(np.full(1000, 150.0)) == 0
    assert compute_fom(np.full(1000, 100.0)) == 1000
    curve = np.full(1000, 150.0)
    curve[:45] = 120.0
    assert compute_fom(curve) == 45
    curve[300] = 144.9
    assert compute_fom(curve) == 301
    curve[-1] = 144.0
    assert compute_fom(curve) == 1000


def test_single_round_experiment_equals_round():
    cfg = RunConfig(rounds=1, episodes=30, seed=9)
    curves = run_experiment(cfg)
    r = run_round(cfg, 9)
    assert np.array_equal(curves.mean_success, r.success_steps.astype(float))
    assert np.array_equal(curves.mean_variety, r.window_counts.astype(float))


def test_parallel_matches_sequential():
    cfg = RunConfig(rounds=6, episodes=50, source=SourceSpec.parse("synthetic-chaos:5"),
                    stride=5, chaos_length=100_000)
    seq = run_experiment(cfg, jobs=1)
    par = run_experiment(cfg, jobs=3)
    assert np.array_equal(seq.mean_success, par.mean_success)
    assert np.array_equal(seq.mean_variety, par.mean_variety)
    assert seq.fom == par.fom


def test_rounds_get_distinct_chaos_offsets():
    cfg = RunConfig(episodes=20, source=SourceSpec.parse("synthetic-chaos:5"), chaos_length=100_000)
    a = run_round(cfg, 0)
    b = run_round(cfg, 1)
    assert not np.array_equal(a.success_steps, b.success_steps)


def test_env_config_reaches_kernel():
    cfg = RunConfig(episodes=20, env=EnvConfig(x_limit=0.001))
    # the cart leaves a 1 mm band almost immediately
    assert run_round(cfg, 0).success_steps.max() < 10
