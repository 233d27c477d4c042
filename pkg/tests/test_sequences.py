import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbrl.sequences import (
    DegenerateSeriesError,
    SampleSeries,
    StridedCursor,
    autocorrelation,
    gen_normal,
    gen_synthetic_chaos,
    gen_uniform,
    load_chaos_file,
    load_chaos_path,
    shuffle_surrogate,
)


def brute_rho(x, k):
    """Plain-loop autocorrelation, independent of the vectorized estimator."""
    x = [float(v) for v in x]
    n = len(x)
    mean = sum(x) / n
    num = 0.0
    for t in range(n - k):
        num += (x[t] - mean) * (x[t + k] - mean)
    den = sum((v - mean) ** 2 for v in x)
    return num / den


@pytest.fixture(scope="module")
def chaos_1e6():
    return gen_synthetic_chaos(10**6, lag=5, seed=11)


def test_load_bounds_of_offset_binary():
    assert load_chaos_file(b"\x00").samples[0] == -127
    assert load_chaos_file(b"\xff").samples[0] == 128
    s = load_chaos_file(bytes([127] * 4))
    assert len(s) == 4
    assert s.samples.tolist() == [0, 0, 0, 0]
    assert s.base_period == 10.0


def test_load_empty_stream():
    with pytest.raises(ValueError, match="empty series"):
        load_chaos_file(b"")


def test_offset_binary_round_trip():
    raw = bytes(range(256)) * 3
    assert load_chaos_file(raw).to_bytes() == raw


def test_text_and_binary_files(tmp_path):
    (tmp_path / "a.txt").write_text("-127\n0\n128\n5\n")
    (tmp_path / "a.bin").write_bytes(bytes([0, 127, 255, 132]))
    assert load_chaos_path(tmp_path / "a.txt").samples.tolist() == [-127, 0, 128, 5]
    assert load_chaos_path(tmp_path / "a.bin").samples.tolist() == [-127, 0, 128, 5]


def test_series_rejects_out_of_range():
    with pytest.raises(ValueError):
        SampleSeries(np.array([0, 129]))
    with pytest.raises(ValueError):
        SampleSeries(np.array([-128]))


def test_series_is_immutable():
    s = gen_uniform(10, seed=0)
    with pytest.raises(ValueError):
        s.samples[0] = 3


def test_synthetic_chaos_negative_lag(chaos_1e6):
    prof = autocorrelation(chaos_1e6, 10)
    assert prof.rho[4] == pytest.approx(-0.5, abs=0.02)
    assert np.all(np.abs(prof.rho[:4]) < 0.02)
    assert prof.argmin_lag() == 5


def test_synthetic_chaos_std_about_40(chaos_1e6):
    assert chaos_1e6.samples.std() == pytest.approx(40.0, rel=0.02)


def test_synthetic_chaos_deterministic():
    a = gen_synthetic_chaos(5000, 3, seed=4)
    b = gen_synthetic_chaos(5000, 3, seed=4)
    assert np.array_equal(a.samples, b.samples)


def test_synthetic_chaos_length_must_exceed_lag():
    with pytest.raises(ValueError):
        gen_synthetic_chaos(5, 5, seed=0)


def test_estimator_agrees_with_brute_force():
    s = gen_synthetic_chaos(3000, 4, seed=2)
    prof = autocorrelation(s, 6)
    for k in range(1, 7):
        assert prof.rho[k - 1] == pytest.approx(brute_rho(s.samples, k), abs=1e-12)


def test_alternating_series_is_perfectly_anticorrelated():
    x = np.array([1, -1] * 50)
    # finite-sample normalization gives (n-1)/n at lag 1
    assert autocorrelation(x, 1).rho[0] == pytest.approx(-(len(x) - 1) / len(x), abs=1e-12)
    assert autocorrelation(x, 1).rho[0] == pytest.approx(-1.0, abs=0.011)


def test_constant_series_is_degenerate():
    with pytest.raises(DegenerateSeriesError, match="degenerate series"):
        autocorrelation(np.full(100, 7), 3)


def test_surrogate_preserves_histogram_and_kills_correlation():
    s = gen_synthetic_chaos(10**5, 5, seed=3)
    sur = shuffle_surrogate(s, seed=9)
    assert np.array_equal(np.sort(s.samples), np.sort(sur.samples))
    assert np.all(np.abs(autocorrelation(sur, 10).rho) < 0.05)


def test_surrogate_of_single_sample():
    s = SampleSeries(np.array([17]))
    assert shuffle_surrogate(s, seed=1).samples.tolist() == [17]


def test_uniform_moments_and_range():
    s = gen_uniform(10**6, seed=5)
    assert s.samples.min() >= -127 and s.samples.max() <= 128
    assert s.samples.mean() == pytest.approx(0.5, abs=0.5)
    # every level is reachable
    assert set(np.unique(s.samples)) == set(range(-127, 129))


def test_normal_moments():
    s = gen_normal(10**6, seed=6, sigma=40)
    assert s.samples.mean() == pytest.approx(0.0, abs=0.5)
    assert autocorrelation(s, 1).rho[0] == pytest.approx(0.0, abs=0.01)


def test_normal_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gen_normal(10, seed=0, sigma=0)


def test_strided_cursor_reads_and_wraps():
    s = SampleSeries(np.arange(7) - 3)
    cur = StridedCursor(s, stride=3, position=5)
    reads = [cur.read() for _ in range(4)]
    # positions 5, 1, 4, 0
    assert reads == [2, -2, 1, -3]
    with pytest.raises(ValueError):
        StridedCursor(s, stride=0)


def test_stride_matched_reads_are_anticorrelated():
    s = gen_synthetic_chaos(200_000, 5, seed=8)
    cur = StridedCursor(s, stride=5)
    reads = np.array([cur.read() for _ in range(len(s) // 5)])
    assert autocorrelation(reads, 1).rho[0] == pytest.approx(-0.5, abs=0.03)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["uniform", "normal", "chaos", "surrogate"]))
def test_range_invariant(seed, kind):
    n = 2000
    s = {
        "uniform": lambda: gen_uniform(n, seed),
        "normal": lambda: gen_normal(n, seed, sigma=90),
        "chaos": lambda: gen_synthetic_chaos(n, 3, seed, std=120),
        "surrogate": lambda: shuffle_surrogate(gen_synthetic_chaos(n, 3, seed), seed),
    }[kind]()
    assert s.samples.min() >= -127 and s.samples.max() <= 128


def test_profile_csv(tmp_path):
    prof = autocorrelation(gen_synthetic_chaos(10_000, 2, seed=1), 3)
    prof.to_csv(tmp_path / "ac.csv")
    lines = (tmp_path / "ac.csv").read_text().splitlines()
    assert lines[0] == "lag,rho"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [1, 2, 3]
