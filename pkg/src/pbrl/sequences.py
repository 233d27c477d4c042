"""Random sequences that drive threshold decisions.

A :class:`SampleSeries` is an immutable array of integer signal levels in
``[-127, 128]``.  Series come from recorded chaos traces (offset-binary bytes
or one-integer-per-line text), from a synthetic negatively autocorrelated
generator, from plain pseudorandom generators, or from shuffling another
series.  :class:`StridedCursor` reads a series at a fixed sampling interval.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

SIGNAL_MIN = -127
SIGNAL_MAX = 128
BYTE_OFFSET = 127
DEFAULT_BASE_PERIOD_PS = 10.0
DEFAULT_SIGMA = 40.0
SYNTHETIC_STD = 40.0


class DegenerateSeriesError(ValueError):
    """Raised when a series has zero variance."""


@dataclass(frozen=True)
class SampleSeries:
    samples: np.ndarray
    base_period: float = DEFAULT_BASE_PERIOD_PS
    label: str = ""
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("empty series")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("samples must be integers")
        if arr.min() < SIGNAL_MIN or arr.max() > SIGNAL_MAX:
            raise ValueError(
                f"samples outside [{SIGNAL_MIN}, {SIGNAL_MAX}]: "
                f"min={arr.min()}, max={arr.max()}"
            )
        arr = arr.astype(np.int16, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.size)

    def to_bytes(self) -> bytes:
        """Offset-binary encoding, the inverse of :func:`load_chaos_file`."""
        return (self.samples.astype(np.int32) + BYTE_OFFSET).astype(np.uint8).tobytes()


@dataclass
class StridedCursor:
    """Reads every ``stride``-th sample, wrapping at the end of the series."""

    series: SampleSeries
    stride: int = 1
    position: int = 0

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        self.position %= len(self.series)

    def read(self) -> int:
        value = int(self.series.samples[self.position])
        self.position = (self.position + self.stride) % len(self.series)
        return value


@dataclass(frozen=True)
class AutocorrelationProfile:
    lags: np.ndarray
    rho: np.ndarray = field(repr=False)

    def argmin_lag(self) -> int:
        return int(self.lags[int(np.argmin(self.rho))])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "rho"])
            for lag, r in zip(self.lags, self.rho):
                writer.writerow([int(lag), repr(float(r))])


def load_chaos_file(
    data: bytes, base_period: float = DEFAULT_BASE_PERIOD_PS, label: str = "chaos-file"
) -> SampleSeries:
    """Decode an offset-binary byte stream: byte ``u`` becomes ``u - 127``."""
    if len(data) == 0:
        raise ValueError("empty series")
    raw = np.frombuffer(data, dtype=np.uint8).astype(np.int16)
    return SampleSeries(raw - BYTE_OFFSET, base_period=base_period, label=label)


def load_chaos_text(
    text: str, base_period: float = DEFAULT_BASE_PERIOD_PS, label: str = "chaos-file"
) -> SampleSeries:
    values = [int(tok) for tok in text.split()]
    if not values:
        raise ValueError("empty series")
    return SampleSeries(np.array(values), base_period=base_period, label=label)


def load_chaos_path(path: str | Path, base_period: float = DEFAULT_BASE_PERIOD_PS) -> SampleSeries:
    """Load a ``.txt`` (one integer per line) or binary offset-binary trace."""
    path = Path(path)
    label = f"chaos-file:{path}"
    if path.suffix.lower() == ".txt":
        return load_chaos_text(path.read_text(), base_period=base_period, label=label)
    return load_chaos_file(path.read_bytes(), base_period=base_period, label=label)


def gen_synthetic_chaos(
    length: int, lag: int, seed: int, std: float = SYNTHETIC_STD
) -> SampleSeries:
    """Lag-differenced white noise ``w[t] - w[t-lag]``.

    The differencing gives an autocorrelation of exactly -0.5 at ``lag`` and
    zero at every other nonzero lag, the property that makes the recorded
    laser traces useful for decisions.
    """
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    if length <= lag:
        raise ValueError(f"length ({length}) must exceed lag ({lag})")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(length + lag)
    diff = w[lag:] - w[:-lag]
    # var(diff) = 2, so this scale gives the requested std before clipping
    x = np.clip(np.round(diff * (std / np.sqrt(2.0))), SIGNAL_MIN, SIGNAL_MAX)
    return SampleSeries(x.astype(np.int16), label=f"synthetic-chaos:{lag}", seed=seed)


def shuffle_surrogate(series: SampleSeries, seed: int) -> SampleSeries:
    """Random time-shuffle: same value histogram, no temporal correlation."""
    rng = np.random.default_rng(seed)
    return SampleSeries(
        rng.permutation(series.samples),
        base_period=series.base_period,
        label=f"surrogate:{series.label}",
        seed=seed,
    )


def gen_uniform(length: int, seed: int) -> SampleSeries:
    if length < 1:
        raise ValueError("empty series")
    rng = np.random.default_rng(seed)
    x = rng.integers(SIGNAL_MIN, SIGNAL_MAX + 1, size=length)
    return SampleSeries(x.astype(np.int16), label="uniform", seed=seed)


def gen_normal(length: int, seed: int, sigma: float = DEFAULT_SIGMA) -> SampleSeries:
    if length < 1:
        raise ValueError("empty series")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    rng = np.random.default_rng(seed)
    x = np.clip(np.round(rng.normal(0.0, sigma, size=length)), SIGNAL_MIN, SIGNAL_MAX)
    return SampleSeries(x.astype(np.int16), label=f"normal:{sigma:g}", seed=seed)


def autocorrelation(series: SampleSeries | np.ndarray, max_lag: int) -> AutocorrelationProfile:
    """Sample autocorrelation at lags ``1..max_lag``, normalized by lag-0 sum."""
    x = np.asarray(series.samples if isinstance(series, SampleSeries) else series, dtype=float)
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if x.size <= max_lag + 1:
        raise ValueError(f"series length {x.size} too short for max_lag {max_lag}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        raise DegenerateSeriesError("degenerate series")
    lags = np.arange(1, max_lag + 1)
    rho = np.array([np.dot(d[:-k], d[k:]) / denom for k in lags])
    return AutocorrelationProfile(lags=lags, rho=rho)
