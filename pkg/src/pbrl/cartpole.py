"""Cart-pole dynamics, failure test, and the 6x6x6x6 state discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Tuple

import numpy as np

N_BINS = 6
N_STATES = N_BINS**4
PUSH_RIGHT = 1
PUSH_LEFT = 2


class CartState(NamedTuple):
    x: float
    x_dot: float
    theta: float
    theta_dot: float

    def __neg__(self) -> "CartState":
        return CartState(-self.x, -self.x_dot, -self.theta, -self.theta_dot)


@dataclass(frozen=True)
class EnvConfig:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    force_mag: float = 10.0
    tau: float = 0.02
    x_limit: float = 2.4
    theta_limit: float = math.radians(12.0)
    x_range: float = 2.4
    x_dot_range: float = 3.0
    theta_range: float = math.radians(12.0)
    theta_dot_range: float = 2.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite")
            # force_mag = 0 is allowed so the unforced system can be studied
            if value < 0 or (value == 0 and f.name != "force_mag"):
                raise ValueError(f"{f.name} must be > 0, got {value}")

    @property
    def ranges(self) -> Tuple[float, float, float, float]:
        """Half-widths of the symmetric discretization ranges."""
        return (self.x_range, self.x_dot_range, self.theta_range, self.theta_dot_range)

    def physics_array(self) -> np.ndarray:
        return np.array(
            [
                self.gravity,
                self.cart_mass,
                self.pole_mass,
                self.half_length,
                self.force_mag,
                self.tau,
                self.x_limit,
                self.theta_limit,
            ]
        )


DEFAULT_ENV = EnvConfig()


def reset(rng: np.random.Generator) -> CartState:
    """Near-upright start: each variable uniform in [-0.05, 0.05]."""
    return CartState(*(float(v) for v in rng.uniform(-0.05, 0.05, size=4)))


def step(
    state: CartState, action: int, config: EnvConfig = DEFAULT_ENV
) -> Tuple[CartState, bool]:
    """One explicit-Euler step; returns the successor and whether it failed."""
    if action not in (PUSH_RIGHT, PUSH_LEFT):
        raise ValueError(f"action must be 1 or 2, got {action}")
    x, x_dot, theta, theta_dot = state
    if not all(math.isfinite(v) for v in state):
        raise ValueError(f"non-finite state {state}")
    force = config.force_mag if action == PUSH_RIGHT else -config.force_mag
    total_mass = config.cart_mass + config.pole_mass
    polemass_length = config.pole_mass * config.half_length
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (config.gravity * sin_t - cos_t * temp) / (
        config.half_length * (4.0 / 3.0 - config.pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
    x = x + config.tau * x_dot
    x_dot = x_dot + config.tau * x_acc
    theta = theta + config.tau * theta_dot
    theta_dot = theta_dot + config.tau * theta_acc
    failed = abs(x) > config.x_limit or abs(theta) > config.theta_limit
    return CartState(x, x_dot, theta, theta_dot), failed


def bin_of(value: float, half_width: float) -> int:
    """Equal-width bins over [-half_width, half_width], left-closed, top bin closed."""
    b = int(math.floor((value + half_width) / (2.0 * half_width) * N_BINS))
    return min(max(b, 0), N_BINS - 1)


def bins_to_index(bins: Tuple[int, int, int, int]) -> int:
    bx, bxd, bt, btd = bins
    return ((bx * N_BINS + bxd) * N_BINS + bt) * N_BINS + btd


def index_to_bins(index: int) -> Tuple[int, int, int, int]:
    if not 0 <= index < N_STATES:
        raise ValueError(f"state index {index} outside [0, {N_STATES})")
    btd = index % N_BINS
    index //= N_BINS
    bt = index % N_BINS
    index //= N_BINS
    return (index // N_BINS, index % N_BINS, bt, btd)


def discretize(state: CartState, config: EnvConfig = DEFAULT_ENV) -> int:
    return bins_to_index(tuple(bin_of(v, r) for v, r in zip(state, config.ranges)))
