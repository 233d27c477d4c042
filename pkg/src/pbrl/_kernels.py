"""Compiled learning-round loops.

These mirror ``harness.run_episode`` driven by ``PbrlAgent`` / ``QAgent``
operation for operation, so both paths produce bit-identical rounds; the
test suite checks that.  ``phys`` is ``EnvConfig.physics_array()`` and
``ranges`` the four discretization half-widths.
"""

import math

import numpy as np
from numba import njit

N_BINS = 6
N_STATES = N_BINS**4


@njit(cache=True)
def _bin(value, half_width):
    b = int(math.floor((value + half_width) / (2.0 * half_width) * N_BINS))
    if b < 0:
        return 0
    if b > N_BINS - 1:
        return N_BINS - 1
    return b


@njit(cache=True)
def _discretize(x, x_dot, theta, theta_dot, ranges):
    bx = _bin(x, ranges[0])
    bxd = _bin(x_dot, ranges[1])
    bt = _bin(theta, ranges[2])
    btd = _bin(theta_dot, ranges[3])
    return ((bx * N_BINS + bxd) * N_BINS + bt) * N_BINS + btd


@njit(cache=True)
def _step(x, x_dot, theta, theta_dot, action, phys):
    gravity, cart_mass, pole_mass, half_length, force_mag, tau, x_limit, theta_limit = (
        phys[0], phys[1], phys[2], phys[3], phys[4], phys[5], phys[6], phys[7]
    )
    force = force_mag if action == 1 else -force_mag
    total_mass = cart_mass + pole_mass
    polemass_length = pole_mass * half_length
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (gravity * sin_t - cos_t * temp) / (
        half_length * (4.0 / 3.0 - pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
    x = x + tau * x_dot
    x_dot = x_dot + tau * x_acc
    theta = theta + tau * theta_dot
    theta_dot = theta_dot + tau * theta_acc
    failed = abs(x) > x_limit or abs(theta) > theta_limit
    return x, x_dot, theta, theta_dot, failed


@njit(cache=True)
def pbrl_round(samples, start, stride, init_states, phys, ranges,
               delta_th, a0, gamma, max_steps, window):
    n = samples.size
    n_episodes = init_states.shape[0]
    n_windows = (n_episodes + window - 1) // window
    table = np.zeros(N_STATES)
    success = np.zeros(n_episodes, np.int64)
    seen = np.zeros((n_windows, N_STATES), np.bool_)
    trace_s = np.empty(max_steps, np.int64)
    trace_a = np.empty(max_steps, np.int64)
    pos = start % n
    for e in range(n_episodes):
        w = e // window
        x = init_states[e, 0]
        x_dot = init_states[e, 1]
        theta = init_states[e, 2]
        theta_dot = init_states[e, 3]
        s = _discretize(x, x_dot, theta, theta_dot, ranges)
        seen[w, s] = True
        steps = 0
        for t in range(1, max_steps + 1):
            sample = samples[pos]
            pos = (pos + stride) % n
            a = 1 if sample > table[s] else 2
            trace_s[t - 1] = s
            trace_a[t - 1] = a
            x, x_dot, theta, theta_dot, failed = _step(x, x_dot, theta, theta_dot, a, phys)
            if failed:
                for k in range(t):
                    sign = -1.0 if trace_a[k] == 1 else 1.0
                    table[trace_s[k]] -= sign * a0 * gamma ** float(t - (k + 1))
                break
            sign = -1.0 if a == 1 else 1.0
            table[s] += sign * delta_th
            steps += 1
            s = _discretize(x, x_dot, theta, theta_dot, ranges)
            seen[w, s] = True
        success[e] = steps
    return success, seen, table


@njit(cache=True)
def q_round(uniforms, init_states, phys, ranges,
            r_penalty, gamma, alpha, epsilon0, max_steps, window, grace_step):
    n_episodes = init_states.shape[0]
    n_windows = (n_episodes + window - 1) // window
    q = np.zeros((N_STATES, 2))
    success = np.zeros(n_episodes, np.int64)
    seen = np.zeros((n_windows, N_STATES), np.bool_)
    u = 0
    for e in range(n_episodes):
        w = e // window
        epsilon = epsilon0 / (e + 1)
        x = init_states[e, 0]
        x_dot = init_states[e, 1]
        theta = init_states[e, 2]
        theta_dot = init_states[e, 3]
        s = _discretize(x, x_dot, theta, theta_dot, ranges)
        seen[w, s] = True
        steps = 0
        for t in range(1, max_steps + 1):
            explore = uniforms[u] < epsilon
            u += 1
            if explore:
                a = 1 if uniforms[u] < 0.5 else 2
                u += 1
            elif q[s, 0] > q[s, 1]:
                a = 1
            elif q[s, 1] > q[s, 0]:
                a = 2
            else:
                a = 1 if uniforms[u] < 0.5 else 2
                u += 1
            x, x_dot, theta, theta_dot, failed = _step(x, x_dot, theta, theta_dot, a, phys)
            ns = _discretize(x, x_dot, theta, theta_dot, ranges)
            if failed:
                reward = -r_penalty if t < grace_step else 0.0
                bootstrap = 0.0
            else:
                reward = 1.0
                bootstrap = max(q[ns, 0], q[ns, 1])
            q[s, a - 1] += alpha * (reward + gamma * bootstrap - q[s, a - 1])
            if failed:
                break
            steps += 1
            s = ns
            seen[w, s] = True
        success[e] = steps
    return success, seen, q
