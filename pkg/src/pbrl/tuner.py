"""Derivative-free hyperparameter search driven by the figure of merit.

Two searches are provided: a Nelder-Mead simplex over whole parameter
vectors, and a four-point golden-section search over a single log-scale
exponent ``c`` that multiplies both threshold step sizes by ``10**c``.
Vectors outside the admissible box never reach the simulator; they score a
fixed guard FOM of 2000.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .agent import PbrlParams
from .harness import FOM_GUARD

PHI = (1.0 + math.sqrt(5.0)) / 2.0
INV_PHI = PHI - 1.0
PLATEAU_RATIO = 0.9
PBRL_BASE = (3.208, 547.0, 0.6774)

# (lower, upper) open intervals; a vector is admissible iff every entry is strictly inside.
PBRL_BOX = ((0.0, 10.0), (10.0, 1000.0), (0.0, 1.0))
# The printed r_penalty bound of (0, 1) contradicts the tuned 773.8; (0, 1000) matches the simplex.
Q_BOX = ((0.0, 1000.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0))

PBRL_PARAM_NAMES = ("delta_th", "a0", "pbrl_gamma")
Q_PARAM_NAMES = ("r_penalty", "q_gamma", "alpha", "epsilon0")


def in_box(vector: Sequence[float], box: Sequence[Tuple[float, float]]) -> bool:
    return len(vector) == len(box) and all(lo < v < hi for v, (lo, hi) in zip(vector, box))


@dataclass
class Objective:
    """FOM evaluator with a short-circuit guard.

    ``simulations`` counts calls that actually reached ``evaluate``.
    """

    evaluate: Callable[[np.ndarray], float]
    box: Optional[Sequence[Tuple[float, float]]] = None
    guard_value: float = FOM_GUARD
    simulations: int = 0
    history: List[Tuple[np.ndarray, float]] = field(default_factory=list)

    def __call__(self, vector: Sequence[float]) -> float:
        x = np.asarray(vector, dtype=float)
        if self.box is not None and not in_box(x, self.box):
            value = self.guard_value
        else:
            self.simulations += 1
            value = self.evaluate(x)
        self.history.append((x.copy(), value))
        return value


@dataclass
class LogRow:
    iteration: int
    params: np.ndarray
    fom: float


@dataclass
class SimplexState:
    vertices: np.ndarray
    values: np.ndarray
    iteration: int = 0

    def order(self) -> None:
        # stable sort keeps the lower index first among equal FOMs
        idx = np.argsort(self.values, kind="stable")
        self.vertices = self.vertices[idx]
        self.values = self.values[idx]


def nelder_mead(
    objective: Callable[[Sequence[float]], float],
    initial_vertices: Sequence[Sequence[float]],
    iterations: int = 20,
    reflect: float = 1.0,
    expand: float = 2.0,
    contract: float = 0.5,
    shrink: float = 0.5,
    log: Optional[List[LogRow]] = None,
) -> Tuple[float, np.ndarray]:
    """Run exactly ``iterations`` simplex transformations; return the best vertex.

    ``log`` receives one row per initial vertex (iteration 0) and one row per
    iteration holding the best vertex after it.
    """
    verts = np.array(initial_vertices, dtype=float)
    n = verts.shape[1]
    if verts.shape[0] != n + 1:
        raise ValueError(f"need {n + 1} vertices for dimension {n}, got {verts.shape[0]}")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if np.linalg.matrix_rank(verts[1:] - verts[0]) < n:
        raise ValueError("degenerate simplex: vertices are not affinely independent")
    state = SimplexState(verts, np.array([objective(v) for v in verts], dtype=float))
    if log is not None:
        log.extend(LogRow(0, v.copy(), f) for v, f in zip(state.vertices, state.values))
    state.order()

    for it in range(1, iterations + 1):
        x, f = state.vertices, state.values
        centroid = x[:-1].mean(axis=0)
        xr = centroid + reflect * (centroid - x[-1])
        fr = objective(xr)
        if f[0] <= fr < f[-2]:
            x[-1], f[-1] = xr, fr
        elif fr < f[0]:
            xe = centroid + expand * (xr - centroid)
            fe = objective(xe)
            if fe < fr:
                x[-1], f[-1] = xe, fe
            else:
                x[-1], f[-1] = xr, fr
        else:
            if fr < f[-1]:
                xc = centroid + contract * (xr - centroid)
                fc = objective(xc)
                accepted = fc <= fr
            else:
                xc = centroid + contract * (x[-1] - centroid)
                fc = objective(xc)
                accepted = fc < f[-1]
            if accepted:
                x[-1], f[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    x[i] = x[0] + shrink * (x[i] - x[0])
                    f[i] = objective(x[i])
        state.iteration = it
        state.order()
        if log is not None:
            log.append(LogRow(it, state.vertices[0].copy(), float(state.values[0])))
    return float(state.values[0]), state.vertices[0].copy()


def pbrl_initial_simplex(d_th: float = 0.1, d_a0: float = 1.0, d_gamma: float = 0.01) -> np.ndarray:
    return np.array(
        [
            [d_th, 10 + d_a0, 1 - d_gamma],
            [d_th, 1000 - d_a0, 0.5],
            [10 - d_th, 10 + d_a0, 0.5],
            [d_th, 10 + d_a0, d_gamma],
        ]
    )


def q_initial_simplex(d_r: float = 1.0, d: float = 0.01) -> np.ndarray:
    return np.array(
        [
            [1000 - d_r, d, d, d],
            [1000 - d_r, 0.5, d, d],
            [d_r, 1 - d, 0.5, 1 - d],
            [d_r, d, 1 - d, 0.5],
            [d_r, d, d, d],
        ]
    )


@dataclass
class GoldenState:
    c: np.ndarray  # c1 < c2 < c3 < c4
    f: np.ndarray
    iteration: int = 0


def golden_initial_points() -> np.ndarray:
    """(-2, 0, 2(phi-1), 2phi): a golden-spaced bracket of [-2, 2phi]."""
    return np.array([-2.0, 0.0, 2.0 * (PHI - 1.0), 2.0 * PHI])


def golden_section(
    objective: Callable[[float], float],
    iterations: int = 25,
    initial: Optional[Sequence[float]] = None,
    ratio: float = PLATEAU_RATIO,
    log: Optional[List[LogRow]] = None,
) -> float:
    """Four-point golden-section minimization of ``objective`` over ``c``.

    When the outer and the inner pairs tie (``f1 == f4`` and ``f2 == f3``)
    the bracket cannot tell which side to drop, so all four points are pulled
    toward the centre by ``ratio`` and re-evaluated; that counts as one
    iteration.  Returns the best ``c`` evaluated.
    """
    c = np.array(golden_initial_points() if initial is None else initial, dtype=float)
    if c.shape != (4,) or not np.all(np.diff(c) > 0):
        raise ValueError("need four strictly increasing points")
    f = np.array([objective(v) for v in c], dtype=float)
    state = GoldenState(c, f)
    best_i = int(np.argmin(f))
    best_c, best_f = float(c[best_i]), float(f[best_i])
    if log is not None:
        log.extend(LogRow(0, np.array([v]), fv) for v, fv in zip(c, f))

    def consider(cv: float, fv: float) -> None:
        nonlocal best_c, best_f
        if fv < best_f:
            best_c, best_f = cv, fv

    for it in range(1, iterations + 1):
        c, f = state.c, state.f
        if f[0] == f[3] and f[1] == f[2]:
            centre = (c[0] + c[3]) / 2.0
            c[:] = centre + ratio * (c - centre)
            for i in range(4):
                f[i] = objective(c[i])
                consider(c[i], f[i])
        elif f[1] < f[2] or (f[1] == f[2] and f[0] <= f[3]):
            # minimum lies in [c1, c3]
            c[3], f[3] = c[2], f[2]
            c[2], f[2] = c[1], f[1]
            c[1] = c[3] - INV_PHI * (c[3] - c[0])
            f[1] = objective(c[1])
            consider(c[1], f[1])
        else:
            c[0], f[0] = c[1], f[1]
            c[1], f[1] = c[2], f[2]
            c[2] = c[0] + INV_PHI * (c[3] - c[0])
            f[2] = objective(c[2])
            consider(c[2], f[2])
        state.iteration = it
        if log is not None:
            log.append(LogRow(it, np.array([best_c]), best_f))
    return best_c


def scale_params(c: float, base: Sequence[float] = PBRL_BASE) -> PbrlParams:
    """Scale both step sizes by ``10**c``; the discount stays fixed."""
    if not math.isfinite(c):
        raise ValueError("c must be finite")
    k = 10.0**c
    return PbrlParams(k * base[0], k * base[1], base[2])


def write_log(rows: Sequence[LogRow], names: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", *names, "fom"])
        for row in rows:
            writer.writerow([row.iteration, *(repr(float(v)) for v in row.params), repr(float(row.fom))])
