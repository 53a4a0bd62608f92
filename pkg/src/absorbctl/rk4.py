"""Fixed-step classic Runge-Kutta integration, aligned to breakpoints.

All integrators in this package are fixed-step on purpose: resets and input
switches are applied exactly at known times, so spans between breakpoints
are smooth and a fourth-order fixed step converges cleanly under grid
refinement.  Adaptive steppers would trade that determinism away.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import CoverageError
from .model import InputHistory, PlantModel

__all__ = ["rk4_step", "integrate_span", "flow_on_history"]


def rk4_step(rhs: Callable[[float, np.ndarray], np.ndarray],
             t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classic fourth-order step."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_span(rhs, t0: float, t1: float, y0: np.ndarray, dt_max: float,
                   on_node=None) -> np.ndarray:
    """Integrate over ``[t0, t1]`` with uniform substeps no longer than
    ``dt_max``; the final substep lands exactly on ``t1``.  ``on_node`` is
    called with ``(t, y)`` after every substep."""
    if t1 < t0:
        raise CoverageError("reversed integration span")
    if t1 == t0:
        return y0
    n_sub = max(1, math.ceil((t1 - t0) / dt_max))
    dt = (t1 - t0) / n_sub
    y = y0
    for i in range(n_sub):
        t_a = t0 + i * dt
        y = rk4_step(rhs, t_a, y, dt)
        t_b = t1 if i == n_sub - 1 else t0 + (i + 1) * dt
        if on_node is not None:
            on_node(t_b, y)
    return y


def flow_on_history(plant: PlantModel, x0, hist: InputHistory, t_start: float,
                    t_end: float, substep: float) -> np.ndarray:
    """Reference flow of ``xdot = f(x, u(t))`` with ``u`` read from ``hist``.

    Integration spans are split exactly at the input record's segment
    boundaries, so each span sees a constant input and no discontinuity is
    stepped across.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    edges = [t_start]
    for s in hist.starts:
        if t_start < s < t_end:
            edges.append(s)
    edges.append(t_end)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        u_span = hist.value(lo)

        def rhs(_t, y, u=u_span):
            return np.asarray(plant.f(y, u), float).reshape(-1)

        x = integrate_span(rhs, lo, hi, x, substep)
    return x
