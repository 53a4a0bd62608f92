"""Shared value types: plant description, certificate data, signal histories,
sampling schedules, and closed-loop run records.

Conventions used throughout the package:

* states, inputs, and outputs are 1-d ``numpy`` arrays of ``float``;
* an input record is piecewise constant and right-open: the value at a
  segment start belongs to that segment;
* a state record is a table of time-stamped samples interpolated linearly.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, CoverageError

__all__ = [
    "PlantModel",
    "AssumptionData",
    "InputHistory",
    "StateHistory",
    "SamplingPartition",
    "SimConfig",
    "Trajectory",
    "clamp_input",
    "input_value",
    "input_integral",
    "state_value",
]

_ORIGIN_TOL = 1e-12
_FD_TOL = 1e-6


def clamp_input(u_raw, input_box) -> np.ndarray:
    """Project an input onto the admissible box, componentwise.

    Each component becomes ``min(hi_j, max(lo_j, u_j))``.  Idempotent, and
    the identity whenever ``u_raw`` already lies in the box.
    """
    box = np.asarray(input_box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ConfigurationError("input_box must be an (m, 2) array of (lo, hi) rows")
    if np.any(box[:, 0] > box[:, 1]):
        raise ConfigurationError("input_box has a row with lo > hi")
    u = np.asarray(u_raw, dtype=float).reshape(-1)
    if u.size != box.shape[0]:
        raise ConfigurationError(
            f"input has {u.size} components, box has {box.shape[0]} rows"
        )
    return np.minimum(box[:, 1], np.maximum(box[:, 0], u))


def _fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector map, used only for validation."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        step = np.zeros(x.size)
        step[i] = eps
        cols.append((np.asarray(fn(x + step), float).reshape(-1)
                     - np.asarray(fn(x - step), float).reshape(-1)) / (2.0 * eps))
    return np.column_stack(cols)


def _fd_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        step = np.zeros(x.size)
        step[i] = eps
        g[i] = (float(fn(x + step)) - float(fn(x - step))) / (2.0 * eps)
    return g


def _validation_probes(dim: int) -> list[np.ndarray]:
    rng = np.random.default_rng(12345)
    pts = [np.zeros(dim)]
    for _ in range(3):
        pts.append(rng.uniform(-0.5, 0.5, size=dim))
    return pts


@dataclass(frozen=True)
class PlantModel:
    """Plant ``xdot = f(x, u(t - tau))`` with sampled, delayed output ``h(x(t - r))``.

    Parameters
    ----------
    n, m, k_out : dimensions of state, input and output.
    f : vector field, ``f(x, u) -> (n,)``; the origin with zero input is an
        equilibrium.
    h : output map ``h(x) -> (k_out,)`` with ``h(0) = 0``.
    jac_h : Jacobian of ``h``, ``(k_out, n)``; checked against finite
        differences at construction.
    input_box : admissible input set, an ``(m, 2)`` array of ``(lo, hi)``
        rows containing 0.
    r, tau : measurement and input delays, both nonnegative.
    """

    n: int
    m: int
    k_out: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    jac_h: Callable[[np.ndarray], np.ndarray]
    input_box: np.ndarray
    r: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.k_out < 1:
            raise ConfigurationError("dimensions must be positive")
        box = np.asarray(self.input_box, dtype=float).reshape(self.m, 2)
        if np.any(box[:, 0] > 0.0) or np.any(box[:, 1] < 0.0):
            raise ConfigurationError("input_box must contain the zero input")
        object.__setattr__(self, "input_box", box)
        if self.r < 0.0 or self.tau < 0.0:
            raise ConfigurationError("delays must be nonnegative")
        f0 = np.asarray(self.f(np.zeros(self.n), np.zeros(self.m)), float).reshape(-1)
        if f0.size != self.n or np.max(np.abs(f0)) > _ORIGIN_TOL:
            raise ConfigurationError("f(0, 0) must vanish (origin equilibrium)")
        h0 = np.asarray(self.h(np.zeros(self.n)), float).reshape(-1)
        if h0.size != self.k_out or np.max(np.abs(h0)) > _ORIGIN_TOL:
            raise ConfigurationError("h(0) must vanish")
        for pt in _validation_probes(self.n):
            jac = np.asarray(self.jac_h(pt), float).reshape(self.k_out, self.n)
            fd = _fd_jacobian(lambda x: self.h(x), pt)
            if np.max(np.abs(jac - fd)) > _FD_TOL * (1.0 + np.max(np.abs(jac))):
                raise ConfigurationError("jac_h disagrees with finite differences of h")

    @property
    def delay_window(self) -> float:
        """Total prediction window r + tau."""
        return self.r + self.tau


@dataclass(frozen=True)
class AssumptionData:
    """Certificate data attached to a plant: Lyapunov pair for the absorbing
    set, local Lyapunov function and controller, observer gain and metric,
    blending levels, and the rates they certify.

    ``absorbing_level`` is the Lyapunov level whose sublevel set traps the
    plant state; ``blend_lo``/``blend_hi`` bracket the ramp of the blending
    function; ``contraction_frac`` is the fraction of the observer
    contraction rate retained once damping is active.
    """

    lyapunov: Callable[[np.ndarray], float]
    grad_lyapunov: Callable[[np.ndarray], np.ndarray]
    dissipation: Callable[[np.ndarray], float]
    local_lyapunov: Callable[[np.ndarray], float]
    grad_local_lyapunov: Callable[[np.ndarray], np.ndarray]
    local_controller: Callable[[np.ndarray], np.ndarray]
    observer_gain: np.ndarray
    error_metric: np.ndarray
    absorbing_level: float
    blend_lo: float
    blend_hi: float
    contraction_frac: float
    contraction_rate: float
    local_decay: float
    coercivity: float

    def __post_init__(self):
        gain = np.atleast_2d(np.asarray(self.observer_gain, dtype=float))
        metric = np.atleast_2d(np.asarray(self.error_metric, dtype=float))
        object.__setattr__(self, "observer_gain", gain)
        object.__setattr__(self, "error_metric", metric)
        n = metric.shape[0]
        if metric.shape != (n, n) or not np.allclose(metric, metric.T, atol=1e-12):
            raise ConfigurationError("error_metric must be square and symmetric")
        try:
            np.linalg.cholesky(metric)
        except np.linalg.LinAlgError:
            raise ConfigurationError("error_metric must be positive definite") from None
        if gain.shape[0] != n:
            raise ConfigurationError("observer_gain must have one row per state")
        if not (self.absorbing_level <= self.blend_lo < self.blend_hi):
            raise ConfigurationError(
                "levels must satisfy absorbing_level <= blend_lo < blend_hi"
            )
        if not (0.0 < self.contraction_frac < 1.0):
            raise ConfigurationError("contraction_frac must lie in (0, 1)")
        if self.contraction_rate <= 0.0 or self.local_decay <= 0.0 or self.coercivity <= 0.0:
            raise ConfigurationError("rates must be positive")
        for pt in _validation_probes(n):
            g = np.asarray(self.grad_lyapunov(pt), float).reshape(-1)
            fd = _fd_gradient(self.lyapunov, pt)
            if np.max(np.abs(g - fd)) > _FD_TOL * (1.0 + np.max(np.abs(g))):
                raise ConfigurationError("grad_lyapunov disagrees with finite differences")
            gp = np.asarray(self.grad_local_lyapunov(pt), float).reshape(-1)
            fdp = _fd_gradient(self.local_lyapunov, pt)
            if np.max(np.abs(gp - fdp)) > _FD_TOL * (1.0 + np.max(np.abs(gp))):
                raise ConfigurationError(
                    "grad_local_lyapunov disagrees with finite differences"
                )


class InputHistory:
    """Right-open piecewise-constant input record covering ``[t_min, t_now)``.

    Segments are ``(t_start, value)`` pairs with strictly increasing starts;
    the first start equals ``t_min``.  The value at a query time is the value
    of the segment whose start is the largest one not exceeding it.  Appends
    may not rewrite the covered past.
    """

    def __init__(self, t_min: float, segments: Sequence[tuple[float, Sequence[float]]] = (),
                 t_now: float | None = None):
        self.t_min = float(t_min)
        self.starts: list[float] = []
        self.values: list[np.ndarray] = []
        for t_start, value in segments:
            t_start = float(t_start)
            if self.starts and t_start <= self.starts[-1]:
                raise ConfigurationError("segment starts must be strictly increasing")
            self.starts.append(t_start)
            self.values.append(np.asarray(value, dtype=float).reshape(-1))
        if self.starts and self.starts[0] != self.t_min:
            raise ConfigurationError("first segment must start at t_min")
        if len({v.size for v in self.values}) > 1:
            raise ConfigurationError("all segment values must share a dimension")
        self.t_now = self.t_min if t_now is None else float(t_now)
        if self.t_now < self.t_min:
            raise ConfigurationError("t_now must not precede t_min")
        if self.t_now > self.t_min and not self.starts:
            raise ConfigurationError("nonempty coverage requires at least one segment")

    def advance(self, t: float) -> None:
        """Extend the covered interval to ``[t_min, t)``; monotone."""
        t = float(t)
        if t <= self.t_now:
            return
        if not self.starts:
            raise CoverageError("cannot advance an empty input record")
        self.t_now = t

    def append(self, t_start: float, value) -> None:
        """Add a new constant segment starting at ``t_start`` (>= t_now)."""
        t_start = float(t_start)
        if t_start < self.t_now:
            raise ConfigurationError("cannot rewrite already-covered input history")
        if self.starts and t_start <= self.starts[-1]:
            raise ConfigurationError("segment starts must be strictly increasing")
        if not self.starts and t_start != self.t_min:
            raise ConfigurationError("first segment must start at t_min")
        self.starts.append(t_start)
        self.values.append(np.asarray(value, dtype=float).reshape(-1))
        if t_start > self.t_now:
            self.t_now = t_start

    def value(self, t: float) -> np.ndarray:
        """Input applied at time ``t``; requires ``t_min <= t < t_now``."""
        t = float(t)
        if not (self.t_min <= t < self.t_now):
            raise CoverageError(
                f"input query at t={t!r} outside coverage [{self.t_min!r}, {self.t_now!r})"
            )
        idx = bisect.bisect_right(self.starts, t) - 1
        return self.values[idx]

    def latest_value(self) -> np.ndarray:
        """Value of the most recently appended segment."""
        if not self.values:
            raise CoverageError("empty input record")
        return self.values[-1]

    def iter_segments(self, t0: float, t1: float) -> Iterator[tuple[np.ndarray, float]]:
        """Yield ``(value, length)`` pieces partitioning ``[t0, t1)`` exactly."""
        t0 = float(t0)
        t1 = float(t1)
        if t0 > t1:
            raise CoverageError("reversed interval")
        if not (self.t_min <= t0 and t1 <= self.t_now):
            raise CoverageError(
                f"interval [{t0!r}, {t1!r}] outside coverage [{self.t_min!r}, {self.t_now!r})"
            )
        if t0 == t1:
            return
        idx = bisect.bisect_right(self.starts, t0) - 1
        while idx < len(self.starts):
            seg_lo = max(t0, self.starts[idx])
            seg_hi = t1 if idx + 1 >= len(self.starts) else min(t1, self.starts[idx + 1])
            if seg_hi > seg_lo:
                yield self.values[idx], seg_hi - seg_lo
            if seg_hi >= t1:
                return
            idx += 1

    def integral(self, t0: float, t1: float) -> np.ndarray:
        """Exact integral of the record over ``[t0, t1]`` (no quadrature)."""
        total = None
        for value, length in self.iter_segments(t0, t1):
            piece = value * length
            total = piece if total is None else total + piece
        if total is None:
            if self.values:
                return np.zeros_like(self.values[0])
            return np.zeros(0)
        return total

    def sup_abs(self, t0: float, t1: float) -> float:
        """Largest Euclidean input norm applied on ``[t0, t1)``."""
        best = 0.0
        for value, _length in self.iter_segments(t0, t1):
            best = max(best, float(np.linalg.norm(value)))
        return best


class StateHistory:
    """Time-stamped state samples with linear interpolation between them."""

    def __init__(self, times: Sequence[float] = (), states: Sequence[Sequence[float]] = ()):
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.norms: list[float] = []
        for t, x in zip(times, states, strict=True):
            self.append(t, x)

    def append(self, t: float, x) -> None:
        t = float(t)
        if self.times and t <= self.times[-1]:
            raise ConfigurationError("sample times must be strictly increasing")
        arr = np.asarray(x, dtype=float).reshape(-1).copy()
        if self.states and arr.size != self.states[0].size:
            raise ConfigurationError("state dimension changed mid-record")
        self.times.append(t)
        self.states.append(arr)
        self.norms.append(float(np.linalg.norm(arr)))

    @property
    def t_first(self) -> float:
        if not self.times:
            raise CoverageError("empty state record")
        return self.times[0]

    @property
    def t_last(self) -> float:
        if not self.times:
            raise CoverageError("empty state record")
        return self.times[-1]

    def value(self, t: float) -> np.ndarray:
        """Linearly interpolated state at ``t``; exact at sample times."""
        t = float(t)
        if not self.times:
            raise CoverageError("empty state record")
        if t < self.times[0] or t > self.times[-1]:
            raise CoverageError(
                f"state query at t={t!r} outside [{self.times[0]!r}, {self.times[-1]!r}]"
            )
        idx = bisect.bisect_left(self.times, t)
        if idx < len(self.times) and self.times[idx] == t:
            return self.states[idx]
        lo, hi = idx - 1, idx
        span = self.times[hi] - self.times[lo]
        theta = (t - self.times[lo]) / span
        return self.states[lo] + theta * (self.states[hi] - self.states[lo])

    def sup_norm(self, t0: float, t1: float) -> float:
        """Largest sampled/interpolated state norm over ``[t0, t1]``."""
        best = max(float(np.linalg.norm(self.value(t0))),
                   float(np.linalg.norm(self.value(t1))))
        lo = bisect.bisect_right(self.times, t0)
        hi = bisect.bisect_left(self.times, t1)
        for i in range(lo, hi):
            if self.norms[i] > best:
                best = self.norms[i]
        return best

    def prune_before(self, t: float) -> None:
        """Drop samples no longer needed to interpolate at times >= ``t``."""
        while len(self.times) >= 2 and self.times[1] <= t:
            del self.times[0], self.states[0], self.norms[0]


def input_value(hist: InputHistory, t: float) -> np.ndarray:
    return hist.value(t)


def input_integral(hist: InputHistory, t0: float, t1: float) -> np.ndarray:
    return hist.integral(t0, t1)


def state_value(hist: StateHistory, t: float) -> np.ndarray:
    return hist.value(t)


_GAP_SLACK = 1.0 + 1e-12  # float accumulation can push a gap one ulp past T_s


@dataclass(frozen=True)
class SamplingPartition:
    """Strictly increasing measurement times starting at 0 with gaps in (0, T_s]."""

    times: np.ndarray
    T_s: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        object.__setattr__(self, "times", times)
        if self.T_s <= 0.0:
            raise ConfigurationError("T_s must be positive")
        if times.size == 0 or times[0] != 0.0:
            raise ConfigurationError("partition must start at time 0")
        gaps = np.diff(times)
        if times.size > 1 and (np.any(gaps <= 0.0) or np.any(gaps > self.T_s * _GAP_SLACK)):
            raise ConfigurationError("partition gaps must lie in (0, T_s]")


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop run settings: hold period, predictor steps, horizon,
    integrator cap, partition seed, and row-recording cadence."""

    T_H: float
    N: int
    horizon: float
    dt_max: float
    seed: int = 0
    record_dt: float = 0.05

    def __post_init__(self):
        if self.T_H <= 0.0:
            raise ConfigurationError("T_H must be positive")
        if self.N < 1:
            raise ConfigurationError("N must be at least 1")
        if self.horizon <= 0.0:
            raise ConfigurationError("horizon must be positive")
        if not (0.0 < self.dt_max <= self.T_H):
            raise ConfigurationError("dt_max must lie in (0, T_H]")
        if self.record_dt <= 0.0:
            raise ConfigurationError("record_dt must be positive")


@dataclass
class Trajectory:
    """Row-per-event record of a closed-loop run.

    Auxiliary fields: ``reset_records`` holds, per measurement time, the
    inter-sample state right after its reset together with the sampled
    output it was assigned from; ``input_segments`` is the full applied
    input record.
    """

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    u_applied: np.ndarray
    lyap_x: np.ndarray
    lyap_z: np.ndarray
    norm: np.ndarray
    reset_records: list = field(default_factory=list)
    input_segments: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        if np.any(np.diff(self.t) < 0.0):
            raise ConfigurationError("trajectory times must be nondecreasing")
        rows = self.t.size
        for name in ("x", "z", "w", "u_applied"):
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if arr.shape[0] != rows:
                raise ConfigurationError(f"column {name} has wrong row count")
            setattr(self, name, arr)
        for name in ("lyap_x", "lyap_z", "norm"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != rows:
                raise ConfigurationError(f"column {name} has wrong row count")
            setattr(self, name, arr)

    def check_inputs_in_box(self, input_box) -> bool:
        box = np.asarray(input_box, dtype=float)
        return bool(np.all(self.u_applied >= box[:, 0]) and np.all(self.u_applied <= box[:, 1]))

    def write_csv(self, path) -> None:
        """Dump rows with full double precision (17 significant digits)."""
        n = self.x.shape[1]
        k = self.w.shape[1]
        m = self.u_applied.shape[1]
        header = (["t"]
                  + [f"x{i + 1}" for i in range(n)]
                  + [f"z{i + 1}" for i in range(n)]
                  + [f"w{i + 1}" for i in range(k)]
                  + [f"u{i + 1}" for i in range(m)]
                  + ["Vx", "Vz", "norm"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.t.size):
                row = ([self.t[i]] + list(self.x[i]) + list(self.z[i])
                       + list(self.w[i]) + list(self.u_applied[i])
                       + [self.lyap_x[i], self.lyap_z[i], self.norm[i]])
                writer.writerow([f"{v:.17g}" for v in row])
