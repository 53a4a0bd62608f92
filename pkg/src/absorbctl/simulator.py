"""Closed-loop simulation of the sampled, delayed plant with its observer,
inter-sample output predictor, and held predictor-based control.

The run is event driven: between events the coupled states integrate with
fixed-step RK4, and the event set is built so that no span straddles a
discontinuity.  Events are measurement times (reset of the inter-sample
state), hold times (a new input segment), recording instants, and the
delayed images of every input switching time (pure integration-alignment
nodes).  Coincident events are grouped and applied in a fixed order:
measurement reset, then hold update, then recording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .controller import hold_control, hold_control_delay_free
from .errors import ConfigurationError, CoverageError, InsufficientDataError
from .model import (AssumptionData, InputHistory, PlantModel, SamplingPartition,
                    SimConfig, StateHistory, Trajectory)
from .observer import BlendingFn, observer_correction
from .rk4 import integrate_span

__all__ = [
    "InitialData",
    "TuneResult",
    "generate_partition",
    "simulate_closed_loop",
    "composite_norm",
    "initial_composite_norm",
    "fit_decay_rate",
    "run_summary",
    "pilot_tune",
]

_EVENT_ATOL = 1e-12
_NORM_FLOOR = 1e-300

# within-group action order: reset, hold, record; break nodes only align spans
_SAMPLE, _HOLD, _RECORD, _BREAK = 0, 1, 2, 3


@dataclass
class InitialData:
    """Initial data for a closed-loop run.

    ``x0`` is either a single state (constant history on ``[-r, 0]``) or a
    pair ``(times, states)`` sampling that interval with ``times[0] = -r``
    and ``times[-1] = 0``.  ``u0_segments`` are ``(t_start, value)`` pairs
    covering ``[-r-tau, 0)``; values must lie in the input box.  ``w0`` is
    the inter-sample state before the reset at time 0 overrides it.
    """

    x0: object
    z0: np.ndarray
    u0_segments: Sequence[tuple[float, Sequence[float]]] = ()
    w0: np.ndarray | None = None

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float).reshape(-1)
        if isinstance(self.x0, tuple) and len(self.x0) == 2:
            times = np.asarray(self.x0[0], dtype=float).reshape(-1)
            states = np.atleast_2d(np.asarray(self.x0[1], dtype=float))
            if times.size != states.shape[0]:
                raise ConfigurationError("x0 table times and states disagree in length")
            self.x0 = (times, states)
        else:
            self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        self.u0_segments = tuple(
            (float(t), np.asarray(v, dtype=float).reshape(-1)) for t, v in self.u0_segments
        )
        if self.w0 is not None:
            self.w0 = np.asarray(self.w0, dtype=float).reshape(-1)

    def state_history(self, r: float) -> StateHistory:
        """Plant history on ``[-r, 0]``."""
        hist = StateHistory()
        if isinstance(self.x0, tuple):
            times, states = self.x0
            if abs(times[0] + r) > _EVENT_ATOL or abs(times[-1]) > _EVENT_ATOL:
                raise ConfigurationError("x0 table must cover exactly [-r, 0]")
            for i, t in enumerate(times):
                t_snap = -r if i == 0 else (0.0 if i == times.size - 1 else float(t))
                hist.append(t_snap, states[i])
        else:
            if r > 0.0:
                hist.append(-r, self.x0)
            hist.append(0.0, self.x0)
        return hist

    def input_history(self, r: float, tau: float, input_box) -> InputHistory:
        """Applied-input record on ``[-r-tau, 0)``; empty when delay-free."""
        window = r + tau
        if window == 0.0:
            if self.u0_segments:
                raise ConfigurationError("u0_segments must be empty when r = tau = 0")
            return InputHistory(0.0)
        if not self.u0_segments:
            m = np.asarray(input_box, dtype=float).shape[0]
            return InputHistory(-window, [(-window, np.zeros(m))], t_now=0.0)
        box = np.asarray(input_box, dtype=float)
        segments = []
        for i, (t, v) in enumerate(self.u0_segments):
            if i == 0:
                if abs(t + window) > _EVENT_ATOL:
                    raise ConfigurationError("first u0 segment must start at -(r + tau)")
                t = -window
            if t >= 0.0:
                raise ConfigurationError("u0 segments must start before time 0")
            if np.any(v < box[:, 0]) or np.any(v > box[:, 1]):
                raise ConfigurationError("u0 segment value outside the input box")
            segments.append((t, v))
        return InputHistory(-window, segments, t_now=0.0)

    def initial_w(self, k_out: int) -> np.ndarray:
        if self.w0 is None:
            return np.zeros(k_out)
        if self.w0.size != k_out:
            raise ConfigurationError("w0 has the wrong dimension")
        return self.w0.copy()

    def initial_x0_at_zero(self) -> np.ndarray:
        if isinstance(self.x0, tuple):
            return np.asarray(self.x0[1][-1], dtype=float).reshape(-1).copy()
        return self.x0.copy()


def generate_partition(T_s: float, horizon: float, seed: int,
                       min_frac: float = 0.5) -> SamplingPartition:
    """Seeded measurement schedule: gaps uniform on [min_frac*T_s, T_s],
    first time 0, last time >= horizon."""
    if T_s <= 0.0 or horizon <= 0.0:
        raise ConfigurationError("T_s and horizon must be positive")
    if not (0.0 < min_frac <= 1.0):
        raise ConfigurationError("min_frac must lie in (0, 1]")
    if min_frac == 1.0:
        # exact uniform grid; accumulation would drift past the point count
        n_gaps = math.ceil(horizon / T_s)
        times = np.arange(n_gaps + 1, dtype=float) * T_s
        while times[-1] < horizon:
            times = np.append(times, times[-1] + T_s)
        return SamplingPartition(times, T_s)
    rng = np.random.default_rng(seed)
    times = [0.0]
    while times[-1] < horizon:
        times.append(times[-1] + rng.uniform(min_frac * T_s, T_s))
    return SamplingPartition(np.asarray(times), T_s)


def _event_groups(partition: SamplingPartition, config: SimConfig,
                  plant: PlantModel, init_starts: Sequence[float]) -> list[tuple[float, set]]:
    horizon = config.horizon
    events: list[tuple[float, int]] = []
    for t in partition.times:
        if t <= horizon + _EVENT_ATOL:
            events.append((float(t), _SAMPLE))
    hold_times = []
    j = 0
    while True:
        t = j * config.T_H
        if t > horizon + _EVENT_ATOL:
            break
        hold_times.append(t)
        events.append((t, _HOLD))
        j += 1
    k = 0
    last_record = 0.0
    while True:
        t = k * config.record_dt
        if t > horizon + _EVENT_ATOL:
            break
        last_record = t
        events.append((t, _RECORD))
        k += 1
    if abs(last_record - horizon) > _EVENT_ATOL:
        events.append((horizon, _RECORD))
    # delayed images of every input switch: where u(t - tau) and
    # u(t - r - tau) jump inside the plant and observer equations
    window = plant.delay_window
    for s in list(init_starts) + hold_times:
        if plant.tau > 0.0:
            img = s + plant.tau
            if _EVENT_ATOL < img <= horizon + _EVENT_ATOL:
                events.append((img, _BREAK))
        if window > 0.0:
            img = s + window
            if _EVENT_ATOL < img <= horizon + _EVENT_ATOL:
                events.append((img, _BREAK))
    events.sort()
    groups: list[tuple[float, set]] = []
    for t, kind in events:
        if groups and t - groups[-1][0] <= _EVENT_ATOL:
            groups[-1][1].add(kind)
        else:
            groups.append((t, {kind}))
    if not groups or groups[0][0] != 0.0 or _SAMPLE not in groups[0][1]:
        raise ConfigurationError("schedule must begin with a measurement at time 0")
    return groups


def simulate_closed_loop(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
                         partition: SamplingPartition, config: SimConfig,
                         init: InitialData) -> Trajectory:
    """Run the full loop over ``[0, horizon]`` and record a trajectory.

    Rows are written at every measurement, hold, and recording instant
    (once per instant when they coincide, after all actions at it).
    """
    if partition.times[-1] < config.horizon - _EVENT_ATOL:
        raise ConfigurationError("partition must cover the simulation horizon")
    n, k_out = plant.n, plant.k_out
    xhist = init.state_history(plant.r)
    uhist = init.input_history(plant.r, plant.tau, plant.input_box)
    groups = _event_groups(partition, config, plant, uhist.starts)

    if init.z0.size != n:
        raise ConfigurationError("z0 has the wrong dimension")
    Y = np.concatenate([init.initial_x0_at_zero(), init.z0.copy(),
                        init.initial_w(k_out)])
    x_sl, z_sl, w_sl = slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + k_out)

    def make_rhs(u_plant: np.ndarray, u_obs: np.ndarray):
        def rhs(_t: float, y: np.ndarray) -> np.ndarray:
            x, z, w = y[x_sl], y[z_sl], y[w_sl]
            fz = np.asarray(plant.f(z, u_obs), float).reshape(-1)
            out = np.empty_like(y)
            out[x_sl] = np.asarray(plant.f(x, u_plant), float).reshape(-1)
            out[z_sl] = fz + observer_correction(z, w, u_obs, plant, assm, fn)
            out[w_sl] = np.asarray(plant.jac_h(z), float).reshape(k_out, n) @ fz
            return out

        return rhs

    rows_t: list[float] = []
    rows_x: list[np.ndarray] = []
    rows_z: list[np.ndarray] = []
    rows_w: list[np.ndarray] = []
    rows_u: list[np.ndarray] = []
    rows_norm: list[float] = []
    reset_records: list[tuple[float, np.ndarray, np.ndarray]] = []

    lookback = plant.r + plant.delay_window + config.T_H + max(config.record_dt, 1.0)
    t_cur = 0.0
    for t_g, kinds in groups:
        if t_g > t_cur:
            uhist.advance(t_g)
            # span constants queried at the midpoint: the event set keeps
            # every switch of u(. - tau) and u(. - r - tau) out of the open span
            t_mid = t_cur + 0.5 * (t_g - t_cur)
            u_plant = uhist.value(t_mid - plant.tau)
            u_obs = uhist.value(t_mid - plant.delay_window)
            Y = integrate_span(make_rhs(u_plant, u_obs), t_cur, t_g, Y,
                               config.dt_max,
                               on_node=lambda t, y: xhist.append(t, y[x_sl]))
            t_cur = t_g
        if _SAMPLE in kinds:
            y_sample = np.asarray(plant.h(xhist.value(t_g - plant.r)), float).reshape(-1)
            Y[w_sl] = y_sample
            reset_records.append((t_g, y_sample.copy(), Y[w_sl].copy()))
        if _HOLD in kinds:
            z_now = Y[z_sl].copy()
            if plant.delay_window == 0.0:
                u_new = hold_control_delay_free(z_now, plant, assm)
            else:
                u_new = hold_control(z_now, uhist, config.N, plant, assm, t_hold=t_g)
            uhist.append(t_g, u_new)
        if kinds & {_SAMPLE, _HOLD, _RECORD}:
            rows_t.append(t_g)
            rows_x.append(Y[x_sl].copy())
            rows_z.append(Y[z_sl].copy())
            rows_w.append(Y[w_sl].copy())
            rows_u.append(uhist.latest_value().copy())
            rows_norm.append(
                xhist.sup_norm(t_g - plant.r, t_g)
                + float(np.linalg.norm(Y[z_sl]))
                + uhist.sup_abs(t_g - plant.delay_window, t_g))
        if _RECORD in kinds:
            xhist.prune_before(t_g - lookback)

    lyap_x = np.array([float(assm.lyapunov(x)) for x in rows_x])
    lyap_z = np.array([float(assm.lyapunov(z)) for z in rows_z])
    return Trajectory(
        t=np.asarray(rows_t), x=np.vstack(rows_x), z=np.vstack(rows_z),
        w=np.vstack(rows_w), u_applied=np.vstack(rows_u),
        lyap_x=lyap_x, lyap_z=lyap_z, norm=np.asarray(rows_norm),
        reset_records=reset_records,
        input_segments=[(s, v.copy()) for s, v in zip(uhist.starts, uhist.values)],
    )


def _interp_rows(times: np.ndarray, table: np.ndarray, t: float) -> np.ndarray:
    idx = int(np.searchsorted(times, t))
    if idx < times.size and times[idx] == t:
        return table[idx]
    if idx == 0 or idx >= times.size:
        raise CoverageError(f"time {t!r} outside the recorded range")
    theta = (t - times[idx - 1]) / (times[idx] - times[idx - 1])
    return table[idx - 1] + theta * (table[idx] - table[idx - 1])


def composite_norm(traj: Trajectory, t: float, r: float, tau: float) -> float:
    """Windowed closed-loop magnitude at ``t``: the largest recorded plant
    state over ``[t-r, t]``, plus the observer state at ``t``, plus the
    largest input applied on ``[t-r-tau, t)``."""
    times = traj.t
    if t - r < times[0] - _EVENT_ATOL or t > times[-1] + _EVENT_ATOL:
        raise CoverageError("window extends beyond the recorded rows")
    x_sup = max(float(np.linalg.norm(_interp_rows(times, traj.x, t - r))),
                float(np.linalg.norm(_interp_rows(times, traj.x, t))))
    lo = int(np.searchsorted(times, t - r, side="right"))
    hi = int(np.searchsorted(times, t, side="left"))
    for i in range(lo, hi):
        x_sup = max(x_sup, float(np.linalg.norm(traj.x[i])))
    z_val = float(np.linalg.norm(_interp_rows(times, traj.z, t)))
    u_sup = 0.0
    if r + tau > 0.0:
        starts = [s for s, _v in traj.input_segments]
        values = [v for _s, v in traj.input_segments]
        if not starts or starts[0] > t - r - tau + _EVENT_ATOL:
            raise CoverageError("input record does not cover the window")
        idx = max(0, int(np.searchsorted(starts, t - r - tau, side="right")) - 1)
        while idx < len(starts) and starts[idx] < t:
            u_sup = max(u_sup, float(np.linalg.norm(values[idx])))
            idx += 1
    return x_sup + z_val + u_sup


def initial_composite_norm(init: InitialData, plant: PlantModel) -> float:
    """Windowed magnitude of the initial data at time 0."""
    xhist = init.state_history(plant.r)
    uhist = init.input_history(plant.r, plant.tau, plant.input_box)
    x_sup = xhist.sup_norm(-plant.r, 0.0)
    u_sup = uhist.sup_abs(-plant.r - plant.tau, 0.0)
    return x_sup + float(np.linalg.norm(init.z0)) + u_sup


def fit_decay_rate(traj: Trajectory, t_start: float, t_end: float) -> tuple[float, float]:
    """Least-squares exponential rate of the recorded norm on a window.

    Returns ``(sigma_hat, r2)`` where ``sigma_hat`` is minus the slope of
    the log-norm fit.  Rows at the underflow floor are dropped; fewer than
    three usable rows raise ``InsufficientDataError``.
    """
    mask = (traj.t >= t_start) & (traj.t <= t_end) & (traj.norm > _NORM_FLOOR)
    t = traj.t[mask]
    if t.size < 3:
        raise InsufficientDataError(
            f"decay fit needs at least 3 rows with positive norm, found {t.size}"
        )
    logn = np.log(traj.norm[mask])
    slope, intercept = np.polyfit(t, logn, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((logn - fitted) ** 2))
    ss_tot = float(np.sum((logn - np.mean(logn)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-slope), r2


def run_summary(traj: Trajectory, plant: PlantModel, init: InitialData,
                config: SimConfig, fit_window: tuple[float, float] | None = None) -> dict:
    """JSON-ready digest of one closed-loop run."""
    if fit_window is None:
        fit_window = (0.5 * config.horizon, config.horizon)
    sigma_hat, r2 = fit_decay_rate(traj, fit_window[0], fit_window[1])
    return {
        "sigma_hat": sigma_hat,
        "r2": r2,
        "terminal_norm": composite_norm(traj, config.horizon, plant.r, plant.tau),
        "initial_norm": initial_composite_norm(init, plant),
        "max_Vx": float(np.max(traj.lyap_x)),
        "max_Vz": float(np.max(traj.lyap_z)),
        "partition_seed": config.seed,
        "config": {
            "T_H": config.T_H,
            "N": config.N,
            "horizon": config.horizon,
            "dt_max": config.dt_max,
            "seed": config.seed,
            "record_dt": config.record_dt,
        },
    }


@dataclass
class TuneResult:
    """Outcome of a grid search for workable loop parameters: the first
    triple meeting the decay bar, or a per-attempt failure record."""

    passed: bool
    triple: tuple[float, float, int] | None
    attempts: list[dict]


def pilot_tune(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
               init: InitialData, search_grid: Sequence[tuple[float, float, int]],
               base_config: SimConfig, min_frac: float = 0.5, seed: int = 0,
               decay_ratio: float = 1e-3,
               fit_window: tuple[float, float] | None = None) -> TuneResult:
    """Try ``(T_s, T_H, N)`` triples on a fixed-seed run until one meets the
    decay bar (positive fitted rate, terminal norm below ``decay_ratio``
    times the initial norm).

    Candidates are ordered cheapest first: fewest predictor steps, then
    largest sampling and hold periods.  Failure to find one is reported,
    not raised; an empty grid is a configuration error.
    """
    grid = sorted({(float(ts), float(th), int(n)) for ts, th, n in search_grid},
                  key=lambda g: (g[2], -g[0], -g[1]))
    if not grid:
        raise ConfigurationError("tuning grid must be nonempty")
    attempts = []
    for T_s, T_H, N in grid:
        config = replace(base_config, T_H=T_H, N=N, seed=seed)
        partition = generate_partition(T_s, config.horizon, seed, min_frac)
        traj = simulate_closed_loop(plant, assm, fn, partition, config, init)
        summary = run_summary(traj, plant, init, config, fit_window=fit_window)
        ratio = summary["terminal_norm"] / summary["initial_norm"]
        ok = summary["sigma_hat"] > 0.0 and ratio < decay_ratio
        attempts.append({"T_s": T_s, "T_H": T_H, "N": N,
                         "sigma_hat": summary["sigma_hat"],
                         "terminal_ratio": ratio, "passed": ok})
        if ok:
            return TuneResult(passed=True, triple=(T_s, T_H, N), attempts=attempts)
    return TuneResult(passed=False, triple=None, attempts=attempts)
