"""Sampled certificate checks with reproducible reports, plus the predictor
convergence study.

Every check draws a seeded low-discrepancy sample over axis-aligned boxes
bounding the relevant sublevel sets, rejects points that fail the side
conditions of the inequality being tested, and reports the worst margin
found.  Margins are written so that negative means the inequality holds
with room to spare; a check passes when the worst margin does not exceed
the tolerance.  Identical seeds give identical reports.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, InsufficientSampleError
from .model import AssumptionData, InputHistory, PlantModel, clamp_input
from .observer import BlendingFn, observer_correction
from .predictor import euler_predict
from .rk4 import flow_on_history

__all__ = [
    "SampleSpec",
    "CheckReport",
    "sublevel_box",
    "check_zeta_bound",
    "absorbing_dissipation_margin",
    "local_controller_margin",
    "observer_contraction_margin",
    "growth_bound_margin",
    "corrected_contraction_margin",
    "corrected_dissipation_margin",
    "check_absorbing_dissipation",
    "check_local_controller",
    "check_observer_contraction",
    "check_growth_bound",
    "check_corrected_contraction",
    "check_corrected_dissipation",
    "predictor_convergence_study",
]

_BATCH = 4096


@dataclass(frozen=True)
class SampleSpec:
    """How a sampled check draws its points.

    ``n_points`` admissible points are evaluated (drawing stops early only
    when ``max_draw_factor * n_points`` candidates have been rejected).
    ``upper_level`` caps the Lyapunov level used to bound regions that are
    unbounded above.  ``min_points`` > 0 turns an all-skipped run into an
    error instead of a vacuous pass.
    """

    n_points: int = 10_000
    seed: int = 0
    upper_level: float = 100.0
    min_points: int = 0
    max_draw_factor: int = 50


@dataclass
class CheckReport:
    """Outcome of one sampled check; ``passed`` iff the worst margin (if
    any point was admissible) does not exceed the tolerance."""

    name: str
    points_tested: int
    skipped: int
    worst_margin: float | None
    worst_point: tuple | None
    passed: bool
    tolerance: float
    seed: int

    def to_dict(self) -> dict:
        worst_point = None
        if self.worst_point is not None:
            worst_point = [np.asarray(p, float).tolist() for p in self.worst_point]
        return {
            "name": self.name,
            "points_tested": self.points_tested,
            "skipped": self.skipped,
            "worst_margin": self.worst_margin,
            "worst_point": worst_point,
            "pass": self.passed,
            "tolerance": self.tolerance,
            "seed": self.seed,
        }


def check_zeta_bound(zeta: float) -> bool:
    """Gate on the planar example's gain parameter."""
    if zeta <= 0.0:
        raise ConfigurationError("zeta must be positive")
    return 25001.0 * zeta ** 2 + 2.0 * zeta <= 4.0


def sublevel_box(level_fn: Callable[[np.ndarray], float], level: float, dim: int,
                 max_radius: float = 1e9) -> np.ndarray:
    """Axis-aligned box bounding a sublevel set's extent along each axis.

    Found by doubling out from the origin and bisecting the crossing on
    every half-axis.  For level functions whose sublevel sets bulge between
    the axes the box may under-cover; for radially monotone ones it is
    tight.
    """
    if float(level_fn(np.zeros(dim))) > level:
        raise ConfigurationError("origin must belong to the sublevel set")
    box = np.empty((dim, 2))
    for i in range(dim):
        for sign, col in ((-1.0, 0), (1.0, 1)):
            axis = np.zeros(dim)
            axis[i] = sign
            hi = 1.0
            while float(level_fn(hi * axis)) <= level:
                hi *= 2.0
                if hi > max_radius:
                    raise ConfigurationError(
                        "sublevel set appears unbounded along a coordinate axis"
                    )
            lo = 0.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if float(level_fn(mid * axis)) <= level:
                    lo = mid
                else:
                    hi = mid
            box[i, col] = sign * lo
    return box


def _output_box(plant: PlantModel, state_box: np.ndarray, pad: float = 1.0,
                grid: int = 5) -> np.ndarray:
    """Box for sampled outputs: twice the output amplitude over a lattice
    spanning the state box, plus padding."""
    axes = [np.linspace(lo, hi, grid) for lo, hi in state_box]
    amp = np.zeros(plant.k_out)
    for pt in itertools.product(*axes):
        amp = np.maximum(amp, np.abs(np.asarray(plant.h(np.array(pt)), float).reshape(-1)))
    half = 2.0 * amp + pad
    return np.column_stack([-half, half])


# --- margins: negative means the certified inequality holds at the point ---

def absorbing_dissipation_margin(plant: PlantModel, assm: AssumptionData, x, u) -> float:
    """Drift of the Lyapunov function plus the required dissipation."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    grad = np.asarray(assm.grad_lyapunov(x), float).reshape(-1)
    return float(grad @ np.asarray(plant.f(x, u), float).reshape(-1)) + float(assm.dissipation(x))


def local_controller_margin(plant: PlantModel, assm: AssumptionData, x) -> float:
    """Worse of the local decay margin (under the clamped local controller)
    and the coercivity margin of the local Lyapunov function."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = clamp_input(assm.local_controller(x), plant.input_box)
    xsq = float(x @ x)
    decay = (float(np.asarray(assm.grad_local_lyapunov(x), float).reshape(-1)
                   @ np.asarray(plant.f(x, u), float).reshape(-1))
             + 2.0 * assm.local_decay * xsq)
    coercive = assm.coercivity * xsq - float(assm.local_lyapunov(x))
    return max(decay, coercive)


def observer_contraction_margin(plant: PlantModel, assm: AssumptionData, z, x, u) -> float:
    """Metric contraction of the plain output-injection error dynamics."""
    z = np.asarray(z, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    d = z - x
    hz = np.asarray(plant.h(z), float).reshape(-1)
    hx = np.asarray(plant.h(x), float).reshape(-1)
    drift_gap = (np.asarray(plant.f(z, u), float).reshape(-1)
                 + assm.observer_gain @ (hz - hx)
                 - np.asarray(plant.f(x, u), float).reshape(-1))
    return float(d @ (assm.error_metric @ drift_gap)) + assm.contraction_rate * float(d @ d)


def growth_bound_margin(plant: PlantModel, assm: AssumptionData, z, x, u) -> float:
    """Conditional growth bound for the blending band; only meaningful where
    the Lyapunov gradient at z opposes the metric error direction."""
    z = np.asarray(z, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    grad = np.asarray(assm.grad_lyapunov(z), float).reshape(-1)
    innov = assm.observer_gain @ (np.asarray(plant.h(z), float).reshape(-1)
                                  - np.asarray(plant.h(x), float).reshape(-1))
    fz = np.asarray(plant.f(z, u), float).reshape(-1)
    fx = np.asarray(plant.f(x, u), float).reshape(-1)
    lhs = float(grad @ (fz + innov))
    d = z - x
    numer = float(d @ (assm.error_metric @ (fz + innov - fx)))
    denom = float(grad @ (assm.error_metric @ d))
    ratio_term = (1.0 - assm.contraction_frac) * float(grad @ grad) * numer / denom
    return lhs + float(assm.dissipation(z)) - ratio_term


def corrected_contraction_margin(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
                                 z, x, u, c_value: float | None = None) -> float:
    """Metric contraction of the corrected observer against the true state,
    with the sampled output taken from the true state."""
    z = np.asarray(z, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if c_value is None:
        c_value = assm.contraction_frac
    y = np.asarray(plant.h(x), float).reshape(-1)
    corr = observer_correction(z, y, u, plant, assm, fn)
    d = z - x
    drift_gap = (np.asarray(plant.f(z, u), float).reshape(-1) + corr
                 - np.asarray(plant.f(x, u), float).reshape(-1))
    return (float(d @ (assm.error_metric @ drift_gap))
            + c_value * assm.contraction_rate * float(d @ d))


def corrected_dissipation_margin(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
                                 z, w, u, zero_damping: bool = False) -> float:
    """Lyapunov drift of the corrected observer given an arbitrary measured
    output; ``zero_damping`` ablates the damping term."""
    z = np.asarray(z, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if zero_damping:
        corr = assm.observer_gain @ (np.asarray(plant.h(z), float).reshape(-1) - w)
    else:
        corr = observer_correction(z, w, u, plant, assm, fn)
    grad = np.asarray(assm.grad_lyapunov(z), float).reshape(-1)
    return (float(grad @ (np.asarray(plant.f(z, u), float).reshape(-1) + corr))
            + float(assm.dissipation(z)))


# --- sampled check driver ---

def _run_sampled_check(name: str, boxes: Sequence[np.ndarray], accept, margin_fn,
                       sample: SampleSpec, tol: float) -> CheckReport:
    if sample.n_points < 1:
        raise ConfigurationError("sampler must request at least one point")
    dims = [box.shape[0] for box in boxes]
    lo = np.concatenate([box[:, 0] for box in boxes])
    hi = np.concatenate([box[:, 1] for box in boxes])
    halton = qmc.Halton(d=int(sum(dims)), seed=sample.seed)
    splits = np.cumsum(dims)[:-1]

    tested = 0
    skipped = 0
    worst: float | None = None
    worst_pt: tuple | None = None
    max_draws = max(sample.max_draw_factor * sample.n_points, 100_000)
    draws = 0
    while tested < sample.n_points and draws < max_draws:
        batch = halton.random(min(_BATCH, max_draws - draws))
        draws += batch.shape[0]
        scaled = lo + batch * (hi - lo)
        for row in scaled:
            parts = tuple(np.array(p) for p in np.split(row, splits))
            if not accept(*parts):
                skipped += 1
                continue
            value = float(margin_fn(*parts))
            if worst is None or value > worst:
                worst, worst_pt = value, parts
            tested += 1
            if tested >= sample.n_points:
                break
    if tested < sample.min_points:
        raise InsufficientSampleError(
            f"{name}: only {tested} admissible points found "
            f"({skipped} skipped), needed {sample.min_points}"
        )
    passed = worst is None or worst <= tol
    return CheckReport(name=name, points_tested=tested, skipped=skipped,
                       worst_margin=worst, worst_point=worst_pt, passed=passed,
                       tolerance=tol, seed=sample.seed)


def check_absorbing_dissipation(plant: PlantModel, assm: AssumptionData,
                                sample: SampleSpec = SampleSpec(),
                                tol: float = 1e-9) -> CheckReport:
    """Dissipation outside the absorbing set, sampled up to the sampler's
    upper Lyapunov level and over the whole input box."""
    x_box = sublevel_box(assm.lyapunov, sample.upper_level, plant.n)
    return _run_sampled_check(
        "absorbing_dissipation",
        [x_box, plant.input_box],
        lambda x, u: float(assm.lyapunov(x)) >= assm.absorbing_level,
        lambda x, u: absorbing_dissipation_margin(plant, assm, x, u),
        sample, tol)


def check_local_controller(plant: PlantModel, assm: AssumptionData,
                           sample: SampleSpec = SampleSpec(),
                           tol: float = 1e-9) -> CheckReport:
    """Local decay and coercivity inside the absorbing set."""
    x_box = sublevel_box(assm.lyapunov, assm.absorbing_level, plant.n)
    return _run_sampled_check(
        "local_controller",
        [x_box],
        lambda x: float(assm.lyapunov(x)) <= assm.absorbing_level,
        lambda x: local_controller_margin(plant, assm, x),
        sample, tol)


def check_observer_contraction(plant: PlantModel, assm: AssumptionData,
                               sample: SampleSpec = SampleSpec(),
                               tol: float = 1e-9) -> CheckReport:
    """Output-injection contraction over observer set x plant set x inputs."""
    z_box = sublevel_box(assm.lyapunov, assm.blend_hi, plant.n)
    x_box = sublevel_box(assm.lyapunov, assm.absorbing_level, plant.n)
    return _run_sampled_check(
        "observer_contraction",
        [z_box, x_box, plant.input_box],
        lambda z, x, u: (float(assm.lyapunov(z)) <= assm.blend_hi
                         and float(assm.lyapunov(x)) <= assm.absorbing_level),
        lambda z, x, u: observer_contraction_margin(plant, assm, z, x, u),
        sample, tol)


def check_growth_bound(plant: PlantModel, assm: AssumptionData,
                       sample: SampleSpec = SampleSpec(),
                       tol: float = 1e-9) -> CheckReport:
    """Conditional growth bound on the blending band.

    Points failing any side condition are skipped and counted.  If no
    admissible point exists the bound holds vacuously and the report
    passes with zero points tested (set ``min_points`` to demand more).
    """
    z_box = sublevel_box(assm.lyapunov, assm.blend_hi, plant.n)
    x_box = sublevel_box(assm.lyapunov, assm.absorbing_level, plant.n)

    def accept(z, x, u):
        level = float(assm.lyapunov(z))
        if not (assm.blend_lo < level <= assm.blend_hi):
            return False
        if float(assm.lyapunov(x)) > assm.absorbing_level:
            return False
        grad = np.asarray(assm.grad_lyapunov(z), float).reshape(-1)
        return float(grad @ (assm.error_metric @ (z - x))) < 0.0

    return _run_sampled_check(
        "observer_growth_bound",
        [z_box, x_box, plant.input_box],
        accept,
        lambda z, x, u: growth_bound_margin(plant, assm, z, x, u),
        sample, tol)


def check_corrected_contraction(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
                                sample: SampleSpec = SampleSpec(),
                                tol: float = 1e-9) -> CheckReport:
    """Corrected-gain contraction over observer set x plant set x inputs."""
    z_box = sublevel_box(assm.lyapunov, assm.blend_hi, plant.n)
    x_box = sublevel_box(assm.lyapunov, assm.absorbing_level, plant.n)
    return _run_sampled_check(
        "corrected_contraction",
        [z_box, x_box, plant.input_box],
        lambda z, x, u: (float(assm.lyapunov(z)) <= assm.blend_hi
                         and float(assm.lyapunov(x)) <= assm.absorbing_level),
        lambda z, x, u: corrected_contraction_margin(plant, assm, fn, z, x, u),
        sample, tol)


def check_corrected_dissipation(plant: PlantModel, assm: AssumptionData, fn: BlendingFn,
                                sample: SampleSpec = SampleSpec(),
                                tol: float = 1e-9,
                                zero_damping: bool = False) -> CheckReport:
    """Corrected-observer dissipation above the upper blending level, with
    the measured output free to roam an inflated output box."""
    z_box = sublevel_box(assm.lyapunov, sample.upper_level, plant.n)
    w_box = _output_box(plant, z_box)
    name = "corrected_dissipation_no_damping" if zero_damping else "corrected_dissipation"
    return _run_sampled_check(
        name,
        [z_box, w_box, plant.input_box],
        lambda z, w, u: assm.blend_hi <= float(assm.lyapunov(z)) <= sample.upper_level,
        lambda z, w, u: corrected_dissipation_margin(plant, assm, fn, z, w, u,
                                                     zero_damping=zero_damping),
        sample, tol)


def predictor_convergence_study(plant: PlantModel, x0, hist: InputHistory,
                                N_list: Sequence[int], ref_substep: float = 1e-4,
                                t_pred: float | None = None) -> list[tuple[int, float]]:
    """Predictor error against a reference flow for each step count.

    The reference integrates the plant over the delay window with
    fourth-order steps no longer than ``ref_substep``, split exactly at the
    input record's segment boundaries.
    """
    if ref_substep <= 0.0:
        raise ConfigurationError("ref_substep must be positive")
    if t_pred is None:
        t_pred = hist.t_now
    window = plant.delay_window
    reference = flow_on_history(plant, x0, hist, t_pred - window, t_pred, ref_substep)
    out = []
    for N in N_list:
        predicted = euler_predict(x0, hist, int(N), plant, t_pred=t_pred)
        out.append((int(N), float(np.linalg.norm(reference - predicted))))
    return out
