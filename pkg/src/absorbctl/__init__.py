"""Sampled-data stabilization of nonlinear delayed plants with a compact
absorbing set: inter-sample output prediction, corrected observer, Euler
state prediction across the delay window, and a held delay-free controller,
plus samplers that check the certificates the design rests on.
"""

from .controller import hold_control, hold_control_delay_free
from .errors import (ConfigurationError, CoverageError, DegenerateGradientError,
                     InsufficientDataError, InsufficientSampleError)
from .model import (AssumptionData, InputHistory, PlantModel, SamplingPartition,
                    SimConfig, StateHistory, Trajectory, clamp_input)
from .observer import (BlendingFn, blend_p, damping_term, isp_reset, isp_rhs,
                       observer_correction, observer_rhs)
from .planar import build_planar_example
from .predictor import euler_predict, predict_in_set
from .rk4 import flow_on_history, integrate_span, rk4_step
from .simulator import (InitialData, TuneResult, composite_norm, fit_decay_rate,
                        generate_partition, initial_composite_norm, pilot_tune,
                        run_summary, simulate_closed_loop)
from .verification import (CheckReport, SampleSpec, check_absorbing_dissipation,
                           check_corrected_contraction, check_corrected_dissipation,
                           check_growth_bound, check_local_controller,
                           check_observer_contraction, check_zeta_bound,
                           predictor_convergence_study, sublevel_box)

__version__ = "0.1.0"

__all__ = [
    "AssumptionData",
    "BlendingFn",
    "CheckReport",
    "ConfigurationError",
    "CoverageError",
    "DegenerateGradientError",
    "InitialData",
    "InputHistory",
    "InsufficientDataError",
    "InsufficientSampleError",
    "PlantModel",
    "SampleSpec",
    "SamplingPartition",
    "SimConfig",
    "StateHistory",
    "Trajectory",
    "TuneResult",
    "blend_p",
    "build_planar_example",
    "check_absorbing_dissipation",
    "check_corrected_contraction",
    "check_corrected_dissipation",
    "check_growth_bound",
    "check_local_controller",
    "check_observer_contraction",
    "check_zeta_bound",
    "clamp_input",
    "composite_norm",
    "damping_term",
    "euler_predict",
    "fit_decay_rate",
    "flow_on_history",
    "generate_partition",
    "hold_control",
    "hold_control_delay_free",
    "initial_composite_norm",
    "integrate_span",
    "isp_reset",
    "isp_rhs",
    "observer_correction",
    "observer_rhs",
    "pilot_tune",
    "predict_in_set",
    "predictor_convergence_study",
    "rk4_step",
    "run_summary",
    "simulate_closed_loop",
    "sublevel_box",
    "__version__",
]
