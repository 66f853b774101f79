"""Indirect and direct data-driven policy iteration for discrete-time LQR.

The library covers the full pipeline: plant simulation under episodic
excitation (:mod:`ddlqr.lti`), model-based policy iteration and Riccati
solvers (:mod:`ddlqr.riccati`), recursive least-squares identification with
worst-case error bookkeeping (:mod:`ddlqr.rls`), excitation analyzers
(:mod:`ddlqr.persistency`), the indirect and direct data-driven iterations
(:mod:`ddlqr.ipi`, :mod:`ddlqr.dpi`), closed-form convergence bounds
(:mod:`ddlqr.bounds`), and a config-driven experiment harness
(:mod:`ddlqr.harness`, CLI ``ddlqr``).
"""

from .bounds import (BoundInputs, disturbance_gain,
                     disturbance_gain_coefficients, equal_budget_episodes,
                     rate_bounds)
from .dpi import (DpiConfig, DpiEpisodeData, DpiTrace, build_episode_data,
                  dpi_evaluate, dpi_improve, dpi_run, min_episode_length)
from .exceptions import (ConfigError, ConvergenceError, DdlqrError,
                         EvaluationInfeasible, InsufficientTrace,
                         NotStabilizable, NotStabilizing, SingularOperator,
                         Underdetermined)
from .ipi import (IpiConfig, IpiTrace, check_estimate_stabilizable, check_kernel_dominance,
                  composed_error_bound, composed_error_bound_series,
                  restart_bound, restart_bound_series,
                  export_ipi_trace, ipi_run, trace_estimation_bound,
                  trace_estimation_bound_series, interconnection_bound,
                  interconnection_bound_series, verify_operator_form)
from .lti import (CostSpec, DitherPolicy, LinearSystem, Trajectory, rollout,
                  spectral_radius, step, system_from_theta)
from .persistency import (PersistencyReport, build_persistency_report,
                          choose_auxiliary_params, episode_sums,
                          is_globally_persistent, is_locally_persistent,
                          nonpersistent_counts, min_persistency_window, outer_stream)
from .riccati import (PiTrace, estimate_contraction, pi_run, policy_evaluate,
                      policy_improve, solve_dare, vectorized_pi_step)
from .rls import RlsEstimator, local_persistency_envelope, estimation_error_bound

__version__ = "0.1.0"

__all__ = [
    "BoundInputs", "ConfigError", "ConvergenceError", "CostSpec",
    "DdlqrError", "DitherPolicy", "DpiConfig", "DpiEpisodeData", "DpiTrace",
    "EvaluationInfeasible", "InsufficientTrace", "IpiConfig", "IpiTrace",
    "LinearSystem", "NotStabilizable", "NotStabilizing", "PersistencyReport",
    "PiTrace", "RlsEstimator", "SingularOperator", "Trajectory",
    "Underdetermined", "build_episode_data", "build_persistency_report",
    "check_estimate_stabilizable", "check_kernel_dominance", "choose_auxiliary_params",
    "composed_error_bound", "composed_error_bound_series",
    "restart_bound", "restart_bound_series",
    "dpi_evaluate",
    "dpi_improve", "dpi_run", "episode_sums", "equal_budget_episodes",
    "estimate_contraction", "export_ipi_trace", "ipi_run",
    "is_globally_persistent", "is_locally_persistent", "nonpersistent_counts",
    "local_persistency_envelope", "min_episode_length",
    "min_persistency_window", "outer_stream", "pi_run", "policy_evaluate",
    "policy_improve", "rate_bounds", "disturbance_gain_coefficients", "rollout",
    "disturbance_gain", "solve_dare", "spectral_radius", "step", "system_from_theta",
    "estimation_error_bound", "trace_estimation_bound", "trace_estimation_bound_series",
    "interconnection_bound", "interconnection_bound_series", "vectorized_pi_step",
    "verify_operator_form",
]
