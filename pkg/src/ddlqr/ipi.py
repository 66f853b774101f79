"""Indirect data-driven policy iteration: certainty-equivalent policy
evaluation on the running least-squares estimate, episodic estimator updates,
and policy improvement, together with the assumption monitors and the
worst-case error bounds for the resulting interconnection.

Episode structure: episode ``i`` covers timesteps ``(i-1) tau + 1 .. i tau``.
Within episode ``i`` the plant runs under ``u = K_i x + e`` where ``e`` is the
configured dither; the kernel ``P_i`` is evaluated on the estimate available
*before* the episode's data, and the improved gain uses the estimate *after*.

The run never aborts on monitor violations. A non-stabilizable estimate skips
the iteration step for that episode (excitation and identification continue);
an estimate whose certainty-equivalent closed loop is unstable triggers a
gain re-initialization from the estimate's own optimal gain. Every such event
is flagged in the trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundInputs, disturbance_gain
from .exceptions import ConvergenceError, NotStabilizing
from .lti import (CostSpec, DitherPolicy, LinearSystem, is_schur,
                  system_from_theta)
from .persistency import build_persistency_report, episode_sums
from .riccati import pi_run, policy_evaluate, policy_improve, solve_dare
from .rls import RlsEstimator, estimation_error_bound
from .tensor_ops import kron, unvec, vec

SUP_CLAMP = 1.0 - 1e-6

# trace flag bits
FLAG_UNSTABILIZABLE_ESTIMATE = 1  # iteration step skipped for the episode
FLAG_EVAL_FALLBACK = 2            # evaluation infeasible; gain re-initialized
FLAG_IMPROVE_FALLBACK = 4         # improved gain rejected by the estimate
FLAG_SUP_CLAMPED = 8              # a closed-loop spectral norm reached 1


@dataclass(frozen=True)
class IpiConfig:
    tau: int
    episodes: int
    K1: np.ndarray
    dither: DitherPolicy
    a: float = 1.0                      # H0 = a I
    theta0: np.ndarray | None = None    # zeros when omitted
    x0: np.ndarray | None = None        # all-ones when omitted
    seed: int = 0
    exact_dominance_check: bool = False  # exact PSD-order check (slower)

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("episode length tau must be >= 1")
        if self.episodes < 1:
            raise ValueError("need at least one episode")
        if self.a <= 0:
            raise ValueError("H0 scale a must be positive")
        object.__setattr__(self, "K1", np.atleast_2d(np.asarray(self.K1, dtype=float)))


@dataclass
class EstimateStabilizabilityCheck:
    stabilizable: bool
    margin_threshold: float | None = None
    within_margin: bool | None = None


@dataclass
class KernelDominanceCheck:
    holds: bool
    surrogate_holds: bool
    p_star_estimate: np.ndarray | None = None


def check_estimate_stabilizable(
        theta_hat: np.ndarray, n_x: int,
        sys_true: LinearSystem | None = None,
        K_st: np.ndarray | None = None) -> EstimateStabilizabilityCheck:
    """Stabilizability of an estimate, optionally with the sufficient
    perturbation margin derived from a gain stabilizing the true plant.

    The margin is ``(1 - ||A + B K_st||_2) / (1 + ||K_st||_2)``: whenever the
    estimation error's spectral norm is below it, ``K_st`` provably
    stabilizes the estimate as well (vacuous when the true closed loop is not
    a 2-norm contraction).
    """
    est = system_from_theta(theta_hat, n_x)
    result = EstimateStabilizabilityCheck(stabilizable=est.is_stabilizable())
    if sys_true is not None and K_st is not None:
        K_st = np.atleast_2d(np.asarray(K_st, dtype=float))
        L = sys_true.A + sys_true.B @ K_st
        threshold = max(0.0, (1.0 - np.linalg.norm(L, 2))
                        / (1.0 + np.linalg.norm(K_st, 2)))
        err = float(np.linalg.norm(theta_hat - sys_true.theta(), 2))
        result.margin_threshold = float(threshold)
        result.within_margin = bool(err <= threshold)
    return result


def check_kernel_dominance(theta_hat: np.ndarray, P_hat: np.ndarray,
                           cost: CostSpec,
                           n_x: int | None = None) -> KernelDominanceCheck:
    """Does the evaluated kernel dominate the estimate's own optimal kernel?

    Also reports the cheap surrogate actually needed in practice: the greedy
    gain of ``P_hat`` on the estimate stabilizes the estimate.
    """
    if n_x is None:
        n_x = np.atleast_2d(P_hat).shape[0]
    est = system_from_theta(theta_hat, n_x)
    est.require_stabilizable()
    P_star_est, _ = solve_dare(est, cost)
    gap = np.linalg.eigvalsh(0.5 * (P_hat + P_hat.T) - P_star_est).min()
    K = policy_improve(est, P_hat, cost.R)
    surrogate = is_schur(est.A + est.B @ K)
    return KernelDominanceCheck(holds=bool(gap >= -1e-9),
                                surrogate_holds=bool(surrogate),
                                p_star_estimate=P_star_est)


@dataclass
class IpiTrace:
    """Per-episode record of one indirect run plus the raw data stream."""

    tau: int
    seed: int
    sys_true: LinearSystem
    cost: CostSpec
    P_star: np.ndarray
    K_star: np.ndarray
    c_hat: float
    a: float
    theta0: np.ndarray
    delta_theta0_norm: float

    P_hats: list = field(default_factory=list)
    K_execs: list = field(default_factory=list)       # gain driving episode i
    K_posts: list = field(default_factory=list)       # gain after episode i
    theta_hats: list = field(default_factory=list)    # estimate after episode i
    err_P: list = field(default_factory=list)         # ||P_i - P*||_F
    err_K_exec: list = field(default_factory=list)
    err_K_post: list = field(default_factory=list)
    err_theta: list = field(default_factory=list)
    delta_theta_upper: list = field(default_factory=list)
    margin_threshold: list = field(default_factory=list)
    within_margin: list = field(default_factory=list)
    dominance_checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    regressors: np.ndarray | None = None    # (episodes*tau, n_x+n_u)
    next_states: np.ndarray | None = None
    cl_sup_raw: float = 0.0                  # sup ||A + B K_i||_2
    cl_sup_est_raw: float = 0.0              # sup ||A_i + B_i K_{i+1}||_2
    cl_sup_clamped: bool = False

    @property
    def episodes(self) -> int:
        return len(self.P_hats)

    def t_end(self, i: int) -> int:
        return i * self.tau

    @property
    def cl_sup(self) -> float:
        return min(self.cl_sup_raw, SUP_CLAMP)

    @property
    def cl_sup_est(self) -> float:
        return min(self.cl_sup_est_raw, SUP_CLAMP)

    def episode_gramians(self) -> np.ndarray:
        """Stream of per-episode regressor Gramians D_i."""
        return episode_sums(self.regressors, self.tau)

    def bound_inputs(self) -> BoundInputs:
        """Norm data for the closed-form bounds, conditioned on this trace."""
        return BoundInputs(
            norm_a=float(np.linalg.norm(self.sys_true.A, "fro")),
            norm_b=float(np.linalg.norm(self.sys_true.B, "fro")),
            norm_q=float(np.linalg.norm(self.cost.Q, "fro")),
            norm_r=float(np.linalg.norm(self.cost.R, "fro")),
            norm_r_inv=float(np.linalg.norm(np.linalg.inv(self.cost.R), "fro")),
            norm_p0=float(np.linalg.norm(self.P_hats[0], "fro")),
            cl_sup=self.cl_sup, cl_sup_est=self.cl_sup_est,
            n_x=self.sys_true.n_x, a=self.a,
            delta_theta0_norm=self.delta_theta0_norm,
            c_hat=self.c_hat)


def _stabilizable(theta: np.ndarray, n_x: int) -> bool:
    return system_from_theta(theta, n_x).is_stabilizable()


def ipi_run(sys_true: LinearSystem, cost: CostSpec, config: IpiConfig) -> IpiTrace:
    """Execute the indirect iteration and record every diagnostic the bound
    auditors need. ``K1`` must stabilize the true plant."""
    n_x, n_u = sys_true.n_x, sys_true.n_u
    dim = n_x + n_u
    K = config.K1
    if K.shape != (n_u, n_x):
        raise ValueError(f"K1 shape {K.shape} does not match system")
    if not is_schur(sys_true.A + sys_true.B @ K):
        raise NotStabilizing("K1 does not stabilize the true system")

    P_star, K_star = solve_dare(sys_true, cost)
    c_hat = pi_run(sys_true, cost, K).c_hat
    if c_hat is None:
        c_hat = 0.5   # K1 already optimal; any contraction factor is valid

    theta_true = sys_true.theta()
    est = RlsEstimator(n_x, n_u, theta0=config.theta0, a=config.a)
    if not _stabilizable(est.theta, n_x):
        raise NotStabilizing("initial estimate is not stabilizable")
    if not is_schur(est.A_hat + est.B_hat @ K):
        raise NotStabilizing("K1 does not stabilize the initial estimate")

    trace = IpiTrace(tau=config.tau, seed=config.seed, sys_true=sys_true,
                     cost=cost, P_star=P_star, K_star=K_star, c_hat=c_hat,
                     a=config.a, theta0=est.theta0.copy(),
                     delta_theta0_norm=float(np.linalg.norm(est.theta0 - theta_true, "fro")))

    rng = np.random.default_rng(config.seed)
    sampler = config.dither.sampler(n_u, rng)
    x = (np.ones(n_x) if config.x0 is None
         else np.asarray(config.x0, dtype=float).ravel())

    T = config.episodes * config.tau
    trace.regressors = np.empty((T, dim))
    trace.next_states = np.empty((T, n_x))

    P_hat = None
    t = 0
    for i in range(1, config.episodes + 1):
        flags = 0

        # --- policy evaluation on the pre-episode estimate ---
        theta_pre = est.theta
        if _stabilizable(theta_pre, n_x):
            est_sys = system_from_theta(theta_pre, n_x)
            if not is_schur(est_sys.A + est_sys.B @ K):
                flags |= FLAG_EVAL_FALLBACK
                try:
                    _, K = solve_dare(est_sys, cost)
                except ConvergenceError:
                    flags |= FLAG_UNSTABILIZABLE_ESTIMATE
            if not flags & FLAG_UNSTABILIZABLE_ESTIMATE:
                P_hat = policy_evaluate(est_sys, K, cost)
        else:
            flags |= FLAG_UNSTABILIZABLE_ESTIMATE
        if P_hat is None:                      # no evaluation possible yet
            P_hat = np.zeros((n_x, n_x))

        # --- excite, collect, identify (per-sample rank-one updates; the
        # batch episodic form is the replay route of verify_operator_form) ---
        trace.cl_sup_raw = max(trace.cl_sup_raw, float(
            np.linalg.norm(sys_true.A + sys_true.B @ K, 2)))
        for _ in range(config.tau):
            eta = sampler.draw()
            u = K @ x + eta
            x_next = sys_true.A @ x + sys_true.B @ u
            trace.regressors[t, :n_x] = x
            trace.regressors[t, n_x:] = u
            trace.next_states[t] = x_next
            est.update(trace.regressors[t], x_next)
            x = x_next
            t += 1

        # --- policy improvement on the post-episode estimate ---
        K_post = K
        stab = check_estimate_stabilizable(est.theta, n_x, sys_true=sys_true,
                                           K_st=K_star)
        if stab.stabilizable:
            est_sys_new = system_from_theta(est.theta, n_x)
            K_cand = policy_improve(est_sys_new, P_hat, cost.R)
            if is_schur(est_sys_new.A + est_sys_new.B @ K_cand):
                K_post = K_cand
            else:
                flags |= FLAG_IMPROVE_FALLBACK
                try:
                    _, K_post = solve_dare(est_sys_new, cost)
                except ConvergenceError:
                    flags |= FLAG_UNSTABILIZABLE_ESTIMATE
            trace.cl_sup_est_raw = max(trace.cl_sup_est_raw, float(np.linalg.norm(
                est_sys_new.A + est_sys_new.B @ K_post, 2)))
            if config.exact_dominance_check:
                dom = check_kernel_dominance(est.theta, P_hat, cost, n_x)
                trace.dominance_checks.append(dom.holds)
            else:
                trace.dominance_checks.append(None)
        else:
            flags |= FLAG_UNSTABILIZABLE_ESTIMATE
            trace.dominance_checks.append(None)

        if trace.cl_sup_raw >= 1.0 or trace.cl_sup_est_raw >= 1.0:
            flags |= FLAG_SUP_CLAMPED
            trace.cl_sup_clamped = True

        # --- record ---
        trace.P_hats.append(P_hat)
        trace.K_execs.append(K)
        trace.K_posts.append(K_post)
        trace.theta_hats.append(est.theta.copy())
        trace.err_P.append(float(np.linalg.norm(P_hat - P_star, "fro")))
        trace.err_K_exec.append(float(np.linalg.norm(K - K_star, "fro")))
        trace.err_K_post.append(float(np.linalg.norm(K_post - K_star, "fro")))
        trace.err_theta.append(est.error_norm(theta_true))
        trace.delta_theta_upper.append(est.error_upper_bound(theta_true))
        trace.margin_threshold.append(stab.margin_threshold)
        trace.within_margin.append(stab.within_margin)
        trace.flags.append(flags)

        K = K_post
    return trace


# ---------------------------------------------------------------------------
# closed-form bounds evaluated on a recorded trace
# ---------------------------------------------------------------------------

def omega_sup(trace: IpiTrace, inputs: BoundInputs | None = None) -> float:
    """Sup over the recorded run of the per-episode disturbance: the gain
    polynomial evaluated at the error bound, times the error bound."""
    if inputs is None:
        inputs = trace.bound_inputs()
    dtu = np.asarray(trace.delta_theta_upper)
    return float(np.max(disturbance_gain(inputs, dtu) * dtu))


def interconnection_bound_series(trace: IpiTrace,
                                 inputs: BoundInputs | None = None) -> np.ndarray:
    """Worst-case ``||P_i - P*||_F`` at every recorded episode: geometric
    decay of the initial kernel error plus the disturbance sup amplified by
    ``1/(1-c)``."""
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    offset = omega_sup(trace, inputs) / (1.0 - c)
    decay = c ** np.arange(trace.episodes) * trace.err_P[0]
    return decay + offset


def interconnection_bound(trace: IpiTrace, i: int,
                          inputs: BoundInputs | None = None) -> float:
    """Single-episode version of :func:`interconnection_bound_series`."""
    if not 1 <= i <= trace.episodes:
        raise ValueError(f"episode index {i} outside recorded range")
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    return (c ** (i - 1) * trace.err_P[0]
            + omega_sup(trace, inputs) / (1.0 - c))


def restart_bound(trace: IpiTrace, i_re: int, i: int,
                  inputs: BoundInputs | None = None) -> float:
    """Bound re-anchored at episode ``i_re > 1``; tightens as the estimation
    error bound shrinks."""
    if not (1 < i_re <= i <= trace.episodes):
        raise ValueError("need 1 < i_re <= i <= recorded episodes")
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    dtu_re = trace.delta_theta_upper[i_re - 1]
    return (c ** (i - i_re) * trace.err_P[i_re - 1]
            + disturbance_gain(inputs, dtu_re) * dtu_re / (1.0 - c))


def restart_bound_series(trace: IpiTrace, i_re: int,
                         inputs: BoundInputs | None = None) -> np.ndarray:
    """Restart bound for every episode ``i >= i_re``."""
    if not 1 < i_re <= trace.episodes:
        raise ValueError("need 1 < i_re <= recorded episodes")
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    dtu_re = trace.delta_theta_upper[i_re - 1]
    offset = disturbance_gain(inputs, dtu_re) * dtu_re / (1.0 - c)
    decay = c ** np.arange(trace.episodes - i_re + 1) * trace.err_P[i_re - 1]
    return decay + offset


def composed_error_bound_series(trace: IpiTrace, report=None,
                                inputs: BoundInputs | None = None) -> np.ndarray:
    """Fully data-free bound at every recorded episode, combining the kernel
    decay with the excitation-aware estimation bound of the episode-Gramian
    stream."""
    if report is None:
        report = build_persistency_report(trace.episode_gramians())
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    dim = trace.sys_true.n_x + trace.sys_true.n_u
    dtu0 = math.sqrt(dim) * trace.delta_theta0_norm
    gain = disturbance_gain(inputs, dtu0) / (1.0 - c)
    fg = trace_estimation_bound_series(trace, report)
    decay = c ** np.arange(trace.episodes) * trace.err_P[0]
    return decay + gain * fg


def composed_error_bound(trace: IpiTrace, i: int,
                         report=None, inputs: BoundInputs | None = None) -> float:
    """Single-episode version of :func:`composed_error_bound_series`."""
    if not 1 <= i <= trace.episodes:
        raise ValueError(f"episode index {i} outside recorded range")
    if report is None:
        report = build_persistency_report(trace.episode_gramians())
    if inputs is None:
        inputs = trace.bound_inputs()
    c = inputs.c_hat
    dim = trace.sys_true.n_x + trace.sys_true.n_u
    dtu0 = math.sqrt(dim) * trace.delta_theta0_norm
    fg = estimation_error_bound(trace.delta_theta0_norm, trace.a, dim,
                                report.n_max, report.alpha_min,
                                report.max_nonpersistent, i)
    return (c ** (i - 1) * trace.err_P[0]
            + disturbance_gain(inputs, dtu0) / (1.0 - c) * fg)


def trace_estimation_bound_series(trace: IpiTrace, report=None) -> np.ndarray:
    """Estimation-error bound at every recorded episode from the run's own
    episode Gramians."""
    if report is None:
        report = build_persistency_report(trace.episode_gramians())
    dim = trace.sys_true.n_x + trace.sys_true.n_u
    idx = np.arange(1, trace.episodes + 1)
    f = (trace.a * dim * trace.delta_theta0_norm
         / (trace.a + np.floor(idx / report.n_max) * report.alpha_min))
    g = trace.delta_theta0_norm * report.max_nonpersistent
    return f + g


def trace_estimation_bound(trace: IpiTrace, i: int, report=None) -> float:
    """Estimation-error bound at episode ``i`` from the run's own episode
    Gramians."""
    if report is None:
        report = build_persistency_report(trace.episode_gramians())
    dim = trace.sys_true.n_x + trace.sys_true.n_u
    return estimation_error_bound(trace.delta_theta0_norm, trace.a, dim,
                                  report.n_max, report.alpha_min,
                                  report.max_nonpersistent, i)


def verify_operator_form(trace: IpiTrace):
    """Replay the recorded data through the batch-Gramian estimator update
    and the single-solve Kronecker form of the iteration step, and compare
    against the per-step trace.

    Only monitor-clean episodes are comparable (fallbacks change the gain
    outside the closed-form recursion), so the replay stops at the first
    episode flagged with a fallback or a skipped step; the spectral-norm
    clamp flag does not alter the recursion and is ignored. Returns
    ``(max_theta_diff, max_P_diff, episodes_checked)``.
    """
    sys_t, cost = trace.sys_true, trace.cost
    n_x = sys_t.n_x
    dim = n_x + sys_t.n_u
    tau = trace.tau
    D = trace.regressors
    Xn = trace.next_states

    theta = trace.theta0.copy()
    H = trace.a * np.eye(dim)
    P = None
    K = None
    max_dt = 0.0
    max_dp = 0.0
    checked = 0
    recursion_flags = (FLAG_UNSTABILIZABLE_ESTIMATE | FLAG_EVAL_FALLBACK
                       | FLAG_IMPROVE_FALLBACK)
    for i in range(1, trace.episodes + 1):
        if trace.flags[i - 1] & recursion_flags:
            break
        est_sys = system_from_theta(theta, n_x)
        if P is None:
            P = policy_evaluate(est_sys, trace.K_execs[0], cost)
        else:
            # folded improvement + evaluation in one lifted solve
            BtP = est_sys.B.T @ P
            beta = cost.R + BtP @ est_sys.B
            K = -np.linalg.solve(beta, BtP @ est_sys.A)
            A_cl = est_sys.A + est_sys.B @ K
            op = np.eye(n_x * n_x) - kron(A_cl.T, A_cl.T)
            P = unvec(np.linalg.solve(op, vec(cost.Q + K.T @ cost.R @ K)), n_x)
            P = 0.5 * (P + P.T)
        sl = slice((i - 1) * tau, i * tau)
        H_prev = H
        H = H_prev + D[sl].T @ D[sl]
        theta = np.linalg.solve(H, (theta @ H_prev + Xn[sl].T @ D[sl]).T).T

        max_dt = max(max_dt, float(np.linalg.norm(theta - trace.theta_hats[i - 1], "fro")))
        max_dp = max(max_dp, float(np.linalg.norm(P - trace.P_hats[i - 1], "fro")))
        checked += 1
    return max_dt, max_dp, checked


def export_ipi_trace(trace: IpiTrace, path, include_bounds: bool = True) -> None:
    """CSV with one row per episode:
    episode, timestep, err_P, err_K, delta_theta_upper, interconnection_bound,
    composed_bound, flags."""
    if include_bounds:
        inputs = trace.bound_inputs()
        report = build_persistency_report(trace.episode_gramians())
        bi_all = interconnection_bound_series(trace, inputs)
        bc_all = composed_error_bound_series(trace, report, inputs)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "timestep", "err_P", "err_K",
                         "delta_theta_upper", "interconnection_bound",
                         "composed_bound", "flags"])
        for i in range(1, trace.episodes + 1):
            bi = bi_all[i - 1] if include_bounds else math.nan
            bc = bc_all[i - 1] if include_bounds else math.nan
            writer.writerow([
                i, trace.t_end(i),
                format(trace.err_P[i - 1], ".17g"),
                format(trace.err_K_post[i - 1], ".17g"),
                format(trace.delta_theta_upper[i - 1], ".17g"),
                format(bi, ".17g"), format(bc, ".17g"),
                trace.flags[i - 1]])
