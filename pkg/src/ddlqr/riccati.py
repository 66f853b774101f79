"""Model-based policy evaluation and improvement, the fixed-point (DARE)
solution, and the Kronecker-lifted single-solve form of one full policy
iteration step.

Two independent routes to the optimal kernel are kept on purpose:
:func:`solve_dare` iterates the Riccati value recursion, while
:func:`pi_run` alternates evaluation and improvement. Agreement between the
two is a library-level invariant exercised by the test suite, so neither
should be rewritten in terms of the other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (ConvergenceError, InsufficientTrace, NotStabilizing,
                         SingularOperator)
from .lti import CostSpec, LinearSystem, is_schur, spectral_radius
from .tensor_ops import kron, unvec, vec


def policy_evaluate(sys: LinearSystem, K: np.ndarray, cost: CostSpec) -> np.ndarray:
    """Quadratic kernel of the cost of the stabilizing policy ``u = K x``.

    Solves ``P = Q + K'RK + (A+BK)' P (A+BK)`` by vectorizing to the dense
    linear system ``(I - Acl' (x) Acl') vec(P) = vec(Q + K'RK)``, which is
    cheap at the state dimensions this library targets.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    A_cl = sys.A + sys.B @ K
    if not is_schur(A_cl):
        raise NotStabilizing(
            f"closed loop has spectral radius {spectral_radius(A_cl):.6g} >= 1")
    n = sys.n_x
    lhs = np.eye(n * n) - kron(A_cl.T, A_cl.T)
    rhs = vec(cost.Q + K.T @ cost.R @ K)
    P = unvec(np.linalg.solve(lhs, rhs), n)
    return 0.5 * (P + P.T)


def lyapunov_residual(sys: LinearSystem, K: np.ndarray, cost: CostSpec,
                      P: np.ndarray) -> float:
    """Frobenius norm of ``P - Q - K'RK - (A+BK)' P (A+BK)``."""
    A_cl = sys.A + sys.B @ K
    return float(np.linalg.norm(
        P - cost.Q - K.T @ cost.R @ K - A_cl.T @ P @ A_cl, "fro"))


def policy_improve(sys: LinearSystem, P: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Greedy gain ``K = -(R + B'PB)^{-1} B'PA`` for the kernel ``P``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    BtP = sys.B.T @ P
    return -np.linalg.solve(R + BtP @ sys.B, BtP @ sys.A)


def dare_residual(sys: LinearSystem, cost: CostSpec, P: np.ndarray) -> float:
    """Frobenius norm of the fixed-point equation residual at ``P``."""
    A, B = sys.A, sys.B
    BtP = B.T @ P
    G = cost.R + BtP @ B
    res = cost.Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(G, BtP @ A) - P
    return float(np.linalg.norm(res, "fro"))


def solve_dare(sys: LinearSystem, cost: CostSpec, tol: float = 1e-12,
               max_iters: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
    """Optimal kernel and gain via the Riccati value recursion from P0 = Q.

    Returns ``(P_star, K_star)``. Deliberately independent of policy
    iteration so the pair can cross-check each other.
    """
    sys.require_stabilizable()
    A, B = sys.A, sys.B
    P = cost.Q.copy()
    for _ in range(max_iters):
        BtP = B.T @ P
        G = cost.R + BtP @ B
        K = -np.linalg.solve(G, BtP @ A)
        P_next = cost.Q + A.T @ P @ A + A.T @ P @ B @ K
        P_next = 0.5 * (P_next + P_next.T)
        if np.linalg.norm(P_next - P, "fro") <= tol:
            P = P_next
            break
        P = P_next
    else:
        raise ConvergenceError(
            f"value iteration did not reach step tolerance {tol:g} "
            f"in {max_iters} iterations")
    K_star = policy_improve(sys, P, cost.R)
    if not is_schur(A + B @ K_star, margin=0.0):
        raise ConvergenceError("value iteration converged to a non-stabilizing gain")
    return P, K_star


@dataclass
class PiTrace:
    """Record of a policy-iteration run: per-iteration gains, kernels and
    distances to the optimum, plus the empirical contraction factor."""

    Ks: list = field(default_factory=list)
    Ps: list = field(default_factory=list)
    errors: np.ndarray | None = None      # ||P_i - P_star||_F
    P_star: np.ndarray | None = None
    K_star: np.ndarray | None = None
    c_hat: float | None = None

    def __len__(self) -> int:
        return len(self.Ps)


def estimate_contraction(trace: PiTrace, floor: float = 1e-13) -> float:
    """Largest one-step error ratio ``||P_{i+1}-P*|| / ||P_i-P*||`` observed
    along the trace, skipping near-converged denominators."""
    if trace.errors is None or len(trace.errors) < 2:
        raise InsufficientTrace("need at least two recorded iterations")
    errs = np.asarray(trace.errors, dtype=float)
    ratios = [errs[i + 1] / errs[i] for i in range(len(errs) - 1) if errs[i] >= floor]
    if not ratios:
        raise InsufficientTrace("trace already at the fixed point; no usable ratios")
    c_hat = float(max(ratios))
    if c_hat >= 1.0:
        raise ValueError(f"trace is not contracting (max ratio {c_hat:.6g})")
    return c_hat


def pi_run(sys: LinearSystem, cost: CostSpec, K1: np.ndarray,
           max_iters: int = 100, tol: float = 1e-12) -> PiTrace:
    """Exact policy iteration from the stabilizing gain ``K1``.

    Stops once ``||P_{i+1} - P_i||_F <= tol`` (or after ``max_iters``). The
    optimal pair used for the error column is computed by the independent
    value-recursion solver, pushed near machine precision so the contraction
    estimate is not polluted by the reference's own error floor.
    """
    P_star, K_star = solve_dare(sys, cost, tol=1e-15)
    trace = PiTrace(P_star=P_star, K_star=K_star)
    errors = []
    K = np.atleast_2d(np.asarray(K1, dtype=float))
    P_prev = None
    for _ in range(max_iters):
        P = policy_evaluate(sys, K, cost)   # raises NotStabilizing on a bad K1
        trace.Ks.append(K)
        trace.Ps.append(P)
        errors.append(float(np.linalg.norm(P - P_star, "fro")))
        K = policy_improve(sys, P, cost.R)
        if P_prev is not None and np.linalg.norm(P - P_prev, "fro") <= tol:
            break
        P_prev = P
    trace.errors = np.asarray(errors)
    try:
        trace.c_hat = estimate_contraction(trace)
    except (InsufficientTrace, ValueError):
        trace.c_hat = None
    return trace


def vectorized_pi_step(sys: LinearSystem, cost: CostSpec, P: np.ndarray,
                       cond_limit: float = 1e12) -> np.ndarray:
    """One improvement-plus-evaluation step as a single Kronecker solve.

    Folds the greedy gain of ``P`` into the lifted operator
    ``(I - Acl' (x) Acl') vec(P_next) = vec(Q + K'RK)`` and solves it in one
    shot; must agree with ``policy_evaluate(policy_improve(P))``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    K_next = policy_improve(sys, P, cost.R)
    A_cl = sys.A + sys.B @ K_next
    n = sys.n_x
    op = np.eye(n * n) - kron(A_cl.T, A_cl.T)
    if np.linalg.cond(op) > cond_limit:
        raise SingularOperator(
            f"lifted operator condition number exceeds {cond_limit:g}")
    rhs = vec(cost.Q + K_next.T @ cost.R @ K_next)
    P_next = unvec(np.linalg.solve(op, rhs), n)
    return 0.5 * (P_next + P_next.T)
