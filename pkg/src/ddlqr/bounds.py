"""Closed-form constants for the worst-case convergence analysis of the
indirect iteration, and the iterate-error rate comparison between the direct
and indirect methods.

The disturbance gain is a degree-9 polynomial in the current
estimation-error bound; its ten coefficients ``rho_0..rho_9`` are assembled
from intermediate tables (the ``d3*``, ``d4*``, ``d5*``, ``d6*`` constants
below) that depend only on Frobenius norms of the problem data, the initial
kernel, and two spectral-norm suprema of closed-loop matrices. The tables are
long and transcription is the dominant risk, so the test suite keeps a second
independent transcription and compares term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    """Norm data feeding the coefficient tables.

    ``cl_sup`` and ``cl_sup_est`` are the running suprema of the closed-loop
    spectral norms on the true system and on the estimates; both must stay
    below one for the constants to be finite. On finite traces they are
    under-approximations, so computed bounds are trace-conditioned.
    """

    norm_a: float
    norm_b: float
    norm_q: float
    norm_r: float
    norm_r_inv: float
    norm_p0: float
    cl_sup: float
    cl_sup_est: float
    n_x: int
    a: float
    delta_theta0_norm: float
    c_hat: float

    def __post_init__(self):
        for name in ("norm_a", "norm_b", "norm_q", "norm_r", "norm_r_inv",
                     "norm_p0", "delta_theta0_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 <= self.cl_sup < 1.0 or not 0.0 <= self.cl_sup_est < 1.0:
            raise ValueError("cl_sup and cl_sup_est must lie in [0, 1)")
        if self.n_x < 1:
            raise ValueError("n_x must be >= 1")
        if self.a <= 0:
            raise ValueError("a must be positive")
        if not 0.0 < self.c_hat < 1.0:
            raise ValueError("c_hat must lie in (0, 1)")


def disturbance_gain_coefficients(inp: BoundInputs) -> np.ndarray:
    """The ten polynomial coefficients ``(rho_0, ..., rho_9)``."""
    na, nb = inp.norm_a, inp.norm_b
    nq, nr, ri = inp.norm_q, inp.norm_r, inp.norm_r_inv
    p0 = inp.norm_p0

    d33 = ri**2 * p0**2
    d32 = 2.0 * ri**2 * p0**2 * (na + nb)
    d31 = ri * p0 + ri**2 * p0**2 * ((na + nb) ** 2 + na * nb)
    d30 = 2.0 * ri * p0 * nb + ri**2 * p0**2 * na * nb * (na + nb)

    d44 = d33
    d43 = d32 + nb * d33
    d42 = d31 + nb * d32
    d41 = d30 + nb * d31
    d40 = nb * d30 + ri * na * nb * p0 + 1.0

    g5 = na + ri * na * nb**2 * p0
    d59 = d44 * d44
    d58 = 2.0 * d44 * d43
    d57 = 2.0 * d44 * d42 + d43 * d43
    d56 = 2.0 * d44 * d41 + 2.0 * d43 * d42
    d55 = 2.0 * d44 * d40 + 2.0 * d43 * d41 + d42 * d42
    d54 = 2.0 * d43 * d40 + 2.0 * d42 * d41 + 2.0 * g5 * d44
    d53 = 2.0 * d42 * d40 + d41 * d41 + 2.0 * g5 * d43
    d52 = 2.0 * d41 * d40 + 2.0 * g5 * d42
    d51 = d40 * d40 + 2.0 * g5 * d41
    d50 = 2.0 * g5 * d40

    g6 = 2.0 * nb * p0 * nr * ri * na
    d67 = nr * d33 * d33
    d66 = 2.0 * nr * d33 * d32
    d65 = 2.0 * nr * d33 * d31 + nr * d32 * d32
    d64 = 2.0 * nr * d33 * d30 + 2.0 * nr * d32 * d31
    d63 = nr * d31 * d31 + g6 * d33
    d62 = 2.0 * nr * d31 * d30 + g6 * d32
    d61 = nr * d30 * d30 + g6 * d31
    d60 = g6 * d30

    k1 = math.sqrt(inp.n_x) / (1.0 - inp.cl_sup**2)
    k2 = math.sqrt(inp.n_x) / (1.0 - inp.cl_sup_est**2)
    w = nq + na**2 * nb**2 * nr * ri**2 * p0**2

    rho = np.array([
        k1 * d60 + k1 * k2 * w * d50,
        k1 * d61 + k1 * k2 * w * d51,
        k1 * d62 + k1 * k2 * w * d52,
        k1 * d63 + k1 * k2 * w * d53,
        k1 * d64 + k1 * k2 * w * d54,
        k1 * d65 + k1 * k2 * w * d55,
        k1 * d66 + k1 * k2 * w * d56,
        k1 * d67 + k1 * k2 * w * d57,
        k1 * k2 * w * d58,
        k1 * k2 * w * d59,
    ])
    return rho


def disturbance_gain(inp: BoundInputs, delta_theta_upper):
    """Disturbance gain ``sum_k rho_k * dtu^k``; non-increasing along any
    non-increasing error-bound sequence. Accepts a scalar or an array (the
    polynomial is evaluated elementwise)."""
    dtu = np.asarray(delta_theta_upper, dtype=float)
    if np.any(dtu < 0):
        raise ValueError("delta_theta_upper must be nonnegative")
    rho = disturbance_gain_coefficients(inp)
    powers = dtu[..., None] ** np.arange(10)
    out = powers @ rho
    return float(out) if out.ndim == 0 else out


def rate_bounds(inp: BoundInputs, i: int, p0_err: float,
                delta_theta_upper_inf: float) -> tuple[float, float]:
    """Iterate-error upper bounds at episode ``i`` for the direct method
    (pure contraction) and the indirect one (contraction plus the persistent
    disturbance offset). The first never exceeds the second.
    """
    if i < 0:
        raise ValueError("episode index must be nonnegative")
    c = inp.c_hat
    f_dpi = c**i * p0_err
    f_ipi = f_dpi + disturbance_gain(inp, delta_theta_upper_inf) / (1.0 - c) * delta_theta_upper_inf
    assert f_dpi <= f_ipi
    return f_dpi, f_ipi


def equal_budget_episodes(total_steps: int, tau_ipi: int, tau_dpi: int) -> tuple[int, int]:
    """Episode counts each method completes within one timestep budget."""
    if total_steps < 0 or tau_ipi < 1 or tau_dpi < 1:
        raise ValueError("invalid budget or episode lengths")
    return total_steps // tau_ipi, total_steps // tau_dpi
