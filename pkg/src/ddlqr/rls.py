"""Recursive least squares over stacked state-input regressors.

The estimator tracks theta = [A B] from noise-free transitions
``x_next = theta @ d`` with ``d = (x; u)``. The information matrix grows as
``H <- H + d d'`` and its inverse is maintained by rank-one Sherman-Morrison
updates, so no per-sample matrix inversion ever happens; a full
refactorization every ``refresh_every`` samples caps floating-point drift on
long runs.

Initialization is always ``H0 = a I`` with ``a > 0``, which keeps H
invertible forever and makes the worst-case error bookkeeping
(:meth:`RlsEstimator.error_upper_bound`, :func:`estimation_error_bound`,
:func:`local_persistency_envelope`) closed-form.
"""

from __future__ import annotations

import csv
import math

import numpy as np


class RlsEstimator:
    """Streaming estimator of ``theta = [A B]``.

    One owner mutates an instance; :meth:`copy` produces independent
    snapshots.
    """

    def __init__(self, n_x: int, n_u: int, theta0: np.ndarray | None = None,
                 a: float = 1.0, refresh_every: int = 1000):
        if a <= 0:
            raise ValueError("H0 scale a must be positive")
        dim = n_x + n_u
        self.n_x = n_x
        self.n_u = n_u
        self.dim = dim
        self.a = float(a)
        if theta0 is None:
            theta0 = np.zeros((n_x, dim))
        theta0 = np.atleast_2d(np.asarray(theta0, dtype=float))
        if theta0.shape != (n_x, dim):
            raise ValueError(f"theta0 shape {theta0.shape}, expected ({n_x}, {dim})")
        self.theta = theta0.copy()
        self.theta0 = theta0.copy()
        self.H = self.a * np.eye(dim)
        self.H_inv = (1.0 / self.a) * np.eye(dim)
        self.n_samples = 0
        self.refresh_every = int(refresh_every)
        self._since_refresh = 0

    def copy(self) -> "RlsEstimator":
        snap = RlsEstimator.__new__(RlsEstimator)
        snap.__dict__.update({k: (v.copy() if isinstance(v, np.ndarray) else v)
                              for k, v in self.__dict__.items()})
        return snap

    @property
    def A_hat(self) -> np.ndarray:
        return self.theta[:, :self.n_x]

    @property
    def B_hat(self) -> np.ndarray:
        return self.theta[:, self.n_x:]

    def _sm_step(self, d: np.ndarray) -> None:
        # Sherman-Morrison rank-one inverse update for H <- H + d d'
        Hd = self.H_inv @ d
        self.H_inv -= np.outer(Hd, Hd) / (1.0 + d @ Hd)

    def _maybe_refresh(self) -> None:
        if self._since_refresh >= self.refresh_every:
            self.H_inv = np.linalg.solve(self.H, np.eye(self.dim))
            self._since_refresh = 0

    def update(self, d: np.ndarray, x_next: np.ndarray) -> "RlsEstimator":
        """Fold in one sample ``(d, x_next)``; returns self for chaining."""
        d = np.asarray(d, dtype=float).ravel()
        x_next = np.asarray(x_next, dtype=float).ravel()
        if d.size != self.dim or x_next.size != self.n_x:
            raise ValueError("sample dimensions do not match the estimator")
        self._sm_step(d)
        self.H += np.outer(d, d)
        resid = x_next - self.theta @ d
        self.theta += np.outer(resid, self.H_inv @ d)
        self.n_samples += 1
        self._since_refresh += 1
        self._maybe_refresh()
        return self

    def update_episode(self, D: np.ndarray, X_next: np.ndarray) -> "RlsEstimator":
        """Fold in a whole episode at once via the batch form.

        ``H_new = H + sum d d'`` and ``theta_new = (theta H + sum x_next d')
        H_new^{-1}``; algebraically identical to streaming the samples through
        :meth:`update` one at a time (a tested property). The inverse is still
        advanced by per-sample rank-one updates.
        """
        D = np.atleast_2d(np.asarray(D, dtype=float))
        X_next = np.atleast_2d(np.asarray(X_next, dtype=float))
        if D.shape[0] == 0:
            raise ValueError("episode must contain at least one sample")
        if D.shape[1] != self.dim or X_next.shape != (D.shape[0], self.n_x):
            raise ValueError("episode arrays do not match the estimator dimensions")
        rhs = self.theta @ self.H + X_next.T @ D
        self.H += D.T @ D
        self.theta = np.linalg.solve(self.H, rhs.T).T
        for d in D:
            self._sm_step(d)
        self.n_samples += D.shape[0]
        self._since_refresh += D.shape[0]
        self._maybe_refresh()
        return self

    # ---- diagnostics (require the true parameters; the estimator core
    # above never touches them) ----

    def error_upper_bound(self, theta_true: np.ndarray) -> float:
        """Worst-case bound ``||(theta0 - theta) H0||_F ||H^{-1}||_F`` on the
        current estimation error; non-increasing along any data stream."""
        d0 = float(np.linalg.norm(self.theta0 - theta_true, "fro"))
        return self.a * d0 * float(np.linalg.norm(self.H_inv, "fro"))

    def error_norm(self, theta_true: np.ndarray) -> float:
        return float(np.linalg.norm(self.theta - theta_true, "fro"))

    def predicted_error(self, theta_true: np.ndarray) -> np.ndarray:
        """Closed-form noise-free error ``(theta0 - theta) H0 H_t^{-1}``;
        matches ``theta_hat - theta_true`` up to roundoff."""
        return (self.theta0 - theta_true) @ (self.a * self.H_inv)


def estimation_error_bound(delta_theta0_norm: float, a: float, dim: int,
                           n_max: int, alpha_min: float,
                           max_nonpersistent: float, i: int) -> float:
    """Episode-indexed worst-case estimation error under partial excitation.

    ``a * dim * d0 / (a + floor(i / n_max) * alpha_min) + d0 * max_nonpersistent``,
    where ``dim = n_x + n_u``, ``(n_max, alpha_min)`` parameterize the
    auxiliary locally persistent sequence of the episode-sum stream, and
    ``max_nonpersistent`` is the sup of its non-persistent eigenvalue counts.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if alpha_min <= 0:
        raise ValueError("alpha_min must be positive")
    if not 0 <= max_nonpersistent <= dim:
        raise ValueError(f"max_nonpersistent must lie in [0, {dim}]")
    if i < 0:
        raise ValueError("episode index must be nonnegative")
    f = a * dim * delta_theta0_norm / (a + math.floor(i / n_max) * alpha_min)
    g = delta_theta0_norm * max_nonpersistent
    return f + g


def local_persistency_envelope(delta_theta0_norm: float, a: float, dim: int,
                               N: int, M: int, alpha: float, t: int) -> float:
    """Decay envelope for the error bound under locally persistent data:
    ``sqrt(dim) * ||dtheta0 H0||_F / sqrt((floor(t / (M ceil(N/M))) + 1) alpha)``.
    """
    cycle = M * math.ceil(N / M)
    return (math.sqrt(dim) * a * delta_theta0_norm
            / math.sqrt((math.floor(t / cycle) + 1) * alpha))


def export_estimator_trace(path, rows) -> None:
    """Write an estimator trace CSV with columns
    (t, err_theta, err_upper, lambda_min_H); rows are 4-tuples."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "err_theta", "err_upper", "lambda_min_H"])
        for t, err, upper, lam in rows:
            writer.writerow([t, format(err, ".17g"), format(upper, ".17g"),
                             format(lam, ".17g")])
