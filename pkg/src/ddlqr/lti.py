"""Noise-free discrete-time LTI plant, quadratic cost weights, and the
episodic excitation policies used by the data-driven iterations.

All randomness comes from ``numpy.random.default_rng`` (PCG64) with an
explicit 64-bit seed, so every rollout is reproducible from its seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import NotStabilizable

SCHUR_MARGIN = 1e-9


@dataclass(frozen=True)
class LinearSystem:
    """Plant ``x_{t+1} = A x_t + B u_t``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    def theta(self) -> np.ndarray:
        """Parameter matrix ``[A B]`` targeted by identification."""
        return np.hstack([self.A, self.B])

    def is_stabilizable(self, tol: float = SCHUR_MARGIN) -> bool:
        """PBH test: rank [A - lam I, B] = n_x for every eigenvalue with
        \\|lam\\| >= 1 (checked with a small margin)."""
        n = self.n_x
        if self.B.shape[1] >= n:
            # full-row-rank B makes any A stabilizable; cheap shortcut
            sv = np.linalg.svd(self.B, compute_uv=False)
            if sv[-1] > 1e-9 * max(sv[0], 1e-300):
                return True
        for lam in np.linalg.eigvals(self.A):
            if abs(lam) >= 1.0 - tol:
                pencil = np.hstack([self.A - lam * np.eye(n), self.B])
                if np.linalg.matrix_rank(pencil) < n:
                    return False
        return True

    def require_stabilizable(self):
        if not self.is_stabilizable():
            raise NotStabilizable("(A, B) fails the PBH stabilizability test")


def system_from_theta(theta: np.ndarray, n_x: int) -> LinearSystem:
    """Split an estimate ``[A B]`` back into a :class:`LinearSystem`."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape[0] != n_x or theta.shape[1] <= n_x:
        raise ValueError(f"theta of shape {theta.shape} is not [A B] with n_x={n_x}")
    return LinearSystem(theta[:, :n_x], theta[:, n_x:])


@dataclass(frozen=True)
class CostSpec:
    """Stage-cost weights ``x' Q x + u' R u`` with Q PSD and R PD."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = 0.5 * (np.atleast_2d(np.asarray(self.Q, dtype=float)) +
                   np.atleast_2d(np.asarray(self.Q, dtype=float)).T)
        R = 0.5 * (np.atleast_2d(np.asarray(self.R, dtype=float)) +
                   np.atleast_2d(np.asarray(self.R, dtype=float)).T)
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


def spectral_radius(M: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(M)).max())


def is_schur(M: np.ndarray, margin: float = SCHUR_MARGIN) -> bool:
    return spectral_radius(M) < 1.0 - margin


def step(sys: LinearSystem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One plant transition ``A x + B u``."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if x.size != sys.n_x or u.size != sys.n_u:
        raise ValueError(f"state/input sizes {x.size}/{u.size} do not match "
                         f"system ({sys.n_x}, {sys.n_u})")
    return sys.A @ x + sys.B @ u


@dataclass(frozen=True)
class DitherPolicy:
    """Additive excitation on top of the feedback ``u = K x``.

    kind:
        ``"zero"``      no excitation;
        ``"gaussian"``  fresh draw from N(0, covariance) at every step;
        ``"paired"``    fresh Gaussian draw at odd steps, the negated previous
        draw at even steps (the antisymmetric pairing behind the
        average-system construction).
    """

    kind: str = "zero"
    covariance: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "gaussian", "paired"):
            raise ValueError(f"unknown dither kind {self.kind!r}")
        if self.kind != "zero":
            if self.covariance is None:
                raise ValueError(f"{self.kind} dither needs a covariance")
            W = np.atleast_2d(np.asarray(self.covariance, dtype=float))
            W = 0.5 * (W + W.T)
            if np.linalg.eigvalsh(W).min() < -1e-12:
                raise ValueError("dither covariance must be PSD")
            object.__setattr__(self, "covariance", W)

    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.covariance is not None
                                       and not np.any(self.covariance))

    def sampler(self, n_u: int, rng: np.random.Generator) -> "DitherSampler":
        return DitherSampler(self, n_u, rng)


class DitherSampler:
    """Stateful per-run sampler; draw() is called once per timestep, first
    call counting as timestep 1 (odd)."""

    def __init__(self, policy: DitherPolicy, n_u: int, rng: np.random.Generator):
        self.policy = policy
        self.n_u = n_u
        self.rng = rng
        self._t = 0
        self._last = np.zeros(n_u)
        if policy.kind == "zero":
            self._chol = None
        else:
            if policy.covariance.shape != (n_u, n_u):
                raise ValueError(f"dither covariance shape {policy.covariance.shape} "
                                 f"does not match n_u={n_u}")
            # PSD Cholesky with a tiny jitter fallback for singular covariances
            W = policy.covariance
            try:
                self._chol = np.linalg.cholesky(W)
            except np.linalg.LinAlgError:
                w, V = np.linalg.eigh(W)
                self._chol = V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))

    def draw(self) -> np.ndarray:
        self._t += 1
        kind = self.policy.kind
        if kind == "zero":
            return np.zeros(self.n_u)
        if kind == "gaussian" or self._t % 2 == 1:
            eta = self._chol @ self.rng.standard_normal(self.n_u)
        else:
            eta = -self._last
        self._last = eta
        return eta


@dataclass
class Trajectory:
    """Recorded rollout: ``states[j]`` is x at timestep j+1, so
    ``states[j+1] = A states[j] + B inputs[j]`` exactly."""

    states: np.ndarray   # (T+1, n_x)
    inputs: np.ndarray   # (T, n_u)
    dithers: np.ndarray  # (T, n_u)
    seed: int | None = None
    t_start: int = 1     # global timestep of states[0]

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def regressors(self) -> np.ndarray:
        """Stacked ``d_t = (x_t; u_t)``, shape (T, n_x + n_u)."""
        return np.hstack([self.states[:-1], self.inputs])

    @property
    def next_states(self) -> np.ndarray:
        return self.states[1:]

    def to_csv(self, path) -> None:
        n_x = self.states.shape[1]
        n_u = self.inputs.shape[1]
        header = (["t"] + [f"x{i+1}" for i in range(n_x)]
                  + [f"u{i+1}" for i in range(n_u)])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for j in range(len(self)):
                row = [self.t_start + j]
                row += [format(v, ".17g") for v in self.states[j]]
                row += [format(v, ".17g") for v in self.inputs[j]]
                writer.writerow(row)


def rollout(sys: LinearSystem, K: np.ndarray, dither: DitherPolicy,
            x0: np.ndarray, steps: int,
            rng: np.random.Generator | None = None,
            sampler: DitherSampler | None = None,
            t_start: int = 1) -> Trajectory:
    """Roll the closed loop ``u_t = K x_t + eta_t`` for ``steps`` timesteps.

    A persistent ``sampler`` can be passed to keep one dither stream (and its
    odd/even pairing) running across consecutive episodes.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    x0 = np.asarray(x0, dtype=float).ravel()
    if K.shape != (sys.n_u, sys.n_x):
        raise ValueError(f"gain shape {K.shape} does not match system "
                         f"({sys.n_u}, {sys.n_x})")
    if x0.size != sys.n_x:
        raise ValueError("x0 has wrong dimension")
    if sampler is None:
        if rng is None:
            rng = np.random.default_rng(dither.seed)
        sampler = dither.sampler(sys.n_u, rng)

    states = np.empty((steps + 1, sys.n_x))
    inputs = np.empty((steps, sys.n_u))
    dithers = np.empty((steps, sys.n_u))
    states[0] = x0
    x = x0
    for j in range(steps):
        eta = sampler.draw()
        u = K @ x + eta
        x = sys.A @ x + sys.B @ u
        inputs[j] = u
        dithers[j] = eta
        states[j + 1] = x
    return Trajectory(states=states, inputs=inputs, dithers=dithers,
                      seed=dither.seed, t_start=t_start)
