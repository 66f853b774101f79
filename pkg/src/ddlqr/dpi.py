"""Direct (model-free) data-driven policy iteration with the average-system
construction that restores identifiability in the noise-free setting.

Each episode applies ``u = K_i x + eta`` where the dither is antisymmetric in
consecutive pairs: a fresh Gaussian draw at odd timesteps, its negation at
even ones. Summing the two transitions of a pair cancels the dither and
leaves the average system ``(x_even + x_next) = (A + B K_i)(x_odd + x_even)``,
whose Bellman regression identifies the kernel of the *linear* policy even
though the executed policy is affine. The improvement step regresses the
products ``B'PA`` and ``B'PB`` from the same raw samples, so neither step
ever forms a model of (A, B).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NotStabilizing, Underdetermined
from .lti import CostSpec, DitherPolicy, DitherSampler, LinearSystem, is_schur
from .persistency import local_persistency_alpha, outer_stream
from .riccati import solve_dare
from .tensor_ops import mats, vecv

COND_LIMIT_DEFAULT = 1e10
BLOWUP_NORM_DEFAULT = 1e6


def min_episode_length(n_x: int, n_u: int) -> int:
    """Smallest even episode length identifying both regression targets:
    ``n_x (n_x + 1)`` samples for the kernel (half as many averaged pairs)
    and ``n_u (n_u + 1) / 2 + n_u n_x`` for the improvement products."""
    if n_x < 1 or n_u < 1:
        raise ValueError("state and input dimensions must be >= 1")
    raw = max(n_x * (n_x + 1), n_u * (n_u + 1) // 2 + n_u * n_x)
    return raw + (raw % 2)


@dataclass(frozen=True)
class DpiConfig:
    tau: int
    episodes: int
    K1: np.ndarray
    dither_cov: np.ndarray
    x0: np.ndarray | None = None
    seed: int = 0
    cond_limit: float = COND_LIMIT_DEFAULT
    blowup_norm: float = BLOWUP_NORM_DEFAULT

    def __post_init__(self):
        if self.tau < 2 or self.tau % 2:
            raise ValueError("tau must be an even integer >= 2")
        if self.episodes < 1:
            raise ValueError("need at least one episode")
        W = np.atleast_2d(np.asarray(self.dither_cov, dtype=float))
        if not np.any(W):
            raise ValueError("zero dither covariance: the improvement "
                             "regressors would vanish identically")
        object.__setattr__(self, "dither_cov", W)
        object.__setattr__(self, "K1", np.atleast_2d(np.asarray(self.K1, dtype=float)))


@dataclass
class DpiEpisodeData:
    """One episode of raw triples plus the averaged pairs and regressors."""

    K: np.ndarray          # gain executed during the episode
    xs: np.ndarray         # (tau, n_x) states x_t
    us: np.ndarray         # (tau, n_u) inputs
    etas: np.ndarray       # (tau, n_u) dither values
    x_after: np.ndarray    # (tau, n_x) states x_{t+1}
    s_prev: np.ndarray     # (tau/2, n_x) pair sums x_{2k-1} + x_{2k}
    s_next: np.ndarray     # (tau/2, n_x) pair sums x_{2k} + x_{2k+1}
    phi: np.ndarray        # (tau/2, n_x(n_x+1)/2) evaluation regressors
    R_k: np.ndarray        # (tau/2,) average-system stage costs
    gamma: np.ndarray      # (tau, n_u n_x + n_u(n_u+1)/2) improvement regressors

    @property
    def n_pairs(self) -> int:
        return self.s_prev.shape[0]

    def c_targets(self, P: np.ndarray, cost: CostSpec) -> np.ndarray:
        """Improvement targets ``x'(Q + K'RK - P)x + x_next' P x_next``."""
        M = cost.Q + self.K.T @ cost.R @ self.K - P
        return (np.einsum("ti,ij,tj->t", self.xs, M, self.xs)
                + np.einsum("ti,ij,tj->t", self.x_after, P, self.x_after))


def build_episode_data(states: np.ndarray, inputs: np.ndarray,
                       etas: np.ndarray, K: np.ndarray,
                       cost: CostSpec) -> DpiEpisodeData:
    """Assemble regressors and targets from one even-length rollout
    (``states`` has one more row than ``inputs``)."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    tau = inputs.shape[0]
    if tau % 2 or states.shape[0] != tau + 1:
        raise ValueError("episode must hold an even number of transitions")

    xs = states[:-1]
    x_after = states[1:]
    s_prev = states[0:tau:2] + states[1:tau + 1:2]     # x_{2k-1} + x_{2k}
    s_next = states[1:tau:2] + states[2:tau + 1:2]     # x_{2k} + x_{2k+1}

    M = cost.Q + K.T @ cost.R @ K
    R_k = np.einsum("ki,ij,kj->k", s_prev, M, s_prev)
    phi = np.array([vecv(a) - vecv(b) for a, b in zip(s_prev, s_next)])

    Kx = xs @ K.T
    gamma = np.array([
        np.concatenate([2.0 * np.kron(x, eta), vecv(u) - vecv(kx)])
        for x, eta, u, kx in zip(xs, etas, inputs, Kx)])
    return DpiEpisodeData(K=K, xs=xs, us=inputs, etas=etas, x_after=x_after,
                          s_prev=s_prev, s_next=s_next, phi=phi, R_k=R_k,
                          gamma=gamma)


def _solve_gram(regressors: np.ndarray, targets: np.ndarray, unknowns: int,
                cond_limit: float, stage: str, episode=None) -> np.ndarray:
    if regressors.shape[0] < unknowns:
        raise Underdetermined(
            f"{stage}: {regressors.shape[0]} samples for {unknowns} unknowns",
            episode=episode, stage=stage)
    # The solve goes through a least-squares factorization of the regressor
    # stack, so the invertibility threshold applies to the stack's condition
    # number (the Gram's is its square). Rank deficiency still shows up as an
    # effectively infinite condition number.
    if np.linalg.cond(regressors) > cond_limit:
        raise Underdetermined(
            f"{stage}: regressor condition number exceeds {cond_limit:g}",
            episode=episode, stage=stage)
    sol, *_ = np.linalg.lstsq(regressors, targets, rcond=None)
    return sol


def dpi_evaluate(episode: DpiEpisodeData, cost: CostSpec,
                 cond_limit: float = COND_LIMIT_DEFAULT,
                 episode_index=None) -> np.ndarray:
    """Kernel of the executed gain from the averaged-pair Bellman
    regression; equals the model-based evaluation on the true plant whenever
    the regression is well posed (noise-free data)."""
    n_x = episode.xs.shape[1]
    m = n_x * (n_x + 1) // 2
    s = _solve_gram(episode.phi, episode.R_k, m, cond_limit,
                    "evaluation", episode_index)
    return mats(s, n_x)


def dpi_improve(episode: DpiEpisodeData, P: np.ndarray, cost: CostSpec,
                cond_limit: float = COND_LIMIT_DEFAULT,
                episode_index=None) -> np.ndarray:
    """Improved gain from the regression recovering ``B'PA`` and ``B'PB``."""
    n_x = episode.xs.shape[1]
    n_u = episode.us.shape[1]
    if not np.any(episode.etas):
        raise Underdetermined("improvement: dither is identically zero",
                              episode=episode_index, stage="improvement")
    q = n_u * n_x + n_u * (n_u + 1) // 2
    xi = _solve_gram(episode.gamma, episode.c_targets(P, cost), q, cond_limit,
                     "improvement", episode_index)
    BtPA = xi[:n_u * n_x].reshape((n_u, n_x), order="F")
    BtPB = mats(xi[n_u * n_x:], n_u)
    return -np.linalg.solve(cost.R + BtPB, BtPA)


@dataclass
class DpiTrace:
    tau: int
    seed: int
    P_star: np.ndarray
    K_star: np.ndarray
    P_hats: list = field(default_factory=list)
    K_execs: list = field(default_factory=list)
    K_posts: list = field(default_factory=list)
    err_P: list = field(default_factory=list)
    err_K_post: list = field(default_factory=list)
    cond_phi: list = field(default_factory=list)
    cond_gamma: list = field(default_factory=list)
    phi_persistent: list = field(default_factory=list)
    gamma_persistent: list = field(default_factory=list)
    diverged: bool = False

    @property
    def episodes(self) -> int:
        return len(self.P_hats)

    def t_end(self, i: int) -> int:
        return i * self.tau

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "timestep", "err_P", "err_K",
                             "cond_phi", "cond_gamma", "phi_persistent",
                             "gamma_persistent"])
            for i in range(1, self.episodes + 1):
                writer.writerow([
                    i, self.t_end(i),
                    format(self.err_P[i - 1], ".17g"),
                    format(self.err_K_post[i - 1], ".17g"),
                    format(self.cond_phi[i - 1], ".17g"),
                    format(self.cond_gamma[i - 1], ".17g"),
                    int(self.phi_persistent[i - 1]),
                    int(self.gamma_persistent[i - 1])])


def dpi_run(sys_true: LinearSystem, cost: CostSpec, config: DpiConfig) -> DpiTrace:
    """Run the direct iteration; raises :class:`Underdetermined` as soon as
    an episode's regressions cannot identify their unknowns."""
    n_x, n_u = sys_true.n_x, sys_true.n_u
    # tau below min_episode_length(n_x, n_u) is not rejected here: the
    # episode-1 regression then raises Underdetermined, which is the
    # documented failure mode for insufficient samples.
    K = config.K1
    if not is_schur(sys_true.A + sys_true.B @ K):
        raise NotStabilizing("K1 does not stabilize the system")
    P_star, K_star = solve_dare(sys_true, cost)
    trace = DpiTrace(tau=config.tau, seed=config.seed,
                     P_star=P_star, K_star=K_star)

    rng = np.random.default_rng(config.seed)
    sampler = DitherSampler(DitherPolicy("paired", config.dither_cov,
                                         config.seed), n_u, rng)
    x = (np.ones(n_x) if config.x0 is None
         else np.asarray(config.x0, dtype=float).ravel())

    for i in range(1, config.episodes + 1):
        states = np.empty((config.tau + 1, n_x))
        inputs = np.empty((config.tau, n_u))
        etas = np.empty((config.tau, n_u))
        states[0] = x
        for j in range(config.tau):
            eta = sampler.draw()
            u = K @ x + eta
            x = sys_true.A @ x + sys_true.B @ u
            inputs[j] = u
            etas[j] = eta
            states[j + 1] = x
        ep = build_episode_data(states, inputs, etas, K, cost)

        P_hat = dpi_evaluate(ep, cost, config.cond_limit, episode_index=i)
        K_post = dpi_improve(ep, P_hat, cost, config.cond_limit, episode_index=i)

        trace.P_hats.append(P_hat)
        trace.K_execs.append(K)
        trace.K_posts.append(K_post)
        trace.err_P.append(float(np.linalg.norm(P_hat - P_star, "fro")))
        trace.err_K_post.append(float(np.linalg.norm(K_post - K_star, "fro")))
        trace.cond_phi.append(float(np.linalg.cond(ep.phi.T @ ep.phi)))
        trace.cond_gamma.append(float(np.linalg.cond(ep.gamma.T @ ep.gamma)))
        trace.phi_persistent.append(
            local_persistency_alpha(outer_stream(ep.phi),
                                    ep.n_pairs, ep.n_pairs)[0])
        trace.gamma_persistent.append(
            local_persistency_alpha(outer_stream(ep.gamma),
                                    config.tau, config.tau)[0])

        if np.linalg.norm(K_post, "fro") > config.blowup_norm:
            trace.diverged = True
            break
        K = K_post
    return trace
