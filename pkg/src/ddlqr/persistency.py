"""Excitation analyzers for streams of PSD matrices.

A "stream" is an ordered stack ``Y`` of shape ``(T, n, n)`` of symmetric PSD
matrices, typically outer products ``d_t d_t'`` of regressors or their
per-episode sums. All verdicts here are finite-horizon: a window condition is
only quantified over windows fully contained in the available data, so
"persistent" always means "persistent over the observed horizon".

Index convention: entry ``Y[0]`` is the first element of the mathematical
sequence (index 1); window anchors for local persistency are the 1-based
indices ``M k + 1``, i.e. 0-based offsets ``0, M, 2M, ...``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

#: relative eigenvalue threshold deciding "full rank" for window sums
RANK_RTOL = 1e-9


def outer_stream(vectors: np.ndarray) -> np.ndarray:
    """Stack of outer products ``d_t d_t'`` from row-wise regressors."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    return np.einsum("ti,tj->tij", V, V)


def episode_sums(regressors: np.ndarray, tau: int) -> np.ndarray:
    """Per-episode Gramians ``D_i = sum_{t in episode i} d_t d_t'`` for
    consecutive blocks of ``tau`` regressors (trailing partial block dropped)."""
    V = np.atleast_2d(np.asarray(regressors, dtype=float))
    n_ep = V.shape[0] // tau
    if n_ep == 0:
        raise ValueError(f"need at least {tau} regressors for one episode")
    blocks = V[:n_ep * tau].reshape(n_ep, tau, V.shape[1])
    return np.einsum("eti,etj->eij", blocks, blocks)


def check_psd_stream(Y: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Validate every entry is symmetric PSD (eigenvalues >= -tol)."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 3 or Y.shape[1] != Y.shape[2]:
        raise ValueError(f"stream must have shape (T, n, n), got {Y.shape}")
    for k, S in enumerate(Y):
        if np.abs(S - S.T).max() > 1e-9 * max(1.0, np.abs(S).max()):
            raise ValueError(f"stream entry {k} is not symmetric")
        if np.linalg.eigvalsh(S).min() < -tol:
            raise ValueError(f"stream entry {k} is not PSD")
    return Y


def _prefix_sums(Y: np.ndarray) -> np.ndarray:
    """P[k] = sum of the first k entries, P[0] = 0."""
    T, n, _ = Y.shape
    P = np.empty((T + 1, n, n))
    P[0] = 0.0
    np.cumsum(Y, axis=0, out=P[1:])
    return P


def _is_full_rank(S: np.ndarray) -> tuple[bool, float]:
    """Relative full-rank test; returns (verdict, smallest eigenvalue)."""
    w = np.linalg.eigvalsh(S)
    lam_min, lam_max = float(w[0]), float(w[-1])
    return (lam_max > 0.0 and lam_min > RANK_RTOL * lam_max), lam_min


def is_globally_persistent(Y: np.ndarray, N: int, alpha: float,
                           tol: float = 1e-12) -> bool:
    """True iff every length-N window sum dominates ``alpha I`` (over all
    windows contained in the data)."""
    if N < 1 or alpha <= 0:
        raise ValueError("need N >= 1 and alpha > 0")
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0]
    if T < N:
        return False
    P = _prefix_sums(Y)
    for j in range(T - N + 1):
        S = P[j + N] - P[j]
        if np.linalg.eigvalsh(S)[0] < alpha - tol:
            return False
    return True


def is_locally_persistent(Y: np.ndarray, N: int, M: int, alpha: float,
                          tol: float = 1e-12) -> bool:
    """True iff the window condition holds at anchor offsets 0, M, 2M, ...
    (1-based anchors ``M k + 1``), full windows only."""
    if N < 1 or M < 1 or alpha <= 0:
        raise ValueError("need N >= 1, M >= 1 and alpha > 0")
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0]
    if T < N:
        return False
    P = _prefix_sums(Y)
    for j in range(0, T - N + 1, M):
        S = P[j + N] - P[j]
        if np.linalg.eigvalsh(S)[0] < alpha - tol:
            return False
    return True


def local_persistency_alpha(Y: np.ndarray, N: int, M: int) -> tuple[bool, float]:
    """Measure the largest admissible lower bound for local persistency at
    (N, M): returns (persistent, min over anchored windows of lambda_min).

    persistent is False when some anchored window sum fails the relative
    full-rank test or no full window fits in the data.
    """
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0]
    if T < N:
        return False, math.inf
    P = _prefix_sums(Y)
    ok = True
    alpha = math.inf
    for j in range(0, T - N + 1, M):
        full, lam_min = _is_full_rank(P[j + N] - P[j])
        ok = ok and full
        alpha = min(alpha, lam_min)
    return ok, alpha


def min_persistency_window(Y: np.ndarray, i: int) -> tuple[int, float]:
    """Minimum window length from 0-based index ``i`` whose partial sum is
    full rank, with the smallest eigenvalue of that sum.

    Convention ``(0, +inf)`` when no window within the data achieves full
    rank.
    """
    Y = np.asarray(Y, dtype=float)
    P = _prefix_sums(Y)
    return _min_window_from(P, i, Y.shape[0])


def _min_window_from(P: np.ndarray, i: int, T: int) -> tuple[int, float]:
    if not 0 <= i < T:
        raise IndexError(f"index {i} outside stream of length {T}")
    full, lam = _is_full_rank(P[T] - P[i])
    if not full:
        return 0, math.inf
    # lambda_min of the window sum grows with the window, so bisect for the
    # shortest full-rank window, then verify minimality (linear fallback for
    # the rare non-monotone relative-threshold case).
    lo, hi = 1, T - i
    while lo < hi:
        mid = (lo + hi) // 2
        full, _ = _is_full_rank(P[i + mid] - P[i])
        if full:
            hi = mid
        else:
            lo = mid + 1
    if lo > 1 and _is_full_rank(P[i + lo - 1] - P[i])[0]:
        lo = next(N for N in range(1, lo)
                  if _is_full_rank(P[i + N] - P[i])[0])
    _, lam = _is_full_rank(P[i + lo] - P[i])
    return lo, lam


def min_window_sequence(Y: np.ndarray) -> tuple[list[int], list[float]]:
    """Per-index minimum persistency windows and lower bounds."""
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[0]
    P = _prefix_sums(Y)
    window_lengths, window_bounds = [], []
    for i in range(T):
        n_pw, a_pw = _min_window_from(P, i, T)
        window_lengths.append(n_pw)
        window_bounds.append(a_pw)
    return window_lengths, window_bounds


def choose_auxiliary_params(Y: np.ndarray) -> tuple[int, float]:
    """Admissible auxiliary-sequence parameters ``(n_max, alpha_min)``.

    ``n_max = max(longest_window, 1)`` and ``alpha_min = smallest_bound`` when the
    stream has at least one full-rank window; for fully non-persistent
    streams (``longest_window = 0``, ``smallest_bound = +inf``) falls back to
    ``(n, 1.0)``, which is admissible for any stream by convention.
    """
    Y = np.asarray(Y, dtype=float)
    window_lengths, window_bounds = min_window_sequence(Y)
    n_bar = max(window_lengths) if window_lengths else 0
    finite = [a for a in window_bounds if math.isfinite(a)]
    alpha_under = min(finite) if finite else math.inf
    if n_bar == 0:
        return Y.shape[1], 1.0
    return max(n_bar, 1), alpha_under


def nonpersistent_counts(Y: np.ndarray, n_max: int, alpha_min: float,
                         validate: bool = True) -> list[int]:
    """Per-index count of eigenvalues of the running sum that fall below the
    auxiliary envelope ``floor(i / n_max) * alpha_min`` (1-based i).

    Zero when the comparison is infeasible (envelope still zero, or every
    eigenvalue already above it). The count is non-decreasing for streams
    whose eigen-directions are clearly faster or clearly slower than the
    envelope; a direction that straddles the envelope rate can be counted
    transiently and escape later, so only the sup of this sequence should be
    fed into error bounds. Choosing ``alpha_min`` strictly inside the
    admissible interval (e.g. half the smallest window bound) keeps
    persistent streams away from that edge.
    """
    Y = np.asarray(Y, dtype=float)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not (alpha_min > 0 and math.isfinite(alpha_min)):
        raise ValueError("alpha_min must be positive and finite")
    if validate:
        window_lengths, window_bounds = min_window_sequence(Y)
        n_bar = max(window_lengths) if window_lengths else 0
        finite = [a for a in window_bounds if math.isfinite(a)]
        alpha_under = min(finite) if finite else math.inf
        if n_bar > 0 and n_max < n_bar:
            raise ValueError(f"n_max={n_max} below the stream's largest "
                             f"persistency window {n_bar}")
        if math.isfinite(alpha_under) and alpha_min > alpha_under:
            raise ValueError(f"alpha_min={alpha_min:g} above the stream's "
                             f"smallest lower bound {alpha_under:g}")
    out = []
    running = np.zeros(Y.shape[1:])
    for idx in range(Y.shape[0]):
        running = running + Y[idx]
        envelope = math.floor((idx + 1) / n_max) * alpha_min
        if envelope <= 0.0:
            out.append(0)
            continue
        w = np.linalg.eigvalsh(running)
        tol = 1e-9 * (1.0 + envelope)
        out.append(int(np.sum(w < envelope - tol)))
    return out


@dataclass
class PersistencyReport:
    """Full excitation audit of one stream."""

    window_lengths: list[int]
    window_bounds: list[float]
    longest_window: int
    smallest_bound: float
    n_max: int
    alpha_min: float
    nonpersistent: list[int]

    @property
    def max_nonpersistent(self) -> int:
        return max(self.nonpersistent) if self.nonpersistent else 0

    @property
    def locally_persistent(self) -> bool:
        """Whether the stream kept pace with its auxiliary sequence."""
        return self.max_nonpersistent == 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "window_length", "window_bound",
                             "nonpersistent"])
            rows = zip(self.window_lengths, self.window_bounds,
                       self.nonpersistent)
            for i, (length, bound, count) in enumerate(rows, start=1):
                writer.writerow([i, length, format(bound, ".17g"), count])


def build_persistency_report(Y: np.ndarray, n_max: int | None = None,
                             alpha_min: float | None = None) -> PersistencyReport:
    """One-pass audit: window statistics, auxiliary parameters (chosen per
    :func:`choose_auxiliary_params` unless given), and the non-persistent
    eigenvalue counts."""
    Y = np.asarray(Y, dtype=float)
    window_lengths, window_bounds = min_window_sequence(Y)
    n_bar = max(window_lengths) if window_lengths else 0
    finite = [a for a in window_bounds if math.isfinite(a)]
    alpha_under = min(finite) if finite else math.inf
    if n_max is None or alpha_min is None:
        if n_bar == 0:
            chosen_n, chosen_a = Y.shape[1], 1.0
        else:
            chosen_n, chosen_a = max(n_bar, 1), alpha_under
        n_max = chosen_n if n_max is None else n_max
        alpha_min = chosen_a if alpha_min is None else alpha_min
    nonpersistent = nonpersistent_counts(Y, n_max, alpha_min, validate=False)
    return PersistencyReport(window_lengths=window_lengths,
                             window_bounds=window_bounds,
                             longest_window=n_bar,
                             smallest_bound=alpha_under, n_max=n_max,
                             alpha_min=alpha_min, nonpersistent=nonpersistent)
