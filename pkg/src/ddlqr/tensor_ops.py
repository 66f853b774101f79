"""Vectorization and Kronecker-product utilities.

Conventions used throughout the library:

* ``vec`` stacks matrix columns top to bottom.
* ``vecs`` stacks the upper-triangular part of a symmetric matrix row by row,
  ``[p11, p12, ..., p1n, p22, ..., p2n, ..., pnn]``.
* ``vecv`` maps a vector ``x`` to the quadratic-form regressor such that
  ``vecv(x) @ vecs(P) == x @ P @ x`` for every symmetric ``P``; off-diagonal
  products carry a factor of two.

Every data regression in the library relies on these three maps sharing one
ordering, so do not reorder the triangle traversal.
"""

from __future__ import annotations

import numpy as np

SYM_RTOL = 1e-12


def check_symmetric(M: np.ndarray, rtol: float = SYM_RTOL, name: str = "matrix") -> np.ndarray:
    """Validate symmetry to relative tolerance and return the exactly
    symmetrized copy ``(M + M.T) / 2``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > rtol * scale:
        raise ValueError(f"{name} is not symmetric to relative tolerance {rtol:g}")
    return 0.5 * (M + M.T)


def vec(M: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(M, dtype=float).flatten(order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=float)
    if cols is None:
        cols = rows
    if v.size != rows * cols:
        raise ValueError(f"vector of length {v.size} cannot fill a {rows}x{cols} matrix")
    return v.reshape((rows, cols), order="F")


def vecv(x: np.ndarray) -> np.ndarray:
    """Quadratic regressor of a vector: ``[x1^2, 2 x1 x2, ..., x2^2, ...]``.

    Length ``n (n + 1) / 2``, ordered like the row-major upper triangle so that
    ``vecv(x) @ vecs(P) == x @ P @ x``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for i in range(n):
        out[k] = x[i] * x[i]
        k += 1
        m = n - i - 1
        if m:
            out[k:k + m] = 2.0 * x[i] * x[i + 1:]
            k += m
    return out


def vecs(P: np.ndarray) -> np.ndarray:
    """Stack the upper triangle of a symmetric matrix row by row."""
    P = check_symmetric(P, name="vecs input")
    n = P.shape[0]
    iu, ju = np.triu_indices(n)
    return P[iu, ju]


def mats(s: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the symmetric matrix whose :func:`vecs` image is ``s``."""
    s = np.asarray(s, dtype=float).ravel()
    if s.size != n * (n + 1) // 2:
        raise ValueError(f"vector of length {s.size} cannot fill the upper triangle "
                         f"of an {n}x{n} symmetric matrix")
    M = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    M[iu, ju] = s
    M[ju, iu] = s
    return M


def kron(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Kronecker product (thin wrapper kept for a single import site)."""
    return np.kron(np.asarray(M, dtype=float), np.asarray(N, dtype=float))
