import numpy as np
import pytest

from ddlqr import CostSpec, LinearSystem
from ddlqr.persistency import choose_auxiliary_params, outer_stream

# Three-state benchmark plant used throughout: near-unstable tridiagonal A
# with identity input matrix, cheap state weight, unit input weight.
BENCH_A = np.array([[1.01, 0.01, 0.0],
                    [0.01, 1.01, 0.01],
                    [0.0, 0.01, 1.01]])
BENCH_K1 = np.diag([-1.5, -1.0, -0.5])


@pytest.fixture(scope="session")
def bench_sys():
    return LinearSystem(BENCH_A, np.eye(3))


@pytest.fixture(scope="session")
def bench_cost():
    return CostSpec(0.001 * np.eye(3), np.eye(3))


@pytest.fixture(scope="session")
def bench_k1():
    return BENCH_K1.copy()


@pytest.fixture(scope="session")
def scalar_sys():
    return LinearSystem([[0.5]], [[1.0]])


@pytest.fixture(scope="session")
def scalar_cost():
    return CostSpec([[1.0]], [[1.0]])


# positive root of p^2 - 0.25 p - 1 = 0, the fixed-point kernel of the
# scalar problem a=0.5, b=1, q=1, r=1
SCALAR_P_STAR = (0.25 + np.sqrt(0.0625 + 4.0)) / 2.0


def random_psd_stream_case(rng):
    """One random PSD stream plus the auxiliary parameters to audit it with
    (None means auto-choice).

    Four classes: fully excited streams (audited with slack below the tight
    lower bound, the robust way to pick the auxiliary sequence), excitation
    confined to a subspace with a spanning burst that keeps the live
    directions clear of the envelope over the horizon, dying excitation, and
    the zero stream. Streams whose eigenvalue growth straddles the envelope
    rate exactly are excluded: there the non-persistent count genuinely
    oscillates (only its sup feeds the error bounds).
    """
    kind = int(rng.integers(0, 4))
    if kind == 0:
        n = int(rng.integers(1, 5))
        T = int(rng.integers(6, 30))
        V = rng.normal(size=(T, n)) + 0.5
        Y = outer_stream(V)
        n_max, alpha_under = choose_auxiliary_params(Y)
        return Y, n_max, alpha_under / 2
    if kind == 1:
        n = int(rng.integers(2, 5))
        T = int(rng.integers(6, 30))
        keep = n - 1
        V = np.zeros((T, keep))
        V[:keep] = 4.0 * np.eye(keep)
        V[keep:] = 4.0 * rng.normal(size=(T - keep, keep))
        Y = np.zeros((T, n, n))
        Y[:, :keep, :keep] = outer_stream(V)
        return Y, None, None
    if kind == 2:
        n = int(rng.integers(1, 5))
        T = int(rng.integers(6, 30))
        V = rng.normal(size=(T, n)) * (0.6 ** np.arange(T))[:, None]
        return outer_stream(V), None, None
    n = int(rng.integers(1, 5))
    T = int(rng.integers(6, 30))
    return np.zeros((T, n, n)), None, None
