import csv
import math

import numpy as np
import pytest

from ddlqr.persistency import (build_persistency_report, check_psd_stream,
                               choose_auxiliary_params, episode_sums,
                               is_globally_persistent, is_locally_persistent,
                               nonpersistent_counts, local_persistency_alpha,
                               min_persistency_window, min_window_sequence,
                               outer_stream)

PERIODIC = np.array([[[v]] for v in [1.0, 0.0, 0.0, 1.0] * 6])


def scalar_stream(values):
    return np.array([[[float(v)]] for v in values])


def basis_stream(n, length, scale=1.0):
    E = np.eye(n)
    return np.array([scale * np.outer(E[k % n], E[k % n]) for k in range(length)])


def test_global_persistency_examples():
    const = np.array([np.eye(1)] * 8)
    assert is_globally_persistent(const, 1, 1.0)
    assert not is_globally_persistent(PERIODIC, 2, 1e-6)
    assert not is_globally_persistent(np.zeros((10, 2, 2)), 3, 1e-9)


def test_local_persistency_examples():
    # the periodic stream is locally persistent at (N=2, M=2) but not
    # globally persistent with N=2
    assert is_locally_persistent(PERIODIC, 2, 2, 1.0)
    assert not is_globally_persistent(PERIODIC, 2, 1.0)
    assert not is_locally_persistent(np.zeros((10, 1, 1)), 2, 2, 0.1)


def test_global_implies_local_with_m1():
    rng = np.random.default_rng(0)
    for _ in range(20):
        V = rng.normal(size=(15, 2)) + 0.5
        Y = outer_stream(V)
        N = int(rng.integers(2, 5))
        ok, alpha = local_persistency_alpha(Y, N, 1)
        if not ok:
            continue
        assert is_globally_persistent(Y, N, alpha)
        assert is_locally_persistent(Y, N, 1, alpha)


def test_min_window_examples():
    Yb = basis_stream(3, 12)
    assert min_persistency_window(Yb, 0) == (3, pytest.approx(1.0))
    assert min_persistency_window(Yb, 1) == (3, pytest.approx(1.0))
    assert min_persistency_window(np.zeros((6, 2, 2)), 0) == (0, math.inf)
    const = np.array([np.eye(2)] * 5)
    assert min_persistency_window(const, 2) == (1, pytest.approx(1.0))


def test_npw_sequence_truncation_convention():
    # near the end of the data no full-rank window fits: convention (0, inf)
    Yb = basis_stream(2, 5)
    window_lengths, window_bounds = min_window_sequence(Yb)
    assert window_lengths == [2, 2, 2, 2, 0]
    assert window_bounds[-1] == math.inf


def test_choose_auxiliary_params():
    assert choose_auxiliary_params(np.array([np.eye(2)] * 6)) == (1, pytest.approx(1.0))
    assert choose_auxiliary_params(basis_stream(3, 12)) == (3, pytest.approx(1.0))
    assert choose_auxiliary_params(np.zeros((6, 4, 4))) == (4, 1.0)


def test_nonpersistent_matched_stream_is_zero():
    Yb = basis_stream(3, 15)
    assert nonpersistent_counts(Yb, 3, 1.0) == [0] * 15


def test_nonpersistent_zero_stream_saturates():
    Z = np.zeros((9, 3, 3))
    for n_max in (2, 4):
        jn = nonpersistent_counts(Z, n_max, 1.0)
        for i, j in enumerate(jn, start=1):
            assert j == (3 if i >= n_max else 0)


def test_nonpersistent_subspace_deficit():
    # stream exciting only a k-dim subspace of R^n: the deficit eventually
    # counts exactly n - k eigenvalues
    n, k = 4, 2
    rng = np.random.default_rng(1)
    Y = np.zeros((24, n, n))
    for t in range(24):
        v = np.zeros(n)
        v[:k] = rng.normal(size=k) + 1.0
        Y[t] = np.outer(v, v)
    report = build_persistency_report(Y)
    assert report.longest_window == 0          # never full rank from any index
    assert report.n_max == n and report.alpha_min == 1.0
    assert report.nonpersistent[-1] == n - k
    assert report.max_nonpersistent == n - k


def test_nonpersistent_non_decreasing_random_streams():
    from conftest import random_psd_stream_case
    for seed in range(80):
        rng = np.random.default_rng(seed)
        Y, n_max, alpha_min = random_psd_stream_case(rng)
        report = build_persistency_report(Y, n_max, alpha_min)
        jn = report.nonpersistent
        assert all(jn[i] <= jn[i + 1] for i in range(len(jn) - 1))


def test_nonpersistent_parameter_validation():
    Yb = basis_stream(3, 12)
    with pytest.raises(ValueError):
        nonpersistent_counts(Yb, 2, 1.0)       # n_max below the largest window
    with pytest.raises(ValueError):
        nonpersistent_counts(Yb, 3, 2.0)       # alpha above the smallest bound
    with pytest.raises(ValueError):
        nonpersistent_counts(Yb, 0, 1.0)
    with pytest.raises(ValueError):
        nonpersistent_counts(Yb, 3, 0.0)


def test_check_psd_stream():
    with pytest.raises(ValueError):
        check_psd_stream(np.array([[[0.0, 1.0], [-1.0, 0.0]]]))
    with pytest.raises(ValueError):
        check_psd_stream(np.array([-np.eye(2)]))
    check_psd_stream(np.array([np.eye(2)] * 3))


def test_episode_sums_and_outer_stream():
    rng = np.random.default_rng(3)
    V = rng.normal(size=(10, 3))
    Y = outer_stream(V)
    assert np.allclose(Y[4], np.outer(V[4], V[4]))
    D = episode_sums(V, 5)
    assert D.shape == (2, 3, 3)
    assert np.allclose(D[0], sum(np.outer(v, v) for v in V[:5]))
    with pytest.raises(ValueError):
        episode_sums(V[:3], 5)


def test_report_csv_export(tmp_path):
    report = build_persistency_report(basis_stream(2, 6))
    path = tmp_path / "report.csv"
    report.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "window_length", "window_bound", "nonpersistent"]
    assert len(rows) == 7
    assert report.locally_persistent
