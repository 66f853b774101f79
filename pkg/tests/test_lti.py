import csv

import numpy as np
import pytest

from ddlqr import DitherPolicy, LinearSystem, rollout, step
from ddlqr.exceptions import NotStabilizable


def test_step_identity_dynamics():
    sys = LinearSystem(np.eye(2), np.zeros((2, 1)))
    assert np.array_equal(step(sys, [1.0, 2.0], [42.0]), [1.0, 2.0])


def test_step_pure_input():
    sys = LinearSystem(np.zeros((1, 1)), np.eye(1))
    assert np.array_equal(step(sys, [7.0], [3.0]), [3.0])


def test_step_benchmark_first_column(bench_sys):
    x_next = step(bench_sys, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert np.allclose(x_next, [1.01, 0.01, 0.0], atol=0)


def test_step_dimension_mismatch(bench_sys):
    with pytest.raises(ValueError):
        step(bench_sys, [1.0, 0.0], [0.0, 0.0, 0.0])


def test_rollout_zero_everything():
    sys = LinearSystem(np.zeros((2, 2)), np.eye(2))
    traj = rollout(sys, np.zeros((2, 2)), DitherPolicy("zero"), [3.0, -1.0], 5)
    assert np.array_equal(traj.states[0], [3.0, -1.0])
    assert not traj.states[1:].any()
    assert not traj.inputs.any()


def test_rollout_replay_bit_for_bit(bench_sys, bench_k1):
    dither = DitherPolicy("gaussian", np.eye(3), seed=5)
    traj = rollout(bench_sys, bench_k1, dither, np.ones(3), 40)
    x = traj.states[0]
    for j in range(len(traj)):
        x = step(bench_sys, x, traj.inputs[j])
        assert np.array_equal(x, traj.states[j + 1])


def test_rollout_deterministic_given_seed(bench_sys, bench_k1):
    dither = DitherPolicy("gaussian", np.eye(3), seed=11)
    t1 = rollout(bench_sys, bench_k1, dither, np.ones(3), 25)
    t2 = rollout(bench_sys, bench_k1, dither, np.ones(3), 25)
    assert np.array_equal(t1.states, t2.states)
    assert np.array_equal(t1.inputs, t2.inputs)


def test_paired_dither_antisymmetry(bench_sys, bench_k1):
    dither = DitherPolicy("paired", np.eye(3), seed=2)
    traj = rollout(bench_sys, bench_k1, dither, np.ones(3), 20)
    for k in range(10):
        assert np.array_equal(traj.dithers[2 * k + 1], -traj.dithers[2 * k])
    # u - Kx recovers the dither up to roundoff
    eta = traj.inputs - traj.states[:-1] @ bench_k1.T
    assert np.allclose(eta, traj.dithers, atol=1e-12)


def test_paired_dither_average_system(bench_sys, bench_k1):
    # (x_{t+2} + x_{t+1}) = (A + BK)(x_{t+1} + x_t) at odd t: substituting the
    # two transitions cancels the dither exactly
    dither = DitherPolicy("paired", 2.0 * np.eye(3), seed=9)
    traj = rollout(bench_sys, bench_k1, dither, np.ones(3), 30)
    A_cl = bench_sys.A + bench_sys.B @ bench_k1
    X = traj.states
    for k in range(15):
        lhs = X[2 * k + 1] + X[2 * k + 2]
        rhs = A_cl @ (X[2 * k] + X[2 * k + 1])
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_trajectory_regressors_layout(bench_sys, bench_k1):
    traj = rollout(bench_sys, bench_k1, DitherPolicy("zero"), np.ones(3), 4)
    d = traj.regressors
    assert d.shape == (4, 6)
    assert np.array_equal(d[:, :3], traj.states[:-1])
    assert np.array_equal(d[:, 3:], traj.inputs)


def test_trajectory_csv(tmp_path, bench_sys, bench_k1):
    traj = rollout(bench_sys, bench_k1, DitherPolicy("zero"), np.ones(3), 3)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "x3", "u1", "u2", "u3"]
    assert len(rows) == 4
    assert all(len(r) == 7 and all(v != "" for v in r) for r in rows[1:])
    assert float(rows[1][1]) == 1.0


def test_stabilizability_pbh():
    ok = LinearSystem(np.diag([2.0, 0.5]), np.array([[1.0], [0.0]]))
    assert ok.is_stabilizable()
    bad = LinearSystem(np.diag([2.0, 0.5]), np.array([[0.0], [1.0]]))
    assert not bad.is_stabilizable()
    with pytest.raises(NotStabilizable):
        bad.require_stabilizable()
    # full-row-rank B is always stabilizable
    assert LinearSystem(np.diag([5.0, 5.0]), np.eye(2)).is_stabilizable()


def test_dither_validation():
    with pytest.raises(ValueError):
        DitherPolicy("gaussian")        # needs covariance
    with pytest.raises(ValueError):
        DitherPolicy("banded", np.eye(2))
    assert DitherPolicy("zero").is_zero()
    assert DitherPolicy("gaussian", np.zeros((2, 2))).is_zero()
