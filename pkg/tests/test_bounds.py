import math

import numpy as np
import pytest

from ddlqr.bounds import (BoundInputs, equal_budget_episodes, rate_bounds,
                          disturbance_gain,
                          disturbance_gain_coefficients)


def reference_rho(nA, nB, nQ, nR, nRi, nP0, cl_sup, cl_sup_est, n_x):
    """Second, independent transcription of the ten disturbance-gain
    coefficients, kept deliberately separate from the library one so a
    transcription slip in either shows up as a term-by-term mismatch."""
    d3 = {
        3: nRi ** 2 * nP0 ** 2,
        2: 2 * nRi ** 2 * nP0 ** 2 * (nA + nB),
        1: nRi * nP0 + nRi ** 2 * nP0 ** 2 * ((nA + nB) ** 2 + nA * nB),
        0: 2 * nRi * nP0 * nB + nRi ** 2 * nP0 ** 2 * nA * nB * (nA + nB),
    }
    d4 = {
        4: d3[3],
        3: d3[2] + nB * d3[3],
        2: d3[1] + nB * d3[2],
        1: d3[0] + nB * d3[1],
        0: nB * d3[0] + nRi * nA * nB * nP0 + 1,
    }
    gee = nA + nRi * nA * nB ** 2 * nP0
    d5 = {
        9: d4[4] * d4[4],
        8: 2 * d4[4] * d4[3],
        7: 2 * d4[4] * d4[2] + d4[3] * d4[3],
        6: 2 * d4[4] * d4[1] + 2 * d4[3] * d4[2],
        5: 2 * d4[4] * d4[0] + 2 * d4[3] * d4[1] + d4[2] * d4[2],
        4: 2 * d4[3] * d4[0] + 2 * d4[2] * d4[1] + 2 * gee * d4[4],
        3: 2 * d4[2] * d4[0] + d4[1] * d4[1] + 2 * gee * d4[3],
        2: 2 * d4[1] * d4[0] + 2 * gee * d4[2],
        1: d4[0] * d4[0] + 2 * gee * d4[1],
        0: 2 * gee * d4[0],
    }
    aych = 2 * nB * nP0 * nR * nRi * nA
    d6 = {
        7: nR * d3[3] * d3[3],
        6: 2 * nR * d3[3] * d3[2],
        5: 2 * nR * d3[3] * d3[1] + nR * d3[2] * d3[2],
        4: 2 * nR * d3[3] * d3[0] + 2 * nR * d3[2] * d3[1],
        3: nR * d3[1] * d3[1] + aych * d3[3],
        2: 2 * nR * d3[1] * d3[0] + aych * d3[2],
        1: nR * d3[0] * d3[0] + aych * d3[1],
        0: aych * d3[0],
    }
    kap = math.sqrt(n_x) / (1 - cl_sup ** 2)
    kap_m = math.sqrt(n_x) / (1 - cl_sup_est ** 2)
    big_w = nQ + nA ** 2 * nB ** 2 * nR * nRi ** 2 * nP0 ** 2
    rho = {}
    for k in range(10):
        rho[k] = kap_m * kap * big_w * d5[k]
        if k <= 7:
            rho[k] += kap * d6[k]
    return np.array([rho[k] for k in range(10)])


def make_inputs(**over):
    base = dict(norm_a=1.0, norm_b=1.0, norm_q=1.0, norm_r=1.0,
                norm_r_inv=1.0, norm_p0=1.0, cl_sup=0.5, cl_sup_est=0.5,
                n_x=1, a=1.0, delta_theta0_norm=1.0, c_hat=0.5)
    base.update(over)
    return BoundInputs(**base)


def test_rho_against_independent_transcription_unit_inputs():
    inp = make_inputs()
    got = disturbance_gain_coefficients(inp)
    want = reference_rho(1, 1, 1, 1, 1, 1, 0.5, 0.5, 1)
    for k in range(10):
        assert got[k] == pytest.approx(want[k], rel=1e-13), f"rho_{k}"


def test_rho_against_independent_transcription_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vals = rng.uniform(0.1, 3.0, size=6)
        cl_sup, cl_sup_est = rng.uniform(0.0, 0.95, size=2)
        n_x = int(rng.integers(1, 6))
        inp = make_inputs(norm_a=vals[0], norm_b=vals[1], norm_q=vals[2],
                          norm_r=vals[3], norm_r_inv=vals[4], norm_p0=vals[5],
                          cl_sup=cl_sup, cl_sup_est=cl_sup_est, n_x=n_x)
        got = disturbance_gain_coefficients(inp)
        want = reference_rho(vals[0], vals[1], vals[2], vals[3], vals[4],
                             vals[5], cl_sup, cl_sup_est, n_x)
        assert np.allclose(got, want, rtol=1e-12)


def test_rho_degenerate_zero_norms():
    inp = make_inputs(norm_a=0.0, norm_b=0.0)
    rho = disturbance_gain_coefficients(inp)
    assert np.all(np.isfinite(rho))
    assert np.all(rho >= 0.0)


def test_rho_monotone_in_each_norm():
    names = ["norm_a", "norm_b", "norm_q", "norm_r", "norm_r_inv", "norm_p0"]
    base = make_inputs(norm_a=0.7, norm_b=1.3, norm_q=0.2, norm_r=2.0,
                       norm_r_inv=0.9, norm_p0=1.1)
    rho0 = disturbance_gain_coefficients(base)
    for name in names:
        bumped = make_inputs(norm_a=0.7, norm_b=1.3, norm_q=0.2, norm_r=2.0,
                             norm_r_inv=0.9, norm_p0=1.1)
        bumped = BoundInputs(**{**bumped.__dict__, name: getattr(base, name) + 0.25})
        assert np.all(disturbance_gain_coefficients(bumped) >= rho0 - 1e-12)


def test_disturbance_gain_values_and_vectorization():
    inp = make_inputs()
    rho = disturbance_gain_coefficients(inp)
    assert disturbance_gain(inp, 0.0) == pytest.approx(rho[0])
    assert disturbance_gain(inp, 1.0) == pytest.approx(rho.sum())
    arr = disturbance_gain(inp, np.array([0.0, 1.0, 2.0]))
    assert arr.shape == (3,)
    assert arr[0] == pytest.approx(rho[0])
    assert arr[1] == pytest.approx(rho.sum())
    with pytest.raises(ValueError):
        disturbance_gain(inp, -0.5)
    # non-increasing along a non-increasing error-bound sequence
    seq = np.array([3.0, 2.0, 0.5, 0.5, 0.1])
    vals = disturbance_gain(inp, seq)
    assert all(vals[i + 1] <= vals[i] for i in range(len(seq) - 1))


def test_rate_bounds_ordering_and_edges():
    inp = make_inputs()
    # zero disturbance: both bounds coincide
    f_dpi, f_ipi = rate_bounds(inp, 5, 2.0, 0.0)
    assert f_dpi == pytest.approx(f_ipi) == pytest.approx(0.5 ** 5 * 2.0)
    # i = 0: plain anchors
    f_dpi, f_ipi = rate_bounds(inp, 0, 2.0, 1.0)
    assert f_dpi == pytest.approx(2.0)
    assert f_ipi == pytest.approx(2.0 + disturbance_gain(inp, 1.0) / 0.5)
    for i in range(0, 30, 3):
        f_dpi, f_ipi = rate_bounds(inp, i, 1.7, 0.3)
        assert f_dpi <= f_ipi


def test_equal_budget_episode_counts():
    assert equal_budget_episodes(5000, 1, 16) == (5000, 312)
    assert equal_budget_episodes(608, 4, 16) == (152, 38)
    with pytest.raises(ValueError):
        equal_budget_episodes(100, 0, 16)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        make_inputs(cl_sup=1.0)
    with pytest.raises(ValueError):
        make_inputs(c_hat=1.0)
    with pytest.raises(ValueError):
        make_inputs(norm_a=-0.1)
    with pytest.raises(ValueError):
        make_inputs(a=0.0)
    with pytest.raises(ValueError):
        make_inputs(n_x=0)
