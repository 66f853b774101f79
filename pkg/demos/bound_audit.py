"""Worst-case bound audit on a recorded indirect run.

Every closed-form guarantee the library implements is evaluated along one
seeded run and compared against the measured errors: the interconnection
bound (geometric kernel decay plus an amplified disturbance sup), its
restarted variant anchored mid-run, the fully data-free composed bound built
from the excitation audit, and the estimation-error bound for the identifier
itself. The bounds are loose by construction -- products of norm bounds and
worst-case constants -- but they must dominate at every single episode, and
the audit verifies exactly that.

Run:
    python demos/bound_audit.py
"""

import numpy as np

from ddlqr import (CostSpec, DitherPolicy, IpiConfig, LinearSystem,
                   build_persistency_report, composed_error_bound_series,
                   disturbance_gain_coefficients, interconnection_bound_series,
                   ipi_run, restart_bound_series, trace_estimation_bound_series)

A = np.array([[1.01, 0.01, 0.00],
              [0.01, 1.01, 0.01],
              [0.00, 0.01, 1.01]])
K1 = np.diag([-1.5, -1.0, -0.5])


def main():
    sys = LinearSystem(A, np.eye(3))
    cost = CostSpec(0.001 * np.eye(3), np.eye(3))
    cfg = IpiConfig(tau=16, episodes=120, K1=K1,
                    dither=DitherPolicy("gaussian", np.eye(3), 0),
                    a=0.01, seed=0)
    trace = ipi_run(sys, cost, cfg)

    inputs = trace.bound_inputs()
    report = build_persistency_report(trace.episode_gramians())
    print(f"trace-conditioned constants: contraction {inputs.c_hat:.4f}, "
          f"closed-loop sups {inputs.cl_sup:.4f} / {inputs.cl_sup_est:.4f}")
    rho = disturbance_gain_coefficients(inputs)
    print(f"disturbance-gain coefficients span "
          f"{rho.min():.3e} .. {rho.max():.3e}\n")

    inter = interconnection_bound_series(trace, inputs)
    composed = composed_error_bound_series(trace, report, inputs)
    restart = restart_bound_series(trace, 40, inputs)
    est_bound = trace_estimation_bound_series(trace, report)

    print("  ep    err_P          interconnection  composed        "
          "err_theta      estimation")
    for i in (1, 5, 20, 40, 80, 120):
        print(f"  {i:3d}   {trace.err_P[i-1]:.6e}   {inter[i-1]:.6e}   "
              f"{composed[i-1]:.6e}   {trace.err_theta[i-1]:.6e}   "
              f"{est_bound[i-1]:.6e}")

    err_p = np.asarray(trace.err_P)
    print("\ndomination at all episodes:")
    print(f"  interconnection bound: {bool(np.all(inter >= err_p))}")
    print(f"  composed bound:        {bool(np.all(composed >= err_p))}")
    print(f"  restart bound (anchor 40): "
          f"{bool(np.all(restart >= err_p[39:]))}")
    print(f"  estimation bound:      "
          f"{bool(np.all(est_bound >= np.asarray(trace.err_theta)))}")


if __name__ == "__main__":
    main()
