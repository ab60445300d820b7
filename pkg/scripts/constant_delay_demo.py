#!/usr/bin/env python3
"""Solve phi'(t) = phi(t - 1) with unit history and compare against the
exact piecewise-polynomial reference, window by window."""

import numpy as np

from fdepicard import RetardedIVP, SolverConfig, residual, solve
from fdepicard.oracle import method_of_steps

HORIZON = 4.0


def main():
    problem = RetardedIVP(
        n=1, N=1,
        rhs=[lambda t, u: u[0][0]],
        delays=[[lambda t: t - 1.0]],
        lipschitz=[lambda t: 1.0],
        history=[lambda t: 1.0],
        t0=0.0,
    )
    cfg = SolverConfig(theta=0.5, tol=1e-8)
    sol = solve(problem, HORIZON, cfg)
    reference = method_of_steps([[1.0]], [[[1.0]]], [0.0], [1.0], 0.0, HORIZON)

    print(f"windows: {sol.report.total_windows}, "
          f"iterations: {sol.report.total_iterations}, "
          f"residual: {residual(problem, sol)[0]:.3e}")
    print(f"{'window':>6} {'q':>10} {'iters':>5} {'error bound':>12} "
          f"{'true error':>12}")
    err = np.abs(sol.trajectory.values()[0]
                 - reference.eval_component(0, sol.grid))
    for i, w in enumerate(sol.report.windows, start=1):
        mask = (sol.grid >= w.window.t_start) & (sol.grid <= w.window.t_end)
        print(f"{i:>6} {w.window.q:>10.6f} {w.iterations:>5} "
              f"{w.error_bound:>12.3e} {np.max(err[mask]):>12.3e}")

    print(f"\n{'t':>5} {'solver':>20} {'reference':>20}")
    for t in np.arange(0.0, HORIZON + 0.25, 0.5):
        print(f"{t:>5.2f} {sol.eval_component(0, t):>20.12f} "
              f"{reference.eval_component(0, t):>20.12f}")


if __name__ == "__main__":
    main()
