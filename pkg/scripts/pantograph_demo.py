#!/usr/bin/env python3
"""Grid-refinement study on the proportional-delay equation
phi'(t) = phi(t/2), phi(0) = 1, against its power-series solution.

The endpoint error should shrink by about 4x per grid doubling (second-order
quadrature and interpolation)."""

from fdepicard import GridSpec, RetardedIVP, SolverConfig, solve
from fdepicard.oracle import pantograph_series


def main():
    problem = RetardedIVP(
        n=1, N=1,
        rhs=[lambda t, u: u[0][0]],
        delays=[[lambda t: 0.5 * t]],
        lipschitz=[lambda t: 1.0],
        history=[lambda t: 1.0],
        t0=0.0,
    )
    ref, truncation = pantograph_series(1.0, 0.5, 40, 1.0)
    print(f"series value at t=1: {ref:.15f} (truncation < {truncation:.1e})")
    print(f"{'grid':>6} {'phi(1)':>20} {'error':>12} {'ratio':>7}")
    prev = None
    for points in (32, 64, 128, 256, 512, 1024):
        cfg = SolverConfig(theta=0.5, tol=1e-12, grid=GridSpec(points))
        sol = solve(problem, 1.0, cfg)
        err = abs(sol.eval_component(0, 1.0) - ref)
        ratio = f"{prev / err:>7.2f}" if prev and err > 0 else f"{'-':>7}"
        print(f"{points:>6} {sol.eval_component(0, 1.0):>20.15f} "
              f"{err:>12.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
