"""Batch front-end: solve a problem definition file, write the sampled
solution as CSV and the per-window certificate report, optionally
cross-checking against an applicable reference solver.

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure
(deviation conditions, missing data coverage, bad majorant), 3 convergence
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    ConfigSemantic,
    ProblemConfig,
    build_problem,
    load_config,
)
from .expr import (
    ExprError,
    NotPolynomial,
    affine_coefficients,
    eval_expr,
    to_polynomial,
)
from .oracle import method_of_steps, pantograph_series, rk4_reference
from .picard import (
    InvalidMajorant,
    NoConvergence,
    Solution,
    TailGap,
    ZeroProgress,
    residual,
    residual_advanced,
    solve,
    solve_advanced,
)
from .problem import AdvanceViolated, RetardationViolated

__all__ = ["main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # unknown flags and friends -> exit 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="fdepicard",
        description="Solve systems of functional differential equations with "
                    "retarded or advanced arguments by certified windowed "
                    "fixed-point iteration.",
    )
    parser.add_argument("--version", action="version",
                        version=f"fdepicard {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sp = sub.add_parser("solve", help="solve a problem definition file")
    sp.add_argument("config", help="path to the problem definition")
    sp.add_argument("--verify", choices=("steps", "pantograph", "rk4"),
                    help="cross-check against a reference solver")
    sp.add_argument("--report", metavar="PATH",
                    help="report file path (overrides the config)")
    sp.add_argument("--sample-step", type=float, metavar="DT",
                    help="CSV sampling step (overrides the config)")
    sp.add_argument("--quiet", action="store_true",
                    help="suppress the success summary")
    return parser


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _sample_times(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(np.floor((hi - lo) / step + 1e-9))
    times = lo + step * np.arange(count + 1)
    if times[-1] < hi - 1e-9 * max(1.0, abs(hi)):
        times = np.append(times, hi)
    else:
        times[-1] = min(times[-1], hi)
    return times


def _write_csv(path: Path, times: np.ndarray, values: np.ndarray) -> None:
    n = values.shape[0]
    lines = ["t," + ",".join(f"phi_{k + 1}" for k in range(n))]
    for i, t in enumerate(times):
        lines.append(",".join([_fmt(t)] + [_fmt(values[k, i])
                                           for k in range(n)]))
    path.write_text("\n".join(lines) + "\n")


def _report_text(cfg: ProblemConfig, sol: Solution, residuals: np.ndarray,
                 verify: Optional[tuple[str, float, bool]]) -> str:
    lines = [
        "status: ok",
        f"direction: {cfg.direction}",
        f"components: {cfg.n}",
        f"deviations_per_component: {cfg.N}",
        f"start: {_fmt(cfg.start)}",
        f"horizon: {_fmt(cfg.horizon)}",
        f"theta: {_fmt(cfg.solver.theta)}",
        f"tol: {_fmt(cfg.solver.tol)}",
        f"grid_points: {cfg.solver.grid.points_per_window}",
        f"windows: {sol.report.total_windows}",
        f"total_iterations: {sol.report.total_iterations}",
    ]
    for k, r in enumerate(residuals, start=1):
        lines.append(f"residual_{k}: {_fmt(r)}")
    for i, w in enumerate(sol.report.windows, start=1):
        p = f"window_{i}"
        lines += [
            f"{p}.t_start: {_fmt(w.window.t_start)}",
            f"{p}.t_end: {_fmt(w.window.t_end)}",
            f"{p}.q: {_fmt(w.window.q)}",
            f"{p}.iterations: {w.iterations}",
            f"{p}.final_residual: {_fmt(w.final_residual)}",
            f"{p}.aposteriori_bound: {_fmt(w.aposteriori_bound)}",
            f"{p}.apriori_bound: {_fmt(w.apriori_bound)}",
            f"{p}.quad_bound: {_fmt(w.quad_bound)}",
            f"{p}.error_bound: {_fmt(w.error_bound)}",
        ]
    if verify is not None:
        method, deviation, within = verify
        lines += [
            f"verify_method: {method}",
            f"verify_max_deviation: {_fmt(deviation)}",
            f"verify_within_bound: {'yes' if within else 'no'}",
        ]
    return "\n".join(lines) + "\n"


def _deviation_within_bounds(sol: Solution, dev_per_point: np.ndarray) -> bool:
    grid = sol.grid
    for w in sol.report.windows:
        scale = max(1.0, abs(w.window.t_start), abs(w.window.t_end))
        mask = (grid >= w.window.t_start - 1e-12 * scale) \
            & (grid <= w.window.t_end + 1e-12 * scale)
        if mask.any() and float(np.max(dev_per_point[mask])) > w.error_bound:
            return False
    return True


def _linear_polynomial_parts(cfg: ProblemConfig):
    """Coefficient/forcing/boundary polynomials of a linear polynomial
    problem, or ConfigSemantic when the config is not of that shape."""
    def bail(msg):
        raise ConfigSemantic(cfg.source, None, f"--verify steps: {msg}")

    coeffs = np.zeros((cfg.n, cfg.n, cfg.N), dtype=object)
    forcing = []
    for k, eq in enumerate(cfg.equations):
        d = affine_coefficients(eq)
        if d is None:
            bail(f"equation[{k + 1}] is not affine in its placeholders")
        cmap, const = d
        try:
            for (m, j), c in cmap.items():
                coeffs[k, m - 1, j - 1] = to_polynomial(c)
            forcing.append(to_polynomial(const) if const is not None else 0.0)
        except NotPolynomial as exc:
            bail(f"equation[{k + 1}] has a non-polynomial part: {exc}")
    for idx in np.ndindex(coeffs.shape):
        if isinstance(coeffs[idx], int):
            coeffs[idx] = 0.0

    lags = np.empty((cfg.n, cfg.N))
    for m, row in enumerate(cfg.deviations):
        for j, dev in enumerate(row):
            try:
                poly = to_polynomial(dev)
            except NotPolynomial as exc:
                bail(f"deviation [{m + 1}][{j + 1}] is not polynomial: {exc}")
            c = np.zeros(2)
            c[:poly.coef.size] = poly.coef[:2]
            if poly.degree() > 1 or abs(c[1] - 1.0) > 1e-12 or c[0] >= 0:
                bail(f"deviation [{m + 1}][{j + 1}] is not a constant "
                     f"positive lag of the form t - c")
            lags[m, j] = -c[0]

    boundary = []
    for k, b in enumerate(cfg.boundary):
        try:
            boundary.append(to_polynomial(b))
        except NotPolynomial as exc:
            bail(f"history[{k + 1}] is not polynomial: {exc}")
    return lags, coeffs, forcing, boundary


def _verify_steps(cfg: ProblemConfig, sol: Solution) -> np.ndarray:
    if cfg.direction != "retarded":
        raise ConfigSemantic(cfg.source, None,
                             "--verify steps applies to retarded problems")
    lags, coeffs, forcing, boundary = _linear_polynomial_parts(cfg)
    oracle = method_of_steps(lags, coeffs, forcing, boundary,
                             cfg.start, cfg.horizon)
    grid = sol.grid
    dev = np.zeros(grid.size)
    for k in range(cfg.n):
        dev = np.maximum(dev, np.abs(sol.trajectory.values()[k]
                                     - oracle.eval_component(k, grid)))
    return dev


def _verify_pantograph(cfg: ProblemConfig, sol: Solution) -> np.ndarray:
    def bail(msg):
        raise ConfigSemantic(cfg.source, None, f"--verify pantograph: {msg}")

    if cfg.direction != "retarded" or cfg.n != 1 or cfg.N != 1:
        bail("needs a scalar retarded problem with one deviation")
    if abs(cfg.start) > 1e-12:
        bail("needs t0 = 0")
    d = affine_coefficients(cfg.equations[0])
    if d is None:
        bail("equation[1] is not affine")
    cmap, const = d
    if set(cmap) != {(1, 1)}:
        bail("equation[1] must use exactly u[1][1]")
    try:
        a_poly = to_polynomial(cmap[(1, 1)])
        dev_poly = to_polynomial(cfg.deviations[0][0])
    except NotPolynomial as exc:
        bail(str(exc))
    if a_poly.degree() > 0:
        bail("the coefficient of u[1][1] must be constant")
    if const is not None:
        forcing = to_polynomial(const)
        if np.max(np.abs(forcing.coef)) > 1e-14:
            bail("a forcing term is not covered by the series solution")
    c = np.zeros(2)
    c[:dev_poly.coef.size] = dev_poly.coef[:2]
    if dev_poly.degree() > 1 or abs(c[0]) > 1e-12 or not 0.0 < c[1] < 1.0:
        bail("the deviation must be q*t with 0 < q < 1")
    a = float(a_poly.coef[0])
    q = float(c[1])
    scale = eval_expr(cfg.boundary[0], 0.0)
    grid = sol.grid
    ref = np.array([scale * pantograph_series(a, q, 40, float(t))[0]
                    for t in grid])
    return np.abs(sol.trajectory.values()[0] - ref)


def _verify_rk4(cfg: ProblemConfig, sol: Solution) -> np.ndarray:
    def bail(msg):
        raise ConfigSemantic(cfg.source, None, f"--verify rk4: {msg}")

    if cfg.direction != "retarded":
        bail("applies to retarded problems")
    grid = sol.grid
    for m, row in enumerate(cfg.deviations):
        for j, dev in enumerate(row):
            gaps = [abs(eval_expr(dev, float(t)) - float(t)) for t in grid]
            if max(gaps) > 1e-12:
                bail(f"deviation [{m + 1}][{j + 1}] is not the identity; "
                     f"the problem is not an ODE")

    equations = cfg.equations

    def f(t, y):
        u = np.repeat(y[:, None], cfg.N, axis=1)
        return np.array([eval_expr(eq, t, u) for eq in equations])

    # march through the solution grid cell by cell so the comparison happens
    # exactly at grid points, where the certificate applies
    y = np.array([eval_expr(b, cfg.start) for b in cfg.boundary])
    dev = np.zeros(grid.size)
    vals = sol.trajectory.values()
    dev[0] = float(np.max(np.abs(vals[:, 0] - y)))
    for i in range(grid.size - 1):
        a, b = float(grid[i]), float(grid[i + 1])
        substep = (b - a) / max(1, int(np.ceil((b - a) / 1e-3)))
        _, ys = rk4_reference(f, y, substep, a, b)
        y = ys[-1]
        dev[i + 1] = float(np.max(np.abs(vals[:, i + 1] - y)))
    return dev


_VERIFIERS = {
    "steps": _verify_steps,
    "pantograph": _verify_pantograph,
    "rk4": _verify_rk4,
}


def run(cfg: ProblemConfig, verify: Optional[str] = None,
        report_path: Optional[str] = None,
        sample_step: Optional[float] = None,
        quiet: bool = False) -> int:
    """Solve a loaded config and write its CSV and report files."""
    problem = build_problem(cfg)
    if cfg.direction == "retarded":
        sol = solve(problem, cfg.horizon, cfg.solver)
        residuals = residual(problem, sol)
        lo, hi = cfg.start, cfg.horizon
    else:
        sol = solve_advanced(problem, cfg.horizon, cfg.solver)
        residuals = residual_advanced(problem, sol)
        lo, hi = cfg.horizon, cfg.start

    verify_info = None
    if verify is not None:
        dev = _VERIFIERS[verify](cfg, sol)
        verify_info = (verify, float(np.max(dev)),
                       _deviation_within_bounds(sol, dev))

    step = sample_step if sample_step is not None else cfg.sample_step
    if step is None:
        step = (hi - lo) / 100.0
    times = _sample_times(lo, hi, step)
    values = np.vstack([np.atleast_1d(sol.eval_component(k, times))
                        for k in range(cfg.n)])

    out_path = Path(cfg.output_path) if cfg.output_path \
        else cfg.source.with_name(cfg.source.stem + "_solution.csv")
    rep = report_path or cfg.report_path
    rep_path = Path(rep) if rep \
        else cfg.source.with_name(cfg.source.stem + "_report.txt")
    _write_csv(out_path, times, values)
    rep_path.write_text(_report_text(cfg, sol, residuals, verify_info))

    if not quiet:
        print(f"solved {cfg.direction} problem: "
              f"{sol.report.total_windows} window(s), "
              f"{sol.report.total_iterations} iteration(s)")
        print(f"max residual: {np.max(residuals):.3e}")
        if verify_info is not None:
            method, deviation, within = verify_info
            print(f"verify[{method}]: max deviation {deviation:.3e} "
                  f"({'within' if within else 'EXCEEDS'} certified bounds)")
        print(f"wrote {out_path} ({times.size} rows) and {rep_path}")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return run(cfg, verify=args.verify, report_path=args.report,
                   sample_step=args.sample_step, quiet=args.quiet)
    except (ConfigError, ExprError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RetardationViolated, AdvanceViolated, TailGap,
            InvalidMajorant) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoConvergence, ZeroProgress) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
