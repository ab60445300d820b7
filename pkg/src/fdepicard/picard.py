"""Windowed fixed-point solver for deviated-argument systems.

The solve span is cut into windows sized so that the certified contraction
factor

    q = N * sum_k integral of f_k over the window

stays at or below a target theta < 1. On each window the integral operator

    (I_k x)(t) = psi_k(t1) + integral from t1 to t of
                 F_k(tau, x_1(a_11(tau)), ..., x_n(a_nN(tau))) d tau

maps the space of trajectories with prescribed tail into itself and contracts
the sup-sum metric by q, so successive application converges to the unique
fixed point, which solves the system on the window. Chaining windows, each
one's prescribed tail being the history plus everything already solved,
continues the solution to any finite horizon; advanced problems run the same
machinery leftward from terminal data.

Stopping is by the successive-distance test: once
``rho(x_{m+1}, x_m) <= tol * (1 - q) / q`` the fixed-point gap is certified
at most ``q/(1-q) * rho(x_{m+1}, x_m) <= tol``. Each window's report also
carries an error bound against the true (continuous) solution, which adds an
estimated quadrature/interpolation defect and the propagated bound of the
windows before it; see ``_certified_error_bound``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .funcspace import (
    GridSpec,
    NoTailDefined,
    PiecewiseFunction,
    Trajectory,
    _cumtrapz,
)
from .problem import AdvancedTVP, RetardedIVP, validate_advance, \
    validate_retardation

__all__ = [
    "PicardError",
    "TailGap",
    "ZeroProgress",
    "NoConvergence",
    "InvalidMajorant",
    "Window",
    "WindowReport",
    "SolveReport",
    "SolverConfig",
    "Solution",
    "choose_window",
    "choose_window_advanced",
    "apply_operator",
    "apply_operator_advanced",
    "solve_window",
    "solve",
    "solve_advanced",
    "extend",
    "extend_advanced",
    "residual",
    "residual_advanced",
]

# relative tolerance for the bisection on window length
_BISECT_REL = 1e-10


class PicardError(Exception):
    """Base error for the solver core."""


class TailGap(PicardError):
    """A deviated evaluation fell outside the data the trajectory carries."""


class ZeroProgress(PicardError):
    """Not even a minimal window satisfies the contraction target."""


class NoConvergence(PicardError):
    """Iteration exceeded the contraction-implied budget; the supplied
    majorants most likely underestimate the right-hand side."""


class InvalidMajorant(PicardError):
    """A sensitivity majorant evaluated negative."""


@dataclass(frozen=True)
class Window:
    """A sub-interval with its certified contraction factor."""

    t_start: float
    t_end: float
    q: float

    def __post_init__(self) -> None:
        if not self.t_end > self.t_start:
            raise ValueError(f"degenerate window [{self.t_start}, {self.t_end}]")
        if self.q < 0 or self.q >= 1:
            raise ValueError(f"contraction factor q={self.q} outside [0, 1)")

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class WindowReport:
    """Per-window diagnostics and certificates.

    ``final_residual`` is the last successive distance rho(x_m, x_{m-1});
    ``aposteriori_bound = q/(1-q) * final_residual`` bounds the gap to the
    window's discrete fixed point and is at most the requested tolerance;
    ``apriori_bound = q^m/(1-q) * rho(x_1, x_0)`` is the classical iteration
    bound; ``quad_bound`` estimates the quadrature plus interpolation defect;
    ``error_bound`` is the full certificate against the true solution,
    including everything propagated from earlier windows.
    """

    window: Window
    iterations: int
    first_step: float
    final_residual: float
    aposteriori_bound: float
    apriori_bound: float
    quad_bound: float
    error_bound: float


@dataclass
class SolveReport:
    windows: list[WindowReport] = field(default_factory=list)

    @property
    def total_windows(self) -> int:
        return len(self.windows)

    @property
    def total_iterations(self) -> int:
        return sum(w.iterations for w in self.windows)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`solve` and :func:`solve_advanced`.

    theta is the target contraction factor per window (the theory only needs
    q < 1; 0.5 trades window count against iterations and leaves quadrature
    slack). ``max_window`` caps window length regardless of how small the
    majorants are; None means windows may span the whole remaining horizon.
    ``init`` picks the first iterate: "constant" extends the junction value,
    "linear" extrapolates the prescribed data's slope at the junction.
    """

    theta: float = 0.5
    tol: float = 1e-8
    grid: GridSpec = GridSpec()
    max_window: Optional[float] = None
    init: str = "constant"
    max_iter_margin: int = 20
    quad_safety: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie strictly between 0 and 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_window is not None and self.max_window <= 0:
            raise ValueError("max_window must be positive")
        if self.init not in ("constant", "linear"):
            raise ValueError("init must be 'constant' or 'linear'")


@dataclass
class Solution:
    """Solved trajectory over the full span plus the certificate report.

    The trajectory's tail reproduces the prescribed history (retarded) or
    terminal data (advanced), so evaluation works on the whole real line the
    data covers.
    """

    trajectory: Trajectory
    report: SolveReport

    @property
    def grid(self) -> np.ndarray:
        return self.trajectory.grid

    def eval(self, t) -> np.ndarray:
        return self.trajectory.eval(t)

    def eval_component(self, k: int, t):
        return self.trajectory.components[k].eval(t)


# --------------------------------------------------------------------------
# window sizing


def _majorant_samples(fns, ts) -> np.ndarray:
    rows = np.empty((len(fns), ts.size))
    for k, f in enumerate(fns):
        rows[k] = [float(f(float(t))) for t in ts]
    if rows.min() < -1e-12:
        k, i = np.unravel_index(np.argmin(rows), rows.shape)
        raise InvalidMajorant(
            f"majorant for component {k + 1} is negative "
            f"({rows[k, i]:.3e}) at t={ts[i]:.6g}"
        )
    return np.maximum(rows, 0.0)


def _window_by_bisection(mass_of: Callable[[float], float], t_anchor: float,
                         theta: float, max_len: float,
                         leftward: bool) -> Window:
    """Largest window length whose contraction mass stays at or below theta.

    ``mass_of(length)`` must be nondecreasing (majorants are nonnegative), so
    plain bisection on the length is exact up to the tolerance.
    """
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    q_full = mass_of(max_len)
    if q_full <= theta:
        lo, q_lo = max_len, q_full
    else:
        lo, q_lo = 0.0, 0.0
        hi = max_len
        tol_len = _BISECT_REL * max_len
        while hi - lo > tol_len:
            mid = 0.5 * (lo + hi)
            q_mid = mass_of(mid)
            if q_mid <= theta:
                lo, q_lo = mid, q_mid
            else:
                hi = mid
        if lo <= tol_len:
            side = "ending at" if leftward else "starting at"
            raise ZeroProgress(
                f"no window {side} t={t_anchor:.6g} satisfies the "
                f"contraction target theta={theta}: even length "
                f"{tol_len:.3e} gives q={mass_of(max(lo, tol_len)):.3e}. "
                f"The majorants are extremely large there; use a finer grid "
                f"or check them."
            )
    if leftward:
        return Window(t_anchor - lo, t_anchor, q_lo)
    return Window(t_anchor, t_anchor + lo, q_lo)


def choose_window(p: RetardedIVP, t_start: float, theta: float,
                  max_len: float, grid: GridSpec = GridSpec()) -> Window:
    """Largest window [t_start, t_end] with certified q <= theta.

    q is N times the summed trapezoid integrals of the majorants over the
    candidate window, evaluated on the same per-window grid the operator will
    use, so the certificate matches the arithmetic actually performed.
    """
    def mass_of(length: float) -> float:
        ts = grid.make(t_start, t_start + length)
        rows = _majorant_samples(p.lipschitz, ts)
        h = np.diff(ts)
        return p.N * float(np.sum(0.5 * (rows[:, 1:] + rows[:, :-1]) * h))

    return _window_by_bisection(mass_of, t_start, theta, max_len,
                                leftward=False)


def choose_window_advanced(p: AdvancedTVP, t_end: float, theta: float,
                           max_len: float,
                           grid: GridSpec = GridSpec()) -> Window:
    """Mirror of :func:`choose_window`: window [t_start, t_end] growing left."""
    def mass_of(length: float) -> float:
        ts = grid.make(t_end - length, t_end)
        rows = _majorant_samples(p.lipschitz, ts)
        h = np.diff(ts)
        return p.N * float(np.sum(0.5 * (rows[:, 1:] + rows[:, :-1]) * h))

    return _window_by_bisection(mass_of, t_end, theta, max_len, leftward=True)


# --------------------------------------------------------------------------
# the integral operator on one window


class _DelayedEval:
    """Precomputed deviated-argument plumbing for one window.

    Deviations depend on t only, so the deviated times, the split between
    in-window and tail queries, and all tail values are fixed across
    iterations; only the in-window interpolation is redone per iterate.
    """

    def __init__(self, deviations, n: int, N: int, grid: np.ndarray,
                 tails, leftward: bool):
        self.n, self.N = n, N
        self.grid = grid
        G = grid.size
        t1, t2 = float(grid[0]), float(grid[-1])
        edge = 1e-10 * max(1.0, abs(t1), abs(t2))
        self.times = np.empty((n, N, G))
        self.inside = np.empty((n, N, G), dtype=bool)
        self.tail_vals = [[None] * N for _ in range(n)]
        for m in range(n):
            for j in range(N):
                dev = deviations[m][j]
                ts = np.array([float(dev(float(t))) for t in grid])
                inside = (ts >= t1 - edge) & (ts <= t2 + edge)
                outside = ~inside
                if leftward:
                    bad = outside & (ts < t1)
                    side = "right of"
                else:
                    bad = outside & (ts > t2)
                    side = "left of"
                if bad.any():
                    i = int(np.argmax(bad))
                    raise TailGap(
                        f"deviation ({m + 1},{j + 1}) maps t={grid[i]:.6g} to "
                        f"{ts[i]:.6g}, outside the window and not {side} it"
                    )
                self.times[m, j] = np.clip(ts, t1, t2)
                self.inside[m, j] = inside
                if outside.any():
                    tail = tails[m]
                    t_out = ts[outside]
                    try:
                        if isinstance(tail, PiecewiseFunction):
                            vals = np.atleast_1d(tail.eval(t_out))
                        else:
                            vals = np.array([float(tail(float(x)))
                                             for x in t_out])
                    except NoTailDefined as exc:
                        raise TailGap(
                            f"deviation ({m + 1},{j + 1}) reaches "
                            f"t={t_out.min():.6g} where component {m + 1} "
                            f"has no prescribed data: {exc}"
                        ) from None
                    self.tail_vals[m][j] = vals

    def deviated_values(self, values: np.ndarray) -> np.ndarray:
        """(n, N, G) tensor of x_m at its deviated times; values is (n, G)."""
        U = np.empty_like(self.times)
        for m in range(self.n):
            for j in range(self.N):
                inside = self.inside[m, j]
                U[m, j, inside] = np.interp(self.times[m, j, inside],
                                            self.grid, values[m])
                if self.tail_vals[m][j] is not None:
                    U[m, j, ~inside] = self.tail_vals[m][j]
        return U


def _integrand(rhs, grid: np.ndarray, U: np.ndarray) -> np.ndarray:
    n = len(rhs)
    F = np.empty((n, grid.size))
    for k in range(n):
        Fk = rhs[k]
        F[k] = [float(Fk(float(grid[i]), U[:, :, i])) for i in range(grid.size)]
    return F


def _apply_values(rhs, de: _DelayedEval, values: np.ndarray,
                  anchors: np.ndarray, leftward: bool):
    """One operator application on raw sample arrays.

    Forward:   out_k(t) = anchor_k + integral from t1 to t.
    Leftward:  out_k(t) = anchor_k - integral from t to t2 (anchored at t2),
    whose fixed points solve the advanced system backward from the terminal
    junction.
    """
    U = de.deviated_values(values)
    F = _integrand(rhs, de.grid, U)
    out = np.empty_like(values)
    for k in range(values.shape[0]):
        C = _cumtrapz(de.grid, F[k])
        if leftward:
            out[k] = anchors[k] - (C[-1] - C)
        else:
            out[k] = anchors[k] + C
    return out, F


def _sup_sum(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.max(np.abs(a - b), axis=1)))


@dataclass
class _WindowRun:
    values: np.ndarray
    integrand: np.ndarray
    iterations: int
    first_step: float
    final_residual: float


def _iterate(rhs, de: _DelayedEval, q: float, init_values: np.ndarray,
             anchors: np.ndarray, tol: float, margin: int,
             leftward: bool) -> _WindowRun:
    x = np.asarray(init_values, dtype=float)
    x1, F = _apply_values(rhs, de, x, anchors, leftward)
    rho1 = _sup_sum(x1, x)
    if q <= 0.0 or rho1 == 0.0:
        # the operator output does not depend on the windowed part (or the
        # first application is already fixed): one application is exact
        return _WindowRun(x1, F, 1, rho1, rho1)
    threshold = tol * (1.0 - q) / q
    if rho1 <= threshold:
        return _WindowRun(x1, F, 1, rho1, rho1)
    max_iter = margin + max(1, math.ceil(
        math.log(threshold / rho1) / math.log(q)))
    prev = x1
    iterations = 1
    while True:
        nxt, F = _apply_values(rhs, de, prev, anchors, leftward)
        iterations += 1
        rho = _sup_sum(nxt, prev)
        if rho <= threshold:
            return _WindowRun(nxt, F, iterations, rho1, rho)
        if iterations >= max_iter:
            raise NoConvergence(
                f"window [{de.grid[0]:.6g}, {de.grid[-1]:.6g}] with certified "
                f"q={q:.4g} did not meet the successive-distance threshold "
                f"{threshold:.3e} within {max_iter} iterations (last distance "
                f"{rho:.3e}). The supplied majorants most likely "
                f"underestimate the right-hand side's sensitivity."
            )
        prev = nxt


def _window_grid_or_raise(x: Trajectory, w: Window) -> np.ndarray:
    grid = x.grid
    scale = max(1.0, abs(w.t_start), abs(w.t_end))
    if abs(grid[0] - w.t_start) > 1e-9 * scale \
            or abs(grid[-1] - w.t_end) > 1e-9 * scale:
        raise ValueError(
            f"trajectory span [{grid[0]}, {grid[-1]}] does not match window "
            f"[{w.t_start}, {w.t_end}]"
        )
    return grid


def apply_operator(p: RetardedIVP, x: Trajectory, w: Window) -> Trajectory:
    """One application of the window operator to a trajectory in its space.

    The output shares x's grid and tails; its value at the window start is
    the junction value of the prescribed data (taken from x's first samples,
    which equal it for any trajectory in the space).
    """
    grid = _window_grid_or_raise(x, w)
    de = _DelayedEval(p.delays, p.n, p.N, grid, x.components, leftward=False)
    anchors = x.values()[:, 0]
    out, _ = _apply_values(p.rhs, de, x.values(), anchors, leftward=False)
    return Trajectory([c.with_samples(out[k])
                       for k, c in enumerate(x.components)])


def apply_operator_advanced(p: AdvancedTVP, x: Trajectory,
                            w: Window) -> Trajectory:
    """Advanced-side mirror of :func:`apply_operator`, anchored at t_end."""
    grid = _window_grid_or_raise(x, w)
    de = _DelayedEval(p.advances, p.n, p.N, grid, x.components, leftward=True)
    anchors = x.values()[:, -1]
    out, _ = _apply_values(p.rhs, de, x.values(), anchors, leftward=True)
    return Trajectory([c.with_samples(out[k])
                       for k, c in enumerate(x.components)])


def solve_window(p: RetardedIVP, w: Window, init: Trajectory,
                 tol: float, max_iter_margin: int = 20
                 ) -> tuple[Trajectory, int, float]:
    """Iterate the window operator to its fixed point.

    Returns (fixed point, iterations, certified bound), the bound being the
    a-posteriori fixed-point gap q/(1-q) * rho(x_m, x_{m-1}) <= tol.
    """
    grid = _window_grid_or_raise(init, w)
    de = _DelayedEval(p.delays, p.n, p.N, grid, init.components,
                      leftward=False)
    anchors = init.values()[:, 0]
    run = _iterate(p.rhs, de, w.q, init.values(), anchors, tol,
                   max_iter_margin, leftward=False)
    bound = w.q / (1.0 - w.q) * run.final_residual if w.q > 0 else 0.0
    out = Trajectory([c.with_samples(run.values[k])
                      for k, c in enumerate(init.components)])
    return out, run.iterations, bound


# --------------------------------------------------------------------------
# certificates


def _quad_defect_estimate(grid: np.ndarray, integrand: np.ndarray,
                          values: np.ndarray, q: float,
                          safety: float) -> float:
    """Estimated defect of the discrete operator against the exact one.

    Two second-order sources, both estimated from second differences:
    the trapezoid error of each component integral (h^2/12 times the
    integrand curvature, summed) and the error of evaluating deviated
    arguments by linear interpolation (h^2/8 times the solution curvature,
    entering through the Lipschitz mass q).
    """
    h = float(grid[1] - grid[0])
    d2F = np.abs(np.diff(integrand, n=2, axis=1))
    trap = float(np.sum(d2F)) * h / 12.0
    if values.shape[1] >= 3:
        d2x = np.abs(np.diff(values, n=2, axis=1))
        interp = float(np.sum(np.max(d2x, axis=1))) / 8.0
    else:
        interp = 0.0
    return safety * (trap + q * interp)


def _certified_error_bound(q: float, aposteriori: float, quad: float,
                           carried: float) -> float:
    """Sup-metric bound against the true solution on this window.

    The discrete fixed point differs from the continuation of the stored
    prefix by at most quad/(1-q); replacing the stored prefix by the true
    solution moves the fixed point by at most carried/(1-q) (junction value
    plus deviated evaluations, both contracted); and the returned iterate
    sits within the a-posteriori gap of the discrete fixed point.
    """
    return aposteriori + (quad + carried) / (1.0 - q)


# --------------------------------------------------------------------------
# the continuation loop


def _init_values(grid: np.ndarray, anchors: np.ndarray, slopes, mode: str,
                 leftward: bool) -> np.ndarray:
    if mode == "constant" or slopes is None:
        return np.tile(anchors[:, None], (1, grid.size))
    offset = grid - (grid[-1] if leftward else grid[0])
    return anchors[:, None] + np.outer(slopes, offset)


def _tail_slopes(tails, t_junction: float, h: float,
                 leftward: bool) -> np.ndarray:
    probe = t_junction + h if leftward else t_junction - h
    vals_j = np.array([float(t(t_junction)) for t in tails])
    vals_p = np.array([float(t(probe)) for t in tails])
    if leftward:
        return (vals_p - vals_j) / h
    return (vals_j - vals_p) / h


def _solve_loop(p: RetardedIVP, t_end: float, cfg: SolverConfig,
                acc_grid, acc_vals, prior: list[WindowReport]) -> Solution:
    frontier = p.t0 if acc_grid is None else float(acc_grid[-1])
    scale = max(1.0, abs(p.t0), abs(t_end))
    carried = prior[-1].error_bound if prior else 0.0
    reports = list(prior)

    def current_tails():
        if acc_grid is None:
            return list(p.history)
        return [PiecewiseFunction(acc_grid, acc_vals[k], tail=p.history[k],
                                  tail_side="left") for k in range(p.n)]

    while t_end - frontier > 1e-12 * scale:
        max_len = t_end - frontier
        if cfg.max_window is not None:
            max_len = min(max_len, cfg.max_window)
        w = choose_window(p, frontier, cfg.theta, max_len, cfg.grid)
        grid = cfg.grid.make(w.t_start, w.t_end)
        tails = current_tails()
        anchors = np.array([float(tails[k](frontier)) for k in range(p.n)])
        slopes = None
        if cfg.init == "linear":
            slopes = _tail_slopes(tails, frontier, float(grid[1] - grid[0]),
                                  leftward=False)
        init_vals = _init_values(grid, anchors, slopes, cfg.init,
                                 leftward=False)
        de = _DelayedEval(p.delays, p.n, p.N, grid, tails, leftward=False)
        run = _iterate(p.rhs, de, w.q, init_vals, anchors, cfg.tol,
                       cfg.max_iter_margin, leftward=False)
        apost = w.q / (1.0 - w.q) * run.final_residual if w.q > 0 else 0.0
        apri = (w.q ** run.iterations / (1.0 - w.q) * run.first_step
                if w.q > 0 else 0.0)
        quad = _quad_defect_estimate(grid, run.integrand, run.values, w.q,
                                     cfg.quad_safety)
        bound = _certified_error_bound(w.q, apost, quad, carried)
        reports.append(WindowReport(
            window=w, iterations=run.iterations, first_step=run.first_step,
            final_residual=run.final_residual, aposteriori_bound=apost,
            apriori_bound=apri, quad_bound=quad, error_bound=bound))
        carried = bound
        if acc_grid is None:
            acc_grid = grid
            acc_vals = run.values
        else:
            acc_grid = np.concatenate((acc_grid, grid[1:]))
            acc_vals = np.concatenate((acc_vals, run.values[:, 1:]), axis=1)
        frontier = w.t_end

    if acc_grid is None:
        raise ValueError(f"nothing to solve: t_end={t_end} is not beyond "
                         f"t0={p.t0}")
    trajectory = Trajectory([
        PiecewiseFunction(acc_grid, acc_vals[k], tail=p.history[k],
                          tail_side="left")
        for k in range(p.n)
    ])
    return Solution(trajectory, SolveReport(reports))


def solve(p: RetardedIVP, t_end: float,
          cfg: SolverConfig = SolverConfig()) -> Solution:
    """Solve the retarded problem from its initial data out to t_end.

    Validates the retardation condition by sampling first, then chains
    contraction windows: each window's prescribed tail is the history
    concatenated with all previously solved windows, and its junction value
    is shared exactly with the previous window.
    """
    if not t_end > p.t0:
        raise ValueError(f"t_end={t_end} must exceed t0={p.t0}")
    validate_retardation(p, t_end, cfg.grid).raise_if_failed()
    return _solve_loop(p, t_end, cfg, None, None, [])


def extend(p: RetardedIVP, sol: Solution, t_end: float,
           cfg: SolverConfig = SolverConfig()) -> Solution:
    """Continue a saved solution to a later horizon.

    The saved trajectory becomes the prescribed prefix; certificates keep
    accumulating from the saved report.
    """
    frontier = float(sol.grid[-1])
    if not t_end > frontier:
        raise ValueError(f"t_end={t_end} is not beyond the solved horizon "
                         f"{frontier}")
    validate_retardation(p, t_end, cfg.grid).raise_if_failed()
    return _solve_loop(p, t_end, cfg, sol.grid.copy(), sol.trajectory.values(),
                       list(sol.report.windows))


def _solve_loop_advanced(p: AdvancedTVP, t_start: float, cfg: SolverConfig,
                         acc_grid, acc_vals,
                         prior: list[WindowReport]) -> Solution:
    frontier = p.tau0 if acc_grid is None else float(acc_grid[0])
    scale = max(1.0, abs(p.tau0), abs(t_start))
    carried = prior[-1].error_bound if prior else 0.0
    reports = list(prior)

    def current_tails():
        if acc_grid is None:
            return list(p.terminal)
        return [PiecewiseFunction(acc_grid, acc_vals[k], tail=p.terminal[k],
                                  tail_side="right") for k in range(p.n)]

    while frontier - t_start > 1e-12 * scale:
        max_len = frontier - t_start
        if cfg.max_window is not None:
            max_len = min(max_len, cfg.max_window)
        w = choose_window_advanced(p, frontier, cfg.theta, max_len, cfg.grid)
        grid = cfg.grid.make(w.t_start, w.t_end)
        tails = current_tails()
        anchors = np.array([float(tails[k](frontier)) for k in range(p.n)])
        slopes = None
        if cfg.init == "linear":
            slopes = _tail_slopes(tails, frontier, float(grid[1] - grid[0]),
                                  leftward=True)
        init_vals = _init_values(grid, anchors, slopes, cfg.init,
                                 leftward=True)
        de = _DelayedEval(p.advances, p.n, p.N, grid, tails, leftward=True)
        run = _iterate(p.rhs, de, w.q, init_vals, anchors, cfg.tol,
                       cfg.max_iter_margin, leftward=True)
        apost = w.q / (1.0 - w.q) * run.final_residual if w.q > 0 else 0.0
        apri = (w.q ** run.iterations / (1.0 - w.q) * run.first_step
                if w.q > 0 else 0.0)
        quad = _quad_defect_estimate(grid, run.integrand, run.values, w.q,
                                     cfg.quad_safety)
        bound = _certified_error_bound(w.q, apost, quad, carried)
        reports.append(WindowReport(
            window=w, iterations=run.iterations, first_step=run.first_step,
            final_residual=run.final_residual, aposteriori_bound=apost,
            apriori_bound=apri, quad_bound=quad, error_bound=bound))
        carried = bound
        if acc_grid is None:
            acc_grid = grid
            acc_vals = run.values
        else:
            acc_grid = np.concatenate((grid[:-1], acc_grid))
            acc_vals = np.concatenate((run.values[:, :-1], acc_vals), axis=1)
        frontier = w.t_start

    if acc_grid is None:
        raise ValueError(f"nothing to solve: t_start={t_start} is not before "
                         f"tau0={p.tau0}")
    trajectory = Trajectory([
        PiecewiseFunction(acc_grid, acc_vals[k], tail=p.terminal[k],
                          tail_side="right")
        for k in range(p.n)
    ])
    return Solution(trajectory, SolveReport(reports))


def solve_advanced(p: AdvancedTVP, t_start: float,
                   cfg: SolverConfig = SolverConfig()) -> Solution:
    """Solve the advanced problem leftward from terminal data to t_start."""
    if not t_start < p.tau0:
        raise ValueError(f"t_start={t_start} must precede tau0={p.tau0}")
    validate_advance(p, t_start, cfg.grid).raise_if_failed()
    return _solve_loop_advanced(p, t_start, cfg, None, None, [])


def extend_advanced(p: AdvancedTVP, sol: Solution, t_start: float,
                    cfg: SolverConfig = SolverConfig()) -> Solution:
    """Continue a saved advanced solution further left."""
    frontier = float(sol.grid[0])
    if not t_start < frontier:
        raise ValueError(f"t_start={t_start} is not before the solved "
                         f"frontier {frontier}")
    validate_advance(p, t_start, cfg.grid).raise_if_failed()
    return _solve_loop_advanced(p, t_start, cfg, sol.grid.copy(),
                                sol.trajectory.values(),
                                list(sol.report.windows))


# --------------------------------------------------------------------------
# integral-equation residuals


def residual(p: RetardedIVP, sol: Solution) -> np.ndarray:
    """Per-component max defect of the integrated equation on the grid:
    max over grid points of |phi_k(t) - r_k(t0) - integral of the deviated
    right-hand side from t0 to t|."""
    grid = sol.grid
    vals = sol.trajectory.values()
    G = grid.size
    U = np.empty((p.n, p.N, G))
    for m in range(p.n):
        comp = sol.trajectory.components[m]
        for j in range(p.N):
            dev = p.delays[m][j]
            ts = np.array([float(dev(float(t))) for t in grid])
            U[m, j] = comp.eval(ts)
    F = _integrand(p.rhs, grid, U)
    out = np.empty(p.n)
    for k in range(p.n):
        C = _cumtrapz(grid, F[k])
        anchor = float(p.history[k](p.t0))
        out[k] = float(np.max(np.abs(vals[k] - anchor - C)))
    return out


def residual_advanced(p: AdvancedTVP, sol: Solution) -> np.ndarray:
    """Mirror of :func:`residual` anchored at the terminal junction."""
    grid = sol.grid
    vals = sol.trajectory.values()
    G = grid.size
    U = np.empty((p.n, p.N, G))
    for m in range(p.n):
        comp = sol.trajectory.components[m]
        for j in range(p.N):
            dev = p.advances[m][j]
            ts = np.array([float(dev(float(t))) for t in grid])
            U[m, j] = comp.eval(ts)
    F = _integrand(p.rhs, grid, U)
    out = np.empty(p.n)
    for k in range(p.n):
        C = _cumtrapz(grid, F[k])
        anchor = float(p.terminal[k](p.tau0))
        out[k] = float(np.max(np.abs(vals[k] - anchor + (C[-1] - C))))
    return out
