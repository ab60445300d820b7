"""Problem statements for deviated-argument systems, standing-condition
validation, and linear-system adapters.

A retarded initial-value problem is the system

    phi_k'(t) = F_k(t, phi_1(a_11(t)), ..., phi_n(a_nN(t))),   t >= t0,
    phi_k(t)  = r_k(t),                                        t <= t0,

with deviations a_kj(t) <= t (every deviated argument looks into the past)
and per-component sensitivity majorants f_k(t) >= 0 satisfying

    |F_k(t, u) - F_k(t, v)| <= f_k(t) * sum_{m,j} |u_mj - v_mj|.

The advanced terminal-value problem is the time mirror: deviations
b_kj(t) >= t, data s_k(t) prescribed on [tau0, +inf), solved leftwards.

Majorants are never estimated here: window sizing and the returned error
certificates are only as good as the user-supplied f_k, so a silent estimate
would forfeit the guarantee. Deviation conditions are checked by sampling on
a grid; inputs that misbehave only between samples are undetectable and are a
documented limitation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .funcspace import GridSpec

__all__ = [
    "ProblemError",
    "RetardationViolated",
    "AdvanceViolated",
    "DeviationViolation",
    "DeviationReport",
    "RetardedIVP",
    "AdvancedTVP",
    "LinearRetardedSystem",
    "LinearAdvancedSystem",
    "validate_retardation",
    "validate_advance",
    "linear_to_general",
    "linear_to_general_advanced",
    "reflect_advanced",
    "reflect_retarded",
]

TimeFn = Callable[[float], float]
RhsFn = Callable[[float, object], float]  # F_k(t, u) with u indexable u[m][j]

DEVIATION_TOL = 1e-12


class ProblemError(Exception):
    """Base error for problem statements."""


class RetardationViolated(ProblemError):
    """A deviation exceeded t on a retarded problem; carries the report."""

    def __init__(self, report: "DeviationReport"):
        self.report = report
        super().__init__(str(report))


class AdvanceViolated(ProblemError):
    """A deviation fell below t on an advanced problem; carries the report."""

    def __init__(self, report: "DeviationReport"):
        self.report = report
        super().__init__(str(report))


@dataclass(frozen=True)
class DeviationViolation:
    k: int      # component, 1-based
    j: int      # deviation index, 1-based
    t: float    # sample time
    value: float  # deviated time found there


@dataclass(frozen=True)
class DeviationReport:
    """Outcome of sampling the deviation conditions over a span."""

    kind: str  # "retarded" | "advanced"
    span: tuple[float, float]
    tolerance: float
    samples: int
    violations: tuple[DeviationViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_failed(self) -> None:
        if self.ok:
            return
        if self.kind == "retarded":
            raise RetardationViolated(self)
        raise AdvanceViolated(self)

    def __str__(self) -> str:
        if self.ok:
            return (f"{self.kind} deviation check passed on "
                    f"[{self.span[0]:g}, {self.span[1]:g}] "
                    f"({self.samples} samples per deviation)")
        head = self.violations[0]
        sense = "<=" if self.kind == "retarded" else ">="
        return (f"{self.kind} deviation check failed on "
                f"[{self.span[0]:g}, {self.span[1]:g}]: "
                f"{len(self.violations)} sample(s) violate the {sense} t "
                f"condition; first at k={head.k}, j={head.j}, "
                f"t={head.t:.6g} with deviated time {head.value:.6g}")


def _as_nested_tuple(rows, n_rows: int, n_cols: int, what: str):
    rows = tuple(tuple(r) for r in rows)
    if len(rows) != n_rows or any(len(r) != n_cols for r in rows):
        raise ValueError(f"{what} must have shape {n_rows} x {n_cols}")
    return rows


@dataclass
class RetardedIVP:
    """Initial-value problem with retarded deviations.

    ``rhs[k]`` is called as ``F(t, u)`` with ``u[m][j]`` holding the value of
    component ``m+1`` at its ``j+1``-th deviated time; ``delays[m][j]`` maps t
    to that deviated time. ``lipschitz[k]`` is the nonnegative majorant and
    ``history[k]`` the prescribed data for t <= t0 (a callable or anything
    with that call signature, e.g. a PiecewiseFunction).

    Instances are treated as immutable after construction and the stored
    evaluators must be reentrant.
    """

    n: int
    N: int
    rhs: Sequence[RhsFn]
    delays: Sequence[Sequence[TimeFn]]
    lipschitz: Sequence[TimeFn]
    history: Sequence[TimeFn]
    t0: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.N < 1:
            raise ValueError("need n >= 1 components and N >= 1 deviations")
        self.rhs = tuple(self.rhs)
        self.lipschitz = tuple(self.lipschitz)
        self.history = tuple(self.history)
        if len(self.rhs) != self.n or len(self.lipschitz) != self.n \
                or len(self.history) != self.n:
            raise ValueError("rhs, lipschitz and history need one entry "
                             "per component")
        self.delays = _as_nested_tuple(self.delays, self.n, self.N, "delays")
        self.t0 = float(self.t0)


@dataclass
class AdvancedTVP:
    """Terminal-value problem with advanced deviations; mirror of
    :class:`RetardedIVP` with data ``terminal[k]`` prescribed for
    t >= tau0 and deviations ``advances[m][j](t) >= t``."""

    n: int
    N: int
    rhs: Sequence[RhsFn]
    advances: Sequence[Sequence[TimeFn]]
    lipschitz: Sequence[TimeFn]
    terminal: Sequence[TimeFn]
    tau0: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.N < 1:
            raise ValueError("need n >= 1 components and N >= 1 deviations")
        self.rhs = tuple(self.rhs)
        self.lipschitz = tuple(self.lipschitz)
        self.terminal = tuple(self.terminal)
        if len(self.rhs) != self.n or len(self.lipschitz) != self.n \
                or len(self.terminal) != self.n:
            raise ValueError("rhs, lipschitz and terminal need one entry "
                             "per component")
        self.advances = _as_nested_tuple(self.advances, self.n, self.N,
                                         "advances")
        self.tau0 = float(self.tau0)


def _sample_deviations(deviations, n, N, t_lo, t_hi, grid, tol, sense):
    if not t_hi > t_lo:
        raise ValueError(f"empty validation span [{t_lo}, {t_hi}]")
    ts = grid.make(t_lo, t_hi)
    violations = []
    for m in range(n):
        for j in range(N):
            dev = deviations[m][j]
            for t in ts:
                t = float(t)
                v = float(dev(t))
                bad = v > t + tol if sense == "retarded" else v < t - tol
                if bad:
                    violations.append(
                        DeviationViolation(k=m + 1, j=j + 1, t=t, value=v))
    return ts.size, tuple(violations)


def validate_retardation(p: RetardedIVP, t_end: float,
                         grid: GridSpec = GridSpec(),
                         tolerance: float = DEVIATION_TOL) -> DeviationReport:
    """Sample every delay on [t0, t_end] and require alpha(t) <= t + tol.

    Pure: returns the report; call ``report.raise_if_failed()`` to turn a
    failure into :class:`RetardationViolated`.
    """
    count, violations = _sample_deviations(
        p.delays, p.n, p.N, p.t0, t_end, grid, tolerance, "retarded")
    return DeviationReport("retarded", (p.t0, float(t_end)), tolerance,
                           count, violations)


def validate_advance(p: AdvancedTVP, t_start: float,
                     grid: GridSpec = GridSpec(),
                     tolerance: float = DEVIATION_TOL) -> DeviationReport:
    """Sample every advance on [t_start, tau0] and require beta(t) >= t - tol."""
    count, violations = _sample_deviations(
        p.advances, p.n, p.N, t_start, p.tau0, grid, tolerance, "advanced")
    return DeviationReport("advanced", (float(t_start), p.tau0), tolerance,
                           count, violations)


@dataclass
class LinearRetardedSystem:
    """Linear system phi_k' = sum_j sum_m a_kjm(t) phi_j(alpha_jm(t)) + b_k.

    ``coefficients[k][j][m]`` and ``forcing[k]`` are callables of t; the
    deviations ``delays[j][m]`` are shared by all equations.
    """

    n: int
    N: int
    coefficients: Sequence[Sequence[Sequence[TimeFn]]]
    forcing: Sequence[TimeFn]
    delays: Sequence[Sequence[TimeFn]]
    history: Sequence[TimeFn]
    t0: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.N < 1:
            raise ValueError("need n >= 1 components and N >= 1 deviations")
        coeffs = tuple(
            _as_nested_tuple(row, self.n, self.N, "coefficients[k]")
            for row in self.coefficients
        )
        if len(coeffs) != self.n:
            raise ValueError(f"coefficients must have shape "
                             f"{self.n} x {self.n} x {self.N}")
        self.coefficients = coeffs
        self.forcing = tuple(self.forcing)
        self.history = tuple(self.history)
        if len(self.forcing) != self.n or len(self.history) != self.n:
            raise ValueError("forcing and history need one entry per component")
        self.delays = _as_nested_tuple(self.delays, self.n, self.N, "delays")
        self.t0 = float(self.t0)


@dataclass
class LinearAdvancedSystem:
    """Mirror of :class:`LinearRetardedSystem` for the advanced side:
    phi_k' = sum_j sum_m c_kjm(t) phi_j(beta_jm(t)) + d_k(t), t <= tau0."""

    n: int
    N: int
    coefficients: Sequence[Sequence[Sequence[TimeFn]]]
    forcing: Sequence[TimeFn]
    advances: Sequence[Sequence[TimeFn]]
    terminal: Sequence[TimeFn]
    tau0: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.N < 1:
            raise ValueError("need n >= 1 components and N >= 1 deviations")
        coeffs = tuple(
            _as_nested_tuple(row, self.n, self.N, "coefficients[k]")
            for row in self.coefficients
        )
        if len(coeffs) != self.n:
            raise ValueError(f"coefficients must have shape "
                             f"{self.n} x {self.n} x {self.N}")
        self.coefficients = coeffs
        self.forcing = tuple(self.forcing)
        self.terminal = tuple(self.terminal)
        if len(self.forcing) != self.n or len(self.terminal) != self.n:
            raise ValueError("forcing and terminal need one entry per component")
        self.advances = _as_nested_tuple(self.advances, self.n, self.N,
                                         "advances")
        self.tau0 = float(self.tau0)


def _linear_rhs(coeff_row, forcing_k, n, N) -> RhsFn:
    def F(t: float, u) -> float:
        total = forcing_k(t)
        for j in range(n):
            row = coeff_row[j]
            uj = u[j]
            for m in range(N):
                total += row[m](t) * uj[m]
        return float(total)
    return F


def _linear_majorant(coeff_row, n, N) -> TimeFn:
    def f(t: float) -> float:
        return max(abs(float(coeff_row[j][m](t)))
                   for j in range(n) for m in range(N))
    return f


def linear_to_general(sys: LinearRetardedSystem) -> RetardedIVP:
    """View a linear system as a general problem.

    The right-hand sides become F_k(t, u) = sum a_kjm(t) u_jm + b_k(t) and
    the majorant f_k(t) = max_{j,m} |a_kjm(t)| works because

        |F_k(t,u) - F_k(t,v)| <= sum |a_kjm| |u_jm - v_jm|
                              <= f_k(t) sum |u_jm - v_jm|.
    """
    return RetardedIVP(
        n=sys.n,
        N=sys.N,
        rhs=[_linear_rhs(sys.coefficients[k], sys.forcing[k], sys.n, sys.N)
             for k in range(sys.n)],
        delays=sys.delays,
        lipschitz=[_linear_majorant(sys.coefficients[k], sys.n, sys.N)
                   for k in range(sys.n)],
        history=sys.history,
        t0=sys.t0,
    )


def linear_to_general_advanced(sys: LinearAdvancedSystem) -> AdvancedTVP:
    """Advanced-side analogue of :func:`linear_to_general`."""
    return AdvancedTVP(
        n=sys.n,
        N=sys.N,
        rhs=[_linear_rhs(sys.coefficients[k], sys.forcing[k], sys.n, sys.N)
             for k in range(sys.n)],
        advances=sys.advances,
        lipschitz=[_linear_majorant(sys.coefficients[k], sys.n, sys.N)
                   for k in range(sys.n)],
        terminal=sys.terminal,
        tau0=sys.tau0,
    )


def _reflected_rhs(G: RhsFn) -> RhsFn:
    return lambda t, u: -G(-t, u)


def _reflected_time_fn(f: TimeFn) -> TimeFn:
    return lambda t: float(f(-t))


def _reflected_deviation(b: TimeFn) -> TimeFn:
    return lambda t: -float(b(-t))


def reflect_advanced(p: AdvancedTVP) -> RetardedIVP:
    """Time-reverse an advanced problem into a retarded one.

    With x(t) = phi(-t) the advanced system phi' = G(t, phi(beta(t))) turns
    into x' = -G(-t, ...) with delays alpha(t) = -beta(-t) <= t, history
    r(t) = s(-t) and start -tau0. Solving the reflection forward and
    reflecting back reproduces the advanced solution.
    """
    return RetardedIVP(
        n=p.n,
        N=p.N,
        rhs=[_reflected_rhs(G) for G in p.rhs],
        delays=[[_reflected_deviation(b) for b in row] for row in p.advances],
        lipschitz=[_reflected_time_fn(h) for h in p.lipschitz],
        history=[_reflected_time_fn(s) for s in p.terminal],
        t0=-p.tau0,
    )


def reflect_retarded(p: RetardedIVP) -> AdvancedTVP:
    """Inverse of :func:`reflect_advanced`."""
    return AdvancedTVP(
        n=p.n,
        N=p.N,
        rhs=[_reflected_rhs(F) for F in p.rhs],
        advances=[[_reflected_deviation(a) for a in row] for row in p.delays],
        lipschitz=[_reflected_time_fn(f) for f in p.lipschitz],
        terminal=[_reflected_time_fn(r) for r in p.history],
        tau0=-p.t0,
    )
