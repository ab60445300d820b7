"""Independent reference solvers for verification.

These are used by the test suite and the ``--verify`` CLI mode to cross-check
the main solver, so they deliberately share no machinery with it: the
constant-delay oracle works by exact polynomial coefficient arithmetic, the
proportional-delay oracle by a truncated power series, and the ODE oracle is
a classical fixed-step fourth-order one-step method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "OracleError",
    "NonconstantDelay",
    "NonpolynomialInput",
    "PiecewisePolynomialSolution",
    "method_of_steps",
    "pantograph_series",
    "rk4_reference",
]


class OracleError(Exception):
    """Base error for reference solvers."""


class NonconstantDelay(OracleError):
    """The constant-delay oracle needs strictly positive constant lags."""


class NonpolynomialInput(OracleError):
    """Coefficients, forcing and history must be polynomials."""


def _as_poly(obj, what: str) -> Polynomial:
    if isinstance(obj, Polynomial):
        return obj
    if np.isscalar(obj):
        return Polynomial([float(obj)])
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise NonpolynomialInput(
            f"{what} must be a Polynomial, a scalar, or a coefficient "
            f"sequence (ascending powers), got {type(obj).__name__}"
        ) from None
    if arr.ndim != 1 or arr.size == 0:
        raise NonpolynomialInput(f"{what}: coefficient sequence must be 1-D "
                                 f"and nonempty")
    return Polynomial(arr)


@dataclass(frozen=True)
class PiecewisePolynomialSolution:
    """Exact solution as abutting polynomial pieces plus polynomial history.

    ``pieces`` is a list of ``(a, b, polys)`` with one polynomial per
    component, valid on [a, b]; ``history`` applies for t <= t0.
    """

    t0: float
    history: tuple[Polynomial, ...]
    pieces: tuple[tuple[float, float, tuple[Polynomial, ...]], ...]

    @property
    def n(self) -> int:
        return len(self.history)

    @property
    def horizon(self) -> float:
        return self.pieces[-1][1] if self.pieces else self.t0

    def _polys_at(self, t: float) -> tuple[Polynomial, ...]:
        if t <= self.t0:
            return self.history
        for a, b, polys in self.pieces:
            if t <= b + 1e-12 * max(1.0, abs(b)):
                return polys
        raise OracleError(f"t={t} beyond computed horizon {self.horizon}")

    def eval_component(self, k: int, t) -> np.ndarray | float:
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        flat = np.atleast_1d(ts).ravel()
        out = np.array([float(self._polys_at(x)[k](x)) for x in flat])
        return float(out[0]) if scalar else out.reshape(ts.shape)

    def eval(self, t: float) -> np.ndarray:
        polys = self._polys_at(float(t))
        return np.array([float(p(t)) for p in polys])

    def derivative_defect(self, coefficients, forcing, lags) -> float:
        """Max coefficient gap between each piece's derivative and the
        delayed-evaluation right-hand side; exact solutions give ~1e-15."""
        worst = 0.0
        n, N = len(self.history), len(lags[0])
        for a, b, polys in self.pieces:
            mid = 0.5 * (a + b)
            for k in range(n):
                rhs = _as_poly(forcing[k], "forcing")
                for j in range(n):
                    for m in range(N):
                        tau = lags[j][m]
                        shifted = self._polys_at(mid - tau)[j](
                            Polynomial([-tau, 1.0]))
                        rhs = rhs + _as_poly(coefficients[k][j][m],
                                             "coefficient") * shifted
                gap = polys[k].deriv() - rhs
                if len(gap.coef):
                    worst = max(worst, float(np.max(np.abs(gap.coef))))
        return worst


def method_of_steps(
    lags: Sequence[Sequence[float]],
    coefficients: Sequence[Sequence[Sequence[object]]],
    forcing: Sequence[object],
    history: Sequence[object],
    t0: float,
    horizon: float,
) -> PiecewisePolynomialSolution:
    """Exact solution of a constant-lag linear system by stepping.

    Solves phi_k' = sum_j sum_m a_kjm(t) phi_j(t - lags[j][m]) + b_k(t) with
    polynomial a, b and polynomial history. On each step interval every
    delayed argument lands inside a single already-known polynomial piece, so
    the right-hand side is itself a polynomial and integrates exactly in
    coefficient arithmetic. Pieces are split at every lag-translate of an
    existing breakpoint, never at a heuristic step size.

    ``coefficients[k][j][m]``, ``forcing[k]`` and ``history[k]`` accept
    Polynomial instances, scalars, or ascending coefficient sequences.
    """
    lag_arr = np.asarray(lags, dtype=float)
    if lag_arr.ndim != 2:
        raise NonconstantDelay("lags must be an n x N matrix of constants")
    n, N = lag_arr.shape
    if np.any(~np.isfinite(lag_arr)) or np.any(lag_arr <= 0):
        raise NonconstantDelay("all lags must be finite and strictly positive")
    if not horizon > t0:
        raise ValueError(f"horizon {horizon} must exceed t0 {t0}")

    hist = tuple(_as_poly(h, f"history[{k}]") for k, h in enumerate(history))
    if len(hist) != n:
        raise ValueError("one history polynomial per component required")
    coeffs = [[[_as_poly(coefficients[k][j][m], f"coefficients[{k}][{j}][{m}]")
                for m in range(N)] for j in range(n)] for k in range(n)]
    force = [_as_poly(forcing[k], f"forcing[{k}]") for k in range(n)]

    pieces: list[tuple[float, float, tuple[Polynomial, ...]]] = []
    breakpoints = [t0]
    unique_lags = sorted(set(lag_arr.ravel().tolist()))
    tiny = 1e-12 * max(1.0, abs(t0), abs(horizon))

    def polys_at(t: float) -> tuple[Polynomial, ...]:
        if t <= t0 + tiny:
            return hist
        for a, b, polys in pieces:
            if t <= b + tiny:
                return polys
        raise OracleError(f"internal: lookup at t={t} beyond frontier")

    anchors = np.array([float(h(t0)) for h in hist])
    frontier = t0
    while frontier < horizon - tiny:
        candidates = [horizon]
        for b in breakpoints:
            for lag in unique_lags:
                c = b + lag
                if frontier + tiny < c < horizon - tiny:
                    candidates.append(c)
        nxt = min(candidates)
        mid = 0.5 * (frontier + nxt)
        new_polys = []
        for k in range(n):
            rhs = force[k]
            for j in range(n):
                for m in range(N):
                    tau = float(lag_arr[j, m])
                    src = polys_at(mid - tau)[j]
                    rhs = rhs + coeffs[k][j][m] * src(Polynomial([-tau, 1.0]))
            integ = rhs.integ()
            new_polys.append(anchors[k] - integ(frontier) + integ)
        new_polys = tuple(new_polys)
        pieces.append((frontier, nxt, new_polys))
        anchors = np.array([float(p(nxt)) for p in new_polys])
        breakpoints.append(nxt)
        frontier = nxt

    return PiecewisePolynomialSolution(t0=float(t0), history=hist,
                                       pieces=tuple(pieces))


def pantograph_series(a: float, q: float, terms: int,
                      t: float) -> tuple[float, float]:
    """Truncated series solution of y'(t) = a*y(q*t), y(0) = 1.

    The coefficients satisfy c_{m+1} = a q^m c_m / (m+1), giving
    y(t) = sum_m a^m q^(m(m-1)/2) t^m / m!. Returns the partial sum over
    ``terms`` terms and the magnitude of the first omitted term as a
    truncation estimate (for 0 < q < 1 the tail is dominated by it).
    """
    if terms < 1:
        raise ValueError("need at least one term")
    total = 0.0
    c = 1.0  # a^m q^(m(m-1)/2) / m!
    for m in range(terms):
        total += c * t ** m
        c = c * a * q ** m / (m + 1)
    return total, abs(c * t ** terms)


def rk4_reference(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    step: float,
    t0: float,
    horizon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step fourth-order integration of y' = f(t, y).

    Returns (times, values) with values of shape (steps + 1, len(y0)). The
    last step is shortened to land exactly on the horizon.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if not horizon > t0:
        raise ValueError(f"horizon {horizon} must exceed t0 {t0}")
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    ts = [t0]
    ys = [y.copy()]
    t = t0
    while t < horizon - 1e-14 * max(1.0, abs(horizon)):
        h = min(step, horizon - t)
        k1 = np.asarray(f(t, y), dtype=float)
        k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(f(t + h, y + h * k3), dtype=float)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        ts.append(t)
        ys.append(y.copy())
    return np.array(ts), np.vstack(ys)
