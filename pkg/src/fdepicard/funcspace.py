"""Grid-backed continuous functions with analytic tails, plus the sup metric
and trapezoid quadrature used throughout the solver.

A :class:`PiecewiseFunction` stores samples of a scalar function of time on a
strictly increasing breakpoint grid and interpolates between them (linear by
default, cubic Hermite optionally). Outside the sampled span evaluation falls
through to an optional analytic ``tail`` callable; that is how history data
on ``(-inf, t0]`` and terminal data on ``[tau0, +inf)`` are carried without
sampling an infinite interval.

A :class:`Trajectory` bundles ``n`` components sharing one grid on a window
``[t1, t2]``. The distance between two trajectories is
``sum_k max_i |x_k(g_i) - y_k(g_i)|`` over the shared grid points; for
piecewise-linear representatives this equals the sup distance over the whole
window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "FuncSpaceError",
    "NoTailDefined",
    "GridMismatch",
    "OutOfSpan",
    "GridSpec",
    "PiecewiseFunction",
    "Trajectory",
    "distance",
    "integrate",
    "cumulative_integrate",
]

# Relative slack for treating a query just outside the sampled span as the
# edge itself (floating noise from delay evaluators, window chaining).
_EDGE_REL = 1e-10


class FuncSpaceError(Exception):
    """Base error for function-space operations."""


class NoTailDefined(FuncSpaceError):
    """Evaluation left the sampled span on a side that has no tail."""


class GridMismatch(FuncSpaceError):
    """Two trajectories do not share the same window and grid."""


class OutOfSpan(FuncSpaceError):
    """Quadrature limits leave the sampled span."""


@dataclass(frozen=True)
class GridSpec:
    """Per-window grid resolution. Windows always use uniform grids."""

    points_per_window: int = 256

    def __post_init__(self) -> None:
        if self.points_per_window < 2:
            raise ValueError("points_per_window must be at least 2")

    def make(self, t1: float, t2: float) -> np.ndarray:
        if not t2 > t1:
            raise ValueError(f"empty grid span [{t1}, {t2}]")
        return np.linspace(t1, t2, self.points_per_window)


Tail = Union[Callable[[float], float], "PiecewiseFunction"]


class PiecewiseFunction:
    """A scalar function of time: breakpoints, samples, and optional tails.

    Parameters
    ----------
    breakpoints, samples:
        Strictly increasing times and one value per time.
    interp:
        ``"linear"`` or ``"cubic"`` (cubic Hermite with finite-difference
        slopes).
    tail:
        Callable used for evaluation outside the sampled span; ``tail_side``
        says which side(s) it covers (``"left"``, ``"right"`` or ``"both"``).
        History functions cover the left side, terminal data the right.
    continuity_tol:
        Maximum absolute mismatch allowed between the tail and the edge
        sample at the junction.
    """

    __slots__ = ("breakpoints", "samples", "interp", "tail", "tail_side",
                 "continuity_tol", "_slopes")

    def __init__(
        self,
        breakpoints: Sequence[float],
        samples: Sequence[float],
        interp: str = "linear",
        tail: Optional[Tail] = None,
        tail_side: str = "both",
        continuity_tol: float = 1e-9,
    ):
        bp = np.array(breakpoints, dtype=float)
        vals = np.array(samples, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if vals.shape != bp.shape:
            raise ValueError("samples length must equal breakpoints length")
        if not np.all(np.isfinite(bp)) or not np.all(np.isfinite(vals)):
            raise ValueError("breakpoints and samples must be finite")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if interp not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation rule {interp!r}")
        if tail_side not in ("left", "right", "both"):
            raise ValueError(f"unknown tail side {tail_side!r}")
        bp.setflags(write=False)
        vals.setflags(write=False)
        self.breakpoints = bp
        self.samples = vals
        self.interp = interp
        self.tail = tail
        self.tail_side = tail_side
        self.continuity_tol = continuity_tol
        self._slopes: Optional[np.ndarray] = None
        if tail is not None:
            self._check_junctions()

    @property
    def span(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def _covers(self, side: str) -> bool:
        return self.tail is not None and self.tail_side in (side, "both")

    def _check_junctions(self) -> None:
        for side, idx in (("left", 0), ("right", -1)):
            if not self._covers(side):
                continue
            t_edge = float(self.breakpoints[idx])
            v_tail = self._tail_scalar(t_edge)
            gap = abs(v_tail - float(self.samples[idx]))
            if gap > self.continuity_tol:
                raise ValueError(
                    f"tail/span junction mismatch {gap:.3e} at t={t_edge} "
                    f"exceeds continuity tolerance {self.continuity_tol:.1e}"
                )

    def _tail_scalar(self, t: float) -> float:
        tail = self.tail
        if isinstance(tail, PiecewiseFunction):
            return tail.eval(t)
        return float(tail(t))  # type: ignore[misc]

    def _tail_values(self, ts: np.ndarray, side: str) -> np.ndarray:
        if not self._covers(side):
            raise NoTailDefined(
                f"evaluation at t={ts[0]:.6g} lies {side} of the sampled span "
                f"[{self.breakpoints[0]:.6g}, {self.breakpoints[-1]:.6g}] "
                f"and no {side} tail is defined"
            )
        tail = self.tail
        if isinstance(tail, PiecewiseFunction):
            return np.atleast_1d(tail.eval(ts))
        return np.array([float(tail(float(t))) for t in ts])  # type: ignore[misc]

    def _interp_values(self, ts: np.ndarray) -> np.ndarray:
        if self.interp == "linear":
            return np.interp(ts, self.breakpoints, self.samples)
        if self._slopes is None:
            order = 2 if self.breakpoints.size >= 3 else 1
            self._slopes = np.gradient(self.samples, self.breakpoints,
                                       edge_order=order)
        bp, y, d = self.breakpoints, self.samples, self._slopes
        i = np.clip(np.searchsorted(bp, ts, side="right") - 1, 0, bp.size - 2)
        h = bp[i + 1] - bp[i]
        s = (ts - bp[i]) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1]

    def eval(self, t):
        """Evaluate at a scalar time or an array of times.

        Inside the span the value is interpolated; outside, the tail on that
        side is used. Raises :class:`NoTailDefined` when no tail covers the
        queried side.
        """
        ts = np.asarray(t, dtype=float)
        scalar = ts.ndim == 0
        flat = np.atleast_1d(ts).ravel()
        lo, hi = self.span
        edge = _EDGE_REL * max(1.0, abs(lo), abs(hi))
        left = flat < lo - edge
        right = flat > hi + edge
        inside = ~(left | right)
        out = np.empty_like(flat)
        if inside.any():
            out[inside] = self._interp_values(np.clip(flat[inside], lo, hi))
        if left.any():
            out[left] = self._tail_values(flat[left], "left")
        if right.any():
            out[right] = self._tail_values(flat[right], "right")
        if scalar:
            return float(out[0])
        return out.reshape(ts.shape)

    __call__ = eval

    def with_samples(self, samples: Sequence[float]) -> "PiecewiseFunction":
        """Same grid, tail and metadata, new sample values."""
        return PiecewiseFunction(
            self.breakpoints, samples, interp=self.interp, tail=self.tail,
            tail_side=self.tail_side, continuity_tol=self.continuity_tol,
        )


class Trajectory:
    """An n-component vector function sharing one breakpoint grid."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[PiecewiseFunction]):
        comps = tuple(components)
        if not comps:
            raise ValueError("trajectory needs at least one component")
        g0 = comps[0].breakpoints
        for c in comps[1:]:
            if not np.array_equal(c.breakpoints, g0):
                raise GridMismatch("components must share one breakpoint grid")
        self.components = comps

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def grid(self) -> np.ndarray:
        return self.components[0].breakpoints

    @property
    def window(self) -> tuple[float, float]:
        return self.components[0].span

    def values(self) -> np.ndarray:
        """Sample matrix of shape (n, grid points)."""
        return np.stack([c.samples for c in self.components])

    def eval(self, t) -> np.ndarray:
        """Evaluate all components; shape (n,) for scalar t."""
        return np.stack([np.asarray(c.eval(t), dtype=float)
                         for c in self.components])

    @staticmethod
    def from_values(
        grid: Sequence[float],
        values: np.ndarray,
        tails: Optional[Sequence[Optional[Tail]]] = None,
        tail_side: str = "both",
        interp: str = "linear",
        continuity_tol: float = 1e-9,
    ) -> "Trajectory":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must have shape (n, grid points)")
        n = values.shape[0]
        if tails is None:
            tails = [None] * n
        if len(tails) != n:
            raise ValueError("one tail per component required")
        return Trajectory([
            PiecewiseFunction(grid, values[k], interp=interp, tail=tails[k],
                              tail_side=tail_side, continuity_tol=continuity_tol)
            for k in range(n)
        ])


def distance(x: Trajectory, y: Trajectory) -> float:
    """Sum over components of the max absolute gap over shared grid points."""
    if x.n != y.n:
        raise GridMismatch(f"component counts differ: {x.n} vs {y.n}")
    if not np.array_equal(x.grid, y.grid):
        raise GridMismatch("trajectories do not share window and grid")
    return float(sum(
        np.max(np.abs(cx.samples - cy.samples))
        for cx, cy in zip(x.components, y.components)
    ))


def _cumtrapz(grid: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Running composite-trapezoid integral from grid[0]; shape preserved."""
    dg = np.diff(grid)
    return np.concatenate((
        [0.0], np.cumsum(0.5 * (samples[1:] + samples[:-1]) * dg)
    ))


def _running_at(grid: np.ndarray, samples: np.ndarray,
                cum: np.ndarray, x: float) -> float:
    """Trapezoid value of the running integral at an arbitrary in-span x."""
    if x <= grid[0]:
        return 0.0
    if x >= grid[-1]:
        return float(cum[-1])
    i = int(np.searchsorted(grid, x, side="right") - 1)
    fx = float(np.interp(x, grid, samples))
    return float(cum[i] + 0.5 * (samples[i] + fx) * (x - grid[i]))


def _check_span(grid: np.ndarray, t: float, what: str) -> float:
    lo, hi = float(grid[0]), float(grid[-1])
    edge = _EDGE_REL * max(1.0, abs(lo), abs(hi))
    if t < lo - edge or t > hi + edge:
        raise OutOfSpan(f"{what}={t} outside sampled span [{lo}, {hi}]")
    return min(max(t, lo), hi)


def integrate(grid: Sequence[float], samples: Sequence[float],
              a: float, b: float) -> float:
    """Composite trapezoid of a sampled integrand over [a, b].

    ``a`` and ``b`` need not be grid points; partial cells use the
    interpolated endpoint value, so affine integrands integrate exactly.
    """
    grid = np.asarray(grid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if grid.shape != samples.shape or grid.ndim != 1:
        raise ValueError("grid and samples must be equal-length 1-D arrays")
    if a > b:
        raise ValueError(f"integration limits reversed: a={a} > b={b}")
    a = _check_span(grid, a, "a")
    b = _check_span(grid, b, "b")
    cum = _cumtrapz(grid, samples)
    return _running_at(grid, samples, cum, b) - _running_at(grid, samples, cum, a)


def cumulative_integrate(grid: Sequence[float], samples: Sequence[float],
                         from_time: float) -> PiecewiseFunction:
    """Running trapezoid integral ``t -> integral from from_time to t``.

    Sampled on the same grid; the value at ``from_time`` is 0 and values for
    ``t < from_time`` carry the expected negative sign.
    """
    grid = np.asarray(grid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if grid.shape != samples.shape or grid.ndim != 1:
        raise ValueError("grid and samples must be equal-length 1-D arrays")
    from_time = _check_span(grid, from_time, "from_time")
    cum = _cumtrapz(grid, samples)
    anchor = _running_at(grid, samples, cum, from_time)
    return PiecewiseFunction(grid, cum - anchor)
