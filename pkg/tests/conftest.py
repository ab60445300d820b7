"""Shared fixtures: the three standard test problems and trajectory helpers."""

import numpy as np
import pytest

from fdepicard.funcspace import PiecewiseFunction, Trajectory
from fdepicard.problem import AdvancedTVP, RetardedIVP


def scalar_retarded(delay, rhs=None, lip=None, hist=None, t0=0.0):
    return RetardedIVP(
        n=1, N=1,
        rhs=[rhs or (lambda t, u: u[0][0])],
        delays=[[delay]],
        lipschitz=[lip or (lambda t: 1.0)],
        history=[hist or (lambda t: 1.0)],
        t0=t0,
    )


@pytest.fixture
def constant_delay_problem():
    """phi'(t) = phi(t - 1), history 1; exact pieces are polynomials."""
    return scalar_retarded(lambda t: t - 1.0)


@pytest.fixture
def ode_problem():
    """y' = y written with the trivial deviation alpha(t) = t."""
    return scalar_retarded(lambda t: t)


@pytest.fixture
def pantograph_problem():
    """phi'(t) = phi(t/2), phi(0) = 1."""
    return scalar_retarded(lambda t: 0.5 * t)


@pytest.fixture
def advanced_step_problem():
    """phi'(t) = phi(t + 1), terminal data 1 on [0, inf)."""
    return AdvancedTVP(
        n=1, N=1,
        rhs=[lambda t, u: u[0][0]],
        advances=[[lambda t: t + 1.0]],
        lipschitz=[lambda t: 1.0],
        terminal=[lambda t: 1.0],
        tau0=0.0,
    )


def random_pair_in_space(problem, grid, rng, scale=1.0):
    """Two random trajectories sharing the problem's tail and junction value."""
    anchors = np.array([float(h(grid[0])) for h in problem.history])
    pair = []
    for _ in range(2):
        bumps = rng.uniform(-scale, scale, size=(problem.n, grid.size))
        bumps[:, 0] = 0.0
        pair.append(Trajectory([
            PiecewiseFunction(grid, anchors[k] + bumps[k],
                              tail=problem.history[k], tail_side="left")
            for k in range(problem.n)
        ]))
    return pair
