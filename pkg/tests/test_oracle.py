import math
import re
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from fdepicard.oracle import (
    NonconstantDelay,
    NonpolynomialInput,
    method_of_steps,
    pantograph_series,
    rk4_reference,
)

# frozen from the exact rational computation of the series
PANTOGRAPH_1_HALF_AT_1 = 2.2714925555010614


def steps_scalar(horizon, coeff=1.0, forcing=0.0, history=1.0, lag=1.0):
    return method_of_steps([[lag]], [[[coeff]]], [forcing], [history],
                           0.0, horizon)


def test_steps_constant_history_single_lag():
    sol = steps_scalar(2.0)
    assert len(sol.pieces) == 2
    a0, b0, p0 = sol.pieces[0]
    assert (a0, b0) == (0.0, 1.0)
    assert np.allclose(p0[0].coef, [1.0, 1.0])  # 1 + t
    a1, b1, p1 = sol.pieces[1]
    assert (a1, b1) == (1.0, 2.0)
    assert np.allclose(p1[0].coef, [1.5, 0.0, 0.5])  # 2 + (t^2 - 1)/2
    assert sol.eval_component(0, 2.0) == pytest.approx(3.5, abs=1e-14)
    assert sol.eval_component(0, -5.0) == 1.0


def test_steps_value_against_fine_quadrature():
    # integrate phi' = phi(t-1) with a very fine independent trapezoid rule
    # and compare the endpoint value
    sol = steps_scalar(2.0)
    h = 1e-5
    ts = np.arange(0.0, 2.0 + h / 2, h)
    rhs = sol.eval_component(0, ts - 1.0)
    quad = 1.0 + np.concatenate(([0.0], np.cumsum(0.5 * (rhs[1:] + rhs[:-1]) * h)))
    assert abs(quad[-1] - 3.5) < 1e-9
    assert np.max(np.abs(quad - sol.eval_component(0, ts))) < 1e-9


def test_steps_zero_rhs_continues_history():
    sol = steps_scalar(3.0, coeff=0.0, forcing=0.0, history=7.0)
    for t in (0.5, 1.7, 3.0):
        assert sol.eval_component(0, t) == pytest.approx(7.0, abs=1e-14)


def test_steps_two_component_system():
    # phi1' = phi2(t-1), phi2' = 0, r1 = 0, r2 = 1 -> phi1 = t, phi2 = 1
    zero, one = 0.0, 1.0
    sol = method_of_steps(
        lags=[[1.0], [1.0]],
        coefficients=[[[zero], [one]],
                      [[zero], [zero]]],
        forcing=[zero, zero],
        history=[zero, one],
        t0=0.0, horizon=1.0)
    ts = np.linspace(0, 1, 11)
    assert np.allclose(sol.eval_component(0, ts), ts, atol=1e-14)
    assert np.allclose(sol.eval_component(1, ts), 1.0, atol=1e-14)


def test_steps_piece_continuity_and_defect():
    sol = method_of_steps(
        lags=[[0.7]],
        coefficients=[[[Polynomial([0.5, -0.25])]]],
        forcing=[Polynomial([0.0, 1.0])],
        history=[Polynomial([1.0, 2.0])],
        t0=0.0, horizon=3.0)
    # adjacent pieces agree at shared endpoints
    for (a, b, left), (c, d, right) in zip(sol.pieces, sol.pieces[1:]):
        assert b == c
        assert abs(float(left[0](b)) - float(right[0](b))) < 1e-12
    # differentiating each piece reproduces the delayed right-hand side
    assert sol.derivative_defect(
        [[[Polynomial([0.5, -0.25])]]], [Polynomial([0.0, 1.0])],
        [[0.7]]) < 1e-12


def test_steps_splits_at_lag_translates():
    sol = method_of_steps([[0.75]], [[[1.0]]], [0.0], [1.0], 0.0, 2.0)
    edges = [p[0] for p in sol.pieces] + [sol.pieces[-1][1]]
    assert edges == pytest.approx([0.0, 0.75, 1.5, 2.0])


def test_steps_rejects_bad_lags():
    with pytest.raises(NonconstantDelay):
        method_of_steps([[0.0]], [[[1.0]]], [0.0], [1.0], 0.0, 1.0)
    with pytest.raises(NonconstantDelay):
        method_of_steps([[-1.0]], [[[1.0]]], [0.0], [1.0], 0.0, 1.0)


def test_steps_rejects_nonpolynomial_input():
    with pytest.raises(NonpolynomialInput):
        method_of_steps([[1.0]], [[[math.sin]]], [0.0], [1.0], 0.0, 1.0)
    with pytest.raises(NonpolynomialInput):
        method_of_steps([[1.0]], [[[1.0]]], [0.0], [lambda t: 1.0], 0.0, 1.0)


def test_pantograph_series_constant_term():
    v, _ = pantograph_series(1.0, 0.3, 5, 0.0)
    assert v == 1.0


def test_pantograph_series_a_zero():
    for t in (0.0, 0.5, 2.0):
        v, est = pantograph_series(0.0, 0.5, 10, t)
        assert v == 1.0
        assert est == 0.0


def test_pantograph_series_frozen_value():
    v, est = pantograph_series(1.0, 0.5, 30, 1.0)
    assert v == pytest.approx(PANTOGRAPH_1_HALF_AT_1, abs=1e-14)
    assert est < 1e-12


def test_pantograph_series_ratio_test():
    # term ratio a*q^m*t/(m+1) eventually falls below 1 for q < 1
    a, q, t = 2.0, 0.9, 3.0
    c = 1.0
    ratios = []
    for m in range(40):
        nxt = c * a * q**m * t / (m + 1)
        if c != 0:
            ratios.append(abs(nxt) / abs(c))
        c = nxt
    assert ratios[-1] < 1.0
    # truncation estimate bounds the remaining tail
    v40, est40 = pantograph_series(a, q, 40, t)
    v80, _ = pantograph_series(a, q, 80, t)
    assert abs(v80 - v40) <= 2 * est40 + 1e-15


def test_rk4_constant():
    ts, ys = rk4_reference(lambda t, y: np.zeros_like(y), [4.2], 0.1, 0.0, 1.0)
    assert np.allclose(ys[:, 0], 4.2)


def test_rk4_exponential_growth():
    ts, ys = rk4_reference(lambda t, y: y, [1.0], 1e-3, 0.0, 1.0)
    assert abs(ys[-1, 0] - math.e) < 1e-10
    assert ts[-1] == pytest.approx(1.0, abs=1e-12)


def test_rk4_exponential_decay():
    ts, ys = rk4_reference(lambda t, y: -y, [1.0], 1e-3, 0.0, 1.0)
    assert abs(ys[-1, 0] - 1.0 / math.e) < 1e-10


def test_rk4_vector_system():
    # harmonic oscillator: (cos t, -sin t)
    def f(t, y):
        return np.array([y[1], -y[0]])
    ts, ys = rk4_reference(f, [1.0, 0.0], 1e-3, 0.0, math.pi)
    assert abs(ys[-1, 0] + 1.0) < 1e-9
    assert abs(ys[-1, 1]) < 1e-9


def test_rk4_fourth_order_convergence():
    def err(step):
        _, ys = rk4_reference(lambda t, y: y, [1.0], step, 0.0, 1.0)
        return abs(ys[-1, 0] - math.e)
    ratio = err(0.02) / err(0.01)
    assert 10.0 < ratio < 25.0


def test_oracles_do_not_import_the_solver_core():
    src = Path(__file__).resolve().parents[1] / "src" / "fdepicard" / "oracle.py"
    text = src.read_text()
    for line in text.splitlines():
        if re.match(r"\s*(import|from)\s", line):
            assert "picard" not in line
            assert "funcspace" not in line
