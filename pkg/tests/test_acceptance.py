"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines on the terminal.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_pair_in_space
from fdepicard.expr import (
    BinOp,
    Call,
    Neg,
    Num,
    Placeholder,
    TimeVar,
    auto_majorant,
    eval_expr,
    parse,
    to_source,
)
from fdepicard.funcspace import distance
from fdepicard.oracle import method_of_steps, pantograph_series, rk4_reference
from fdepicard.picard import (
    SolverConfig,
    apply_operator,
    choose_window,
    solve,
    solve_advanced,
)
from fdepicard.problem import AdvancedTVP, RetardedIVP, reflect_retarded

CFG = SolverConfig(theta=0.5, tol=1e-8)
RUNTIME_BUDGET = 5.0


def _criterion(num: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    tail = f" ({detail})" if detail else ""
    print(f"criterion {num:02d} {name}: {status}{tail}")
    assert ok, f"criterion {num:02d} {name} failed{tail}"


def _solve_timed(problem, horizon, cfg=CFG, advanced=False):
    t0 = time.perf_counter()
    sol = (solve_advanced if advanced else solve)(problem, horizon, cfg)
    return sol, time.perf_counter() - t0


@pytest.fixture(scope="module")
def problems():
    p1 = RetardedIVP(n=1, N=1, rhs=[lambda t, u: u[0][0]],
                     delays=[[lambda t: t - 1.0]],
                     lipschitz=[lambda t: 1.0],
                     history=[lambda t: 1.0], t0=0.0)
    p2 = RetardedIVP(n=1, N=1, rhs=[lambda t, u: u[0][0]],
                     delays=[[lambda t: t]],
                     lipschitz=[lambda t: 1.0],
                     history=[lambda t: 1.0], t0=0.0)
    p3 = RetardedIVP(n=1, N=1, rhs=[lambda t, u: u[0][0]],
                     delays=[[lambda t: 0.5 * t]],
                     lipschitz=[lambda t: 1.0],
                     history=[lambda t: 1.0], t0=0.0)
    return p1, p2, p3


@pytest.fixture(scope="module")
def solved(problems):
    p1, p2, p3 = problems
    s1, t1 = _solve_timed(p1, 4.0)
    s2, t2 = _solve_timed(p2, 1.0)
    s3, t3 = _solve_timed(p3, 1.0)
    return {"p1": (p1, s1, t1), "p2": (p2, s2, t2), "p3": (p3, s3, t3)}


def _oracle_values(key, problem, sol):
    grid = sol.grid
    if key == "p1":
        steps = method_of_steps([[1.0]], [[[1.0]]], [0.0], [1.0], 0.0, 4.0)
        return steps.eval_component(0, grid)
    if key == "p2":
        return np.exp(grid)
    return np.array([pantograph_series(1.0, 0.5, 40, float(t))[0]
                     for t in grid])


def test_criterion_01_constant_delay_oracle_equivalence(solved):
    p1, sol, elapsed = solved["p1"]
    oracle = _oracle_values("p1", p1, sol)
    dev = float(np.max(np.abs(sol.trajectory.values()[0] - oracle)))
    phi2 = sol.eval_component(0, 2.0)
    ok = dev <= 1e-6 and abs(phi2 - 3.5) <= 1e-6 and elapsed < RUNTIME_BUDGET
    _criterion(1, "constant-delay oracle equivalence", ok,
               f"max dev {dev:.3e}, phi(2)-3.5 = {phi2 - 3.5:.3e}, "
               f"{elapsed:.2f}s")


def test_criterion_02_ode_reduction(solved):
    p2, sol, elapsed = solved["p2"]
    h = max(w.window.length / (CFG.grid.points_per_window - 1)
            for w in sol.report.windows)
    C = 1.0  # pinned constant for the h^2 budget on unit-scale problems
    err = abs(sol.eval_component(0, 1.0) - math.e)
    ok_exact = err <= max(1e-6, C * h * h)

    def f(t, y):
        return y
    ts, ys = rk4_reference(f, [1.0], 1e-3, 0.0, 1.0)
    rk_dev = float(np.max(np.abs(
        np.atleast_1d(sol.eval_component(0, ts)) - ys[:, 0])))
    ok = ok_exact and rk_dev <= 1e-5 and elapsed < RUNTIME_BUDGET
    _criterion(2, "ode reduction", ok,
               f"|phi(1)-e| = {err:.3e} vs {max(1e-6, C * h * h):.3e}, "
               f"rk4 dev {rk_dev:.3e}, {elapsed:.2f}s")


def test_criterion_03_pantograph(solved):
    p3, sol, elapsed = solved["p3"]
    ref, _ = pantograph_series(1.0, 0.5, 30, 1.0)
    err = abs(sol.eval_component(0, 1.0) - ref)
    ok = err <= 1e-5 and elapsed < RUNTIME_BUDGET
    _criterion(3, "pantograph series equivalence", ok,
               f"|phi(1)-series| = {err:.3e}, {elapsed:.2f}s")


def test_criterion_04_empirical_contraction(problems):
    rng = np.random.default_rng(2024)
    violations = 0
    worst = 0.0
    for p in problems:
        w = choose_window(p, 0.0, CFG.theta, 4.0, CFG.grid)
        grid = CFG.grid.make(w.t_start, w.t_end)
        for _ in range(100):
            x, y = random_pair_in_space(p, grid, rng)
            lhs = distance(apply_operator(p, x, w), apply_operator(p, y, w))
            rhs = w.q * distance(x, y) * 1.01
            worst = max(worst, lhs / max(rhs, 1e-300))
            if lhs > rhs:
                violations += 1
    _criterion(4, "empirical contraction", violations == 0,
               f"0 expected, {violations} violations; worst ratio {worst:.3f}")


def test_criterion_05_deviation_gap_inequality(problems):
    rng = np.random.default_rng(2025)
    violations = 0
    for p in problems:
        w = choose_window(p, 0.0, CFG.theta, 4.0, CFG.grid)
        grid = CFG.grid.make(w.t_start, w.t_end)
        for _ in range(100):
            x, y = random_pair_in_space(p, grid, rng)
            gap = np.zeros(grid.size)
            for m in range(p.n):
                for j in range(p.N):
                    ts = np.array([p.delays[m][j](float(t)) for t in grid])
                    gap += np.abs(x.components[m].eval(ts)
                                  - y.components[m].eval(ts))
            if float(np.max(gap)) > p.N * distance(x, y) + 1e-12:
                violations += 1
    _criterion(5, "deviated gap bounded by N times distance",
               violations == 0, f"{violations} violations")


def test_criterion_06_uniqueness_across_initial_iterates(problems):
    worst = 0.0
    for p, horizon in zip(problems, (4.0, 1.0, 1.0)):
        a = solve(p, horizon, replace(CFG, init="constant"))
        b = solve(p, horizon, replace(CFG, init="linear"))
        worst = max(worst, float(np.max(
            np.abs(a.trajectory.values() - b.trajectory.values()))))
    _criterion(6, "uniqueness across initial iterates", worst <= 2 * CFG.tol,
               f"sup distance {worst:.3e} vs {2 * CFG.tol:.1e}")


def test_criterion_07_certificate_honesty(solved):
    ok = True
    worst_margin = math.inf
    for key in ("p1", "p2", "p3"):
        p, sol, _ = solved[key]
        oracle = _oracle_values(key, p, sol)
        err = np.abs(sol.trajectory.values()[0] - oracle)
        grid = sol.grid
        for w in sol.report.windows:
            h = w.window.length / (CFG.grid.points_per_window - 1)
            scale = max(1.0, abs(w.window.t_start), abs(w.window.t_end))
            mask = (grid >= w.window.t_start - 1e-12 * scale) \
                & (grid <= w.window.t_end + 1e-12 * scale)
            budget = w.error_bound + 1e-2 * h * h
            margin = budget - float(np.max(err[mask]))
            worst_margin = min(worst_margin, margin)
            if margin < 0:
                ok = False
    _criterion(7, "certificate honesty", ok,
               f"worst margin {worst_margin:.3e}")


def test_criterion_08_advanced_mirror(solved):
    adv = AdvancedTVP(n=1, N=1, rhs=[lambda t, u: u[0][0]],
                      advances=[[lambda t: t + 1.0]],
                      lipschitz=[lambda t: 1.0],
                      terminal=[lambda t: 1.0], tau0=0.0)
    sol, elapsed = _solve_timed(adv, -2.0, advanced=True)
    e1 = abs(sol.eval_component(0, -1.0) - 0.0)
    e2 = abs(sol.eval_component(0, -2.0) - (-0.5))

    p1, fwd, _ = solved["p1"]
    bwd = solve_advanced(reflect_retarded(p1), -4.0, CFG)
    dual = float(np.max(np.abs(fwd.trajectory.values()[0]
                               - bwd.eval_component(0, -fwd.grid))))
    ok = e1 <= 1e-6 and e2 <= 1e-6 and dual <= CFG.tol \
        and elapsed < RUNTIME_BUDGET
    _criterion(8, "advanced mirror and reflection duality", ok,
               f"phi(-1) err {e1:.3e}, phi(-2) err {e2:.3e}, "
               f"duality dev {dual:.3e}")


def test_criterion_09_window_sizing(problems):
    p1 = problems[0]
    w = choose_window(p1, 0.0, 0.5, 10.0, CFG.grid)
    first_ok = abs(w.length - 0.5) <= 1e-9

    free = RetardedIVP(n=1, N=1, rhs=[lambda t, u: math.sin(t)],
                       delays=[[lambda t: t]],
                       lipschitz=[lambda t: 0.0],
                       history=[lambda t: 0.0], t0=0.0)
    w0 = choose_window(free, 0.0, 0.5, 10.0, CFG.grid)
    cap_ok = w0.length == 10.0 and w0.q == 0.0
    _criterion(9, "window sizing exactness", first_ok and cap_ok,
               f"unit majorant length {w.length!r}, "
               f"zero majorant length {w0.length!r}")


def _random_ast(rng, depth, allow_placeholders=True):
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.45:
            return Num(float(np.round(rng.uniform(0, 100), 4)))
        if r < 0.75 or not allow_placeholders:
            return TimeVar()
        return Placeholder(int(rng.integers(1, 4)), int(rng.integers(1, 3)))
    r = rng.random()
    if r < 0.55:
        op = "+-*/^"[rng.integers(0, 5)]
        return BinOp(op, _random_ast(rng, depth - 1, allow_placeholders),
                     _random_ast(rng, depth - 1, allow_placeholders))
    if r < 0.7:
        return Neg(_random_ast(rng, depth - 1, allow_placeholders))
    if r < 0.9:
        name = ["sin", "cos", "exp", "log", "abs", "sqrt"][rng.integers(0, 6)]
        return Call(name, (_random_ast(rng, depth - 1, allow_placeholders),))
    name = ["min", "max"][rng.integers(0, 2)]
    return Call(name, (_random_ast(rng, depth - 1, allow_placeholders),
                       _random_ast(rng, depth - 1, allow_placeholders)))


def _random_affine(rng):
    def coeff():
        r = rng.random()
        base = Num(float(np.round(rng.uniform(-5, 5), 4)))
        if r < 0.4:
            return base
        if r < 0.7:
            return BinOp("*", base, Call("sin", (TimeVar(),)))
        return BinOp("+", base, Call("cos", (TimeVar(),)))

    e = None
    for _ in range(int(rng.integers(1, 5))):
        term = BinOp("*", coeff(),
                     Placeholder(int(rng.integers(1, 3)),
                                 int(rng.integers(1, 3))))
        e = term if e is None else BinOp("+-"[rng.integers(0, 2)], e, term)
    if rng.random() < 0.5:
        e = BinOp("+", e, coeff())
    if rng.random() < 0.3:
        e = Neg(e)
    return e


def test_criterion_10_parser_suite():
    goldens = (eval_expr(parse("2+3*4"), 0.0) == 14.0
               and eval_expr(parse("2^3^2"), 0.0) == 512.0
               and eval_expr(parse("-2^2"), 0.0) == -4.0)

    rng = np.random.default_rng(7)
    roundtrip_ok = True
    for _ in range(1000):
        e = _random_ast(rng, depth=4)
        if parse(to_source(e), n=3, N=2, allow_placeholders=True) != e:
            roundtrip_ok = False
            break

    sound = True
    for _ in range(1000):
        e = _random_affine(rng)
        m = auto_majorant(e)
        if m is None:
            sound = False
            break
        t = float(rng.uniform(-10, 10))
        u = rng.uniform(-10, 10, size=(2, 2))
        v = rng.uniform(-10, 10, size=(2, 2))
        gap = abs(eval_expr(e, t, u) - eval_expr(e, t, v))
        bound = eval_expr(m, t) * float(np.sum(np.abs(u - v)))
        if gap > bound + 1e-9 * (1.0 + bound):
            sound = False
            break
    _criterion(10, "parser suite", goldens and roundtrip_ok and sound,
               f"goldens {goldens}, roundtrip x1000 {roundtrip_ok}, "
               f"majorant soundness x1000 {sound}")


CLI_BASE = """\
direction = retarded
n = 1
N = 1
t0 = 0
horizon = 2
equation[1] = u[1][1]
delay[1][1] = t - 1
history[1] = 1
sample_step = 0.5
"""


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "fdepicard", *args],
                          capture_output=True, text=True)


def test_criterion_11_cli_determinism_and_exit_codes(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text(CLI_BASE)
    blobs = []
    for _ in range(3):
        r = _cli("solve", str(good), "--quiet")
        assert r.returncode == 0
        blobs.append((tmp_path / "good_solution.csv").read_bytes())
    deterministic = blobs[0] == blobs[1] == blobs[2]

    cases = []
    bad_syntax = tmp_path / "bad_syntax.cfg"
    bad_syntax.write_text("direction retarded\n")
    cases.append(("config", _cli("solve", str(bad_syntax)).returncode, 1))

    bad_dev = tmp_path / "bad_dev.cfg"
    bad_dev.write_text(CLI_BASE.replace("delay[1][1] = t - 1",
                                        "delay[1][1] = t + 1"))
    cases.append(("validation", _cli("solve", str(bad_dev)).returncode, 2))

    bad_lip = tmp_path / "bad_lip.cfg"
    bad_lip.write_text(CLI_BASE.replace("horizon = 2", "horizon = 4")
                       .replace("equation[1] = u[1][1]",
                                "equation[1] = 4*u[1][1]")
                       .replace("delay[1][1] = t - 1", "delay[1][1] = t")
                       + "lipschitz[1] = 0.001\n")
    cases.append(("convergence", _cli("solve", str(bad_lip)).returncode, 3))

    cases.append(("io", _cli("solve", str(tmp_path / "missing.cfg"))
                  .returncode, 4))
    cases.append(("usage", _cli("solve", str(good), "--frobnicate")
                  .returncode, 1))

    codes_ok = all(got == want for _, got, want in cases)
    _criterion(11, "cli determinism and exit codes",
               deterministic and codes_ok,
               f"deterministic {deterministic}, codes "
               + ", ".join(f"{n}={g}" for n, g, _ in cases))
