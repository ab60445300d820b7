"""Problem definition files: a flat ``key = value`` schema.

Lines are ``key = value`` with ``#`` comments and blank lines ignored. Keys::

    direction     retarded | advanced
    n, N          component count and deviations per component
    t0 | tau0     initial time (retarded) or terminal time (advanced)
    horizon       solve target; beyond t0 (retarded) or before tau0 (advanced)

    equation[k]   right-hand side formula, placeholders u[m][j] allowed
    delay[k][j]   deviated argument, formula in t only      (retarded)
    advance[k][j] deviated argument, formula in t only      (advanced)
    history[k]    prescribed data for t <= t0, in t only    (retarded)
    terminal[k]   prescribed data for t >= tau0, in t only  (advanced)
    lipschitz[k]  sensitivity majorant, in t only; optional when equation[k]
                  is affine in its placeholders (then derived automatically)

    theta, tol, grid_points, max_window    solver knobs (all optional)
    output, report, sample_step            output controls (all optional)

Indices are 1-based. Errors cite the offending line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .expr import Expr, ExprError, auto_majorant, eval_expr, parse
from .funcspace import GridSpec
from .picard import SolverConfig
from .problem import AdvancedTVP, RetardedIVP

__all__ = [
    "ConfigError",
    "ConfigSyntax",
    "ConfigSemantic",
    "ProblemConfig",
    "load_config",
    "build_problem",
]


class ConfigError(Exception):
    """Base error for problem definition files."""


class ConfigSyntax(ConfigError):
    def __init__(self, path, line: Optional[int], msg: str):
        where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + msg)


class ConfigSemantic(ConfigError):
    def __init__(self, path, line: Optional[int], msg: str):
        where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + msg)


_SCALAR_KEYS = {
    "direction", "n", "N", "t0", "tau0", "horizon",
    "theta", "tol", "grid_points", "max_window",
    "output", "report", "sample_step",
}
_INDEXED_KEYS = {"equation", "delay", "advance", "history", "terminal",
                 "lipschitz"}
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)((?:\[\d+\])*)$")


@dataclass
class ProblemConfig:
    """Fully parsed and validated problem definition."""

    direction: str  # "retarded" | "advanced"
    n: int
    N: int
    equations: list[Expr]
    deviations: list[list[Expr]]     # delay or advance formulas, n x N
    lipschitz: list[Expr]            # supplied or derived majorants
    boundary: list[Expr]             # history or terminal formulas
    start: float                     # t0 or tau0
    horizon: float
    solver: SolverConfig
    output_path: Optional[str]
    report_path: Optional[str]
    sample_step: Optional[float]
    source: Path


class _Raw:
    """Key/value lines with positions, plus consumption tracking."""

    def __init__(self, path: Path, text: str):
        self.path = path
        self.entries: dict[str, tuple[str, int]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigSyntax(path, lineno,
                                   f"expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            m = _KEY_RE.match(key)
            if not m:
                raise ConfigSyntax(path, lineno, f"malformed key {key!r}")
            base = m.group(1)
            if base not in _SCALAR_KEYS and base not in _INDEXED_KEYS:
                raise ConfigSyntax(path, lineno, f"unknown key {base!r}")
            indexed = bool(m.group(2))
            if indexed and base in _SCALAR_KEYS:
                raise ConfigSyntax(path, lineno,
                                   f"key {base!r} must not carry [..] indices")
            if not indexed and base in _INDEXED_KEYS:
                raise ConfigSyntax(path, lineno,
                                   f"key {base!r} needs [..] indices")
            if not value:
                raise ConfigSyntax(path, lineno, f"empty value for {key!r}")
            if key in self.entries:
                raise ConfigSyntax(path, lineno, f"duplicate key {key!r}")
            self.entries[key] = (value, lineno)
        self.unused = set(self.entries)

    def take(self, key: str) -> Optional[tuple[str, int]]:
        if key in self.entries:
            self.unused.discard(key)
            return self.entries[key]
        return None

    def require(self, key: str) -> tuple[str, int]:
        got = self.take(key)
        if got is None:
            raise ConfigSemantic(self.path, None, f"missing required key {key!r}")
        return got


def _parse_int(raw: _Raw, key: str, lo: int = 1) -> int:
    value, line = raw.require(key)
    try:
        v = int(value)
    except ValueError:
        raise ConfigSyntax(raw.path, line, f"{key} must be an integer, "
                                           f"got {value!r}") from None
    if v < lo:
        raise ConfigSemantic(raw.path, line, f"{key} must be at least {lo}")
    return v


def _parse_float(raw: _Raw, key: str, required: bool = True,
                 default: Optional[float] = None) -> Optional[float]:
    got = raw.require(key) if required else raw.take(key)
    if got is None:
        return default
    value, line = got
    try:
        return float(value)
    except ValueError:
        raise ConfigSyntax(raw.path, line, f"{key} must be a number, "
                                           f"got {value!r}") from None


def _parse_int_opt(raw: _Raw, key: str, default: int, lo: int) -> int:
    got = raw.take(key)
    if got is None:
        return default
    value, line = got
    try:
        v = int(value)
    except ValueError:
        raise ConfigSyntax(raw.path, line, f"{key} must be an integer, "
                                           f"got {value!r}") from None
    if v < lo:
        raise ConfigSemantic(raw.path, line, f"{key} must be at least {lo}")
    return v


def _parse_expr(raw: _Raw, key: str, n: int, N: int,
                allow_placeholders: bool, required: bool = True
                ) -> Optional[Expr]:
    got = raw.require(key) if required else raw.take(key)
    if got is None:
        return None
    value, line = got
    try:
        return parse(value, n=n, N=N, allow_placeholders=allow_placeholders)
    except ExprError as exc:
        raise ConfigSyntax(raw.path, line, f"in {key}: {exc}") from None


def load_config(path) -> ProblemConfig:
    """Read, parse and validate a problem definition file.

    Missing files surface as OSError (an I/O failure, not a config error).
    """
    path = Path(path)
    raw = _Raw(path, path.read_text())

    direction, dline = raw.require("direction")
    if direction not in ("retarded", "advanced"):
        raise ConfigSemantic(path, dline,
                             "direction must be 'retarded' or 'advanced'")
    n = _parse_int(raw, "n")
    N = _parse_int(raw, "N")

    retarded = direction == "retarded"
    start_key, dev_key, data_key = (("t0", "delay", "history") if retarded
                                    else ("tau0", "advance", "terminal"))
    wrong = {"t0": "tau0", "tau0": "t0", "delay": "advance",
             "advance": "delay", "history": "terminal",
             "terminal": "history"}[start_key]
    if raw.take(wrong) is not None:
        raise ConfigSemantic(path, None,
                             f"{wrong!r} does not apply to a {direction} "
                             f"problem; use {start_key!r}")
    start = _parse_float(raw, start_key)
    horizon = _parse_float(raw, "horizon")
    if retarded and not horizon > start:
        raise ConfigSemantic(path, None,
                             f"horizon {horizon} must exceed t0 {start}")
    if not retarded and not horizon < start:
        raise ConfigSemantic(path, None,
                             f"horizon {horizon} must precede tau0 {start}")

    equations = [_parse_expr(raw, f"equation[{k}]", n, N, True)
                 for k in range(1, n + 1)]
    deviations = [[_parse_expr(raw, f"{dev_key}[{k}][{j}]", n, N, False)
                   for j in range(1, N + 1)]
                  for k in range(1, n + 1)]
    boundary = [_parse_expr(raw, f"{data_key}[{k}]", n, N, False)
                for k in range(1, n + 1)]

    lipschitz = []
    for k in range(1, n + 1):
        supplied = _parse_expr(raw, f"lipschitz[{k}]", n, N, False,
                               required=False)
        if supplied is not None:
            lipschitz.append(supplied)
            continue
        derived = auto_majorant(equations[k - 1])
        if derived is None:
            _, eline = raw.entries[f"equation[{k}]"]
            raise ConfigSemantic(
                path, eline,
                f"equation[{k}] is not affine in its placeholders, so no "
                f"majorant can be derived; supply lipschitz[{k}] explicitly")
        lipschitz.append(derived)

    theta = _parse_float(raw, "theta", required=False, default=0.5)
    tol = _parse_float(raw, "tol", required=False, default=1e-8)
    grid_points = _parse_int_opt(raw, "grid_points", default=256, lo=2)
    max_window = _parse_float(raw, "max_window", required=False)
    sample_step = _parse_float(raw, "sample_step", required=False)
    if sample_step is not None and sample_step <= 0:
        raise ConfigSemantic(path, None, "sample_step must be positive")

    output_path = report_path = None
    if (got := raw.take("output")) is not None:
        output_path = got[0]
    if (got := raw.take("report")) is not None:
        report_path = got[0]

    if raw.unused:
        key = sorted(raw.unused)[0]
        _, line = raw.entries[key]
        raise ConfigSemantic(
            path, line,
            f"key {key!r} does not belong to a {direction} problem with "
            f"n={n}, N={N}")

    try:
        solver = SolverConfig(theta=theta, tol=tol,
                              grid=GridSpec(grid_points),
                              max_window=max_window)
    except ValueError as exc:
        raise ConfigSemantic(path, None, str(exc)) from None

    return ProblemConfig(
        direction=direction, n=n, N=N, equations=equations,
        deviations=deviations, lipschitz=lipschitz, boundary=boundary,
        start=start, horizon=horizon, solver=solver,
        output_path=output_path, report_path=report_path,
        sample_step=sample_step, source=path,
    )


def _rhs_fn(e: Expr):
    return lambda t, u: eval_expr(e, t, u)


def _time_fn(e: Expr):
    return lambda t: eval_expr(e, t)


def build_problem(cfg: ProblemConfig):
    """Materialize the problem object the solver consumes."""
    rhs = [_rhs_fn(e) for e in cfg.equations]
    deviations = [[_time_fn(e) for e in row] for row in cfg.deviations]
    lipschitz = [_time_fn(e) for e in cfg.lipschitz]
    boundary = [_time_fn(e) for e in cfg.boundary]
    if cfg.direction == "retarded":
        return RetardedIVP(n=cfg.n, N=cfg.N, rhs=rhs, delays=deviations,
                           lipschitz=lipschitz, history=boundary, t0=cfg.start)
    return AdvancedTVP(n=cfg.n, N=cfg.N, rhs=rhs, advances=deviations,
                       lipschitz=lipschitz, terminal=boundary, tau0=cfg.start)
