"""Certified windowed fixed-point solver for systems of functional
differential equations with retarded or advanced arguments.

The library solves initial-value problems whose right-hand sides look only
into the past (delays) by marching forward, and terminal-value problems whose
right-hand sides look only into the future (advances) by marching backward.
Windows are sized so the integral operator provably contracts, and every
window comes with an a-posteriori error certificate.
"""

from .funcspace import (
    FuncSpaceError,
    GridMismatch,
    GridSpec,
    NoTailDefined,
    OutOfSpan,
    PiecewiseFunction,
    Trajectory,
    cumulative_integrate,
    distance,
    integrate,
)
from .problem import (
    AdvancedTVP,
    AdvanceViolated,
    DeviationReport,
    LinearAdvancedSystem,
    LinearRetardedSystem,
    ProblemError,
    RetardationViolated,
    RetardedIVP,
    linear_to_general,
    linear_to_general_advanced,
    reflect_advanced,
    reflect_retarded,
    validate_advance,
    validate_retardation,
)
from .picard import (
    NoConvergence,
    PicardError,
    Solution,
    SolveReport,
    SolverConfig,
    TailGap,
    Window,
    WindowReport,
    ZeroProgress,
    apply_operator,
    apply_operator_advanced,
    choose_window,
    choose_window_advanced,
    extend,
    extend_advanced,
    residual,
    residual_advanced,
    solve,
    solve_advanced,
    solve_window,
)
from .expr import EvalError, ExprError, ParseError, auto_majorant, eval_expr, parse
from .config import ConfigError, ProblemConfig, build_problem, load_config

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # funcspace
    "FuncSpaceError", "GridMismatch", "GridSpec", "NoTailDefined", "OutOfSpan",
    "PiecewiseFunction", "Trajectory", "cumulative_integrate", "distance",
    "integrate",
    # problem
    "AdvancedTVP", "AdvanceViolated", "DeviationReport",
    "LinearAdvancedSystem", "LinearRetardedSystem", "ProblemError",
    "RetardationViolated", "RetardedIVP", "linear_to_general",
    "linear_to_general_advanced", "reflect_advanced", "reflect_retarded",
    "validate_advance", "validate_retardation",
    # picard
    "NoConvergence", "PicardError", "Solution", "SolveReport", "SolverConfig",
    "TailGap", "Window", "WindowReport", "ZeroProgress", "apply_operator",
    "apply_operator_advanced", "choose_window", "choose_window_advanced",
    "extend", "extend_advanced", "residual", "residual_advanced", "solve",
    "solve_advanced", "solve_window",
    # expr
    "EvalError", "ExprError", "ParseError", "auto_majorant", "eval_expr",
    "parse",
    # config
    "ConfigError", "ProblemConfig", "build_problem", "load_config",
]
