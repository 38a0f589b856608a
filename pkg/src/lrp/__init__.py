"""Live-programming runtime for nested-state-machine robot behaviors."""

from .actions import Environment, EvalError, SingletonFactory, eval_expr, parse_expr, print_expr
from .diagnostics import Diagnostic
from .errors import BusError, LrpError, ParseError, SessionSetupError
from .parser import parse_program
from .syntax import ProgramAST, print_program, validate

__version__ = "0.1.0"

__all__ = [
    "Diagnostic",
    "Environment",
    "EvalError",
    "BusError",
    "LrpError",
    "ParseError",
    "SessionSetupError",
    "ProgramAST",
    "SingletonFactory",
    "eval_expr",
    "parse_expr",
    "parse_program",
    "print_expr",
    "print_program",
    "validate",
]
