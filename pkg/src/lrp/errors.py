"""Exception types shared across the runtime."""

from __future__ import annotations


class LrpError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LrpError):
    """Source text could not be parsed. Carries a 1-based position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class EvalError(LrpError):
    """An action-block expression failed to evaluate.

    Never fatal to the interpreter: callers report it as a diagnostic
    and keep going.
    """


class BusError(LrpError):
    """A bus operation was rejected (duplicate node, stopped publisher, ...)."""


class SessionSetupError(LrpError):
    """A session could not be constructed (unreadable program/world file)."""
