"""Diagnostic records.

Errors in a running program never abort execution; they surface as
diagnostics attached to parse results, tick reports and the trace.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    message: str
    severity: str = "error"  # "error" | "warning"
    source: str = "runtime"  # parse|validate|guard|action|init|spawn|update|bus|bridge|sim|interpreter
    where: str | None = None  # machine/state/transition path when known
    line: int | None = None
    col: int | None = None

    def to_payload(self) -> dict:
        payload: dict = {
            "message": self.message,
            "severity": self.severity,
            "source": self.source,
        }
        if self.where is not None:
            payload["where"] = self.where
        if self.line is not None:
            payload["line"] = self.line
            payload["col"] = self.col
        return payload
