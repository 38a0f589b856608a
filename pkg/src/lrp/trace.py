"""Append-only session trace.

One JSON object per line, stable field order, no wall-clock timestamps:
two virtual-time runs of the same script must produce byte-identical
files. Events are ordered by (tick, emission order), which is simply
file order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO

__all__ = ["TraceEvent", "TraceLog"]

KINDS = ("meta", "transition", "publish", "lifecycle", "update", "diagnostic", "pose")


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "kind": self.kind, "payload": self.payload},
            separators=(",", ":"),
        )


class TraceLog:
    def __init__(self, path: str | None = None):
        self.events: list[TraceEvent] = []
        self._fh: IO[str] | None = None
        if path is not None:
            # line-buffered so live consumers (tests, tools) see events promptly
            self._fh = open(path, "w", encoding="utf-8", newline="\n", buffering=1)

    def emit(self, tick: int, kind: str, payload: dict) -> TraceEvent:
        event = TraceEvent(tick, kind, payload)
        self.events.append(event)
        if self._fh is not None:
            self._fh.write(event.to_json())
            self._fh.write("\n")
        return event

    def transitions(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == "transition"]

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
