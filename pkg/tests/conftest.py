import pathlib

import pytest

from lrp.errors import EvalError

REPO = pathlib.Path(__file__).resolve().parent.parent
PROGRAMS = REPO / "programs"
WORLDS = PROGRAMS / "worlds"


@pytest.fixture(scope="session")
def stop_program_text() -> str:
    return (PROGRAMS / "stop_at_obstacle.lrp").read_text()


@pytest.fixture(scope="session")
def avoid_program_text() -> str:
    return (PROGRAMS / "avoid_obstacles.lrp").read_text()


@pytest.fixture(scope="session")
def wall_3m_path() -> str:
    return str(WORLDS / "wall_3m.json")


@pytest.fixture(scope="session")
def wall_close_path() -> str:
    return str(WORLDS / "wall_close.json")


@pytest.fixture(scope="session")
def empty_world_path() -> str:
    return str(WORLDS / "empty.json")


class Probe:
    """Scriptable host object that records every message it receives."""

    def __init__(self, responses: dict | None = None):
        self.calls: list[tuple[str, tuple]] = []
        self.responses = dict(responses or {})

    def receive_message(self, selector: str, args: list):
        self.calls.append((selector, tuple(args)))
        if selector not in self.responses:
            raise EvalError(f"probe does not understand '{selector}'")
        value = self.responses[selector]
        if isinstance(value, Exception):
            raise value
        if callable(value):
            return value(*args)
        return value

    def selectors(self) -> list[str]:
        return [sel for sel, _ in self.calls]


@pytest.fixture
def probe_factory():
    return Probe
