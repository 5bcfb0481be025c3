from __future__ import annotations

import pytest

from antgrid.agents import get_program
from antgrid.world import NEST, Position


def drive(program, marks, pos, state=None, steps=10_000, until=None):
    """Run one ant against a fixed pheromone set, applying its emissions.

    Returns (path of arrival cells, emitted cells in order, final state).
    Stops when ``until(pos, state)`` is true or after ``steps`` steps.
    """
    prog = get_program(program)
    marks = set(marks)
    state = prog.initial_state() if state is None else state
    pos = Position(*pos)
    path, emitted = [], []
    for _ in range(steps):
        action, state, _ = prog.transition(state, pos in marks, pos)
        if action.emit_pheromone:
            marks.add(pos)
            emitted.append(pos)
        pos = pos.step(action.move)
        path.append(pos)
        if until is not None and until(pos, state):
            break
    return path, emitted, state


@pytest.fixture
def nest():
    return NEST


def pytest_terminal_summary(terminalreporter):
    import sys

    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for n in sorted(mod.RESULTS):
                terminalreporter.write_line(mod.RESULTS[n][1])
