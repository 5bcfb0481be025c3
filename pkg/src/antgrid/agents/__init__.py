"""Ant behaviour programs as pure per-step transitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from antgrid.agents.base import (
    CLAIM,
    COMPLETE,
    REEXPLORE,
    Action,
    AntProgramId,
    Observation,
)
from antgrid.agents.fsm import (
    FsmState,
    Phase,
    fsm_event,
    fsm_transition,
    initial_fsm_state,
    reachable_states,
    step_async_fsm,
    step_async_ft_fsm,
    step_sync_fsm,
    step_sync_ft_fsm,
)
from antgrid.agents.tm import TmPhase, TmState, initial_tm_state, step_tm, tm_transition
from antgrid.world import Position

__all__ = [
    "CLAIM",
    "COMPLETE",
    "REEXPLORE",
    "Action",
    "AntProgram",
    "AntProgramId",
    "FsmState",
    "Observation",
    "Phase",
    "TmPhase",
    "TmState",
    "get_program",
    "reachable_states",
    "step_async_fsm",
    "step_async_ft_fsm",
    "step_sync_fsm",
    "step_sync_ft_fsm",
    "step_tm",
]

Event = tuple[str, int] | None


@dataclass(frozen=True)
class AntProgram:
    """Bundle of a program's initial state and its transition function.

    ``transition(state, sensed, pos)`` returns ``(action, next_state, event)``;
    ``pos`` is only used to attribute layer events and never influences the
    ant's decision.
    """

    id: AntProgramId
    initial_state: Callable[[], Any]
    transition: Callable[[Any, bool, Position], tuple[Action, Any, Event]]


def _fsm_program(pid: AntProgramId) -> AntProgram:
    def transition(state: FsmState, sensed: bool, pos: Position):
        action, nxt = fsm_transition(state, sensed)
        return action, nxt, fsm_event(state, sensed, pos)

    return AntProgram(pid, lambda: initial_fsm_state(pid), transition)


def _tm_program(listing_mode: bool) -> AntProgram:
    def transition(state: TmState, sensed: bool, pos: Position):
        return tm_transition(state, sensed)

    return AntProgram(AntProgramId.TM, lambda: initial_tm_state(listing_mode), transition)


def get_program(program: AntProgramId | str, *, tm_listing_mode: bool = False) -> AntProgram:
    pid = AntProgramId(program)
    if pid is AntProgramId.TM:
        return _tm_program(tm_listing_mode)
    return _fsm_program(pid)
