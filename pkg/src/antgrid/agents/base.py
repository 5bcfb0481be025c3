from __future__ import annotations

from enum import Enum
from typing import NamedTuple

from antgrid.world import Direction


class Observation(NamedTuple):
    """Everything an ant learns about the world in one step."""

    pheromone_here: bool


class Action(NamedTuple):
    """Emission (at the pre-move cell) followed by a move."""

    emit_pheromone: bool
    move: Direction


class AntProgramId(str, Enum):
    ASYNC_FSM = "async-fsm"
    SYNC_FSM = "sync-fsm"
    ASYNC_FT_FSM = "async-ft-fsm"
    SYNC_FT_FSM = "sync-ft-fsm"
    TM = "tm"

    @property
    def is_fsm(self) -> bool:
        return self is not AntProgramId.TM

    @property
    def fault_tolerant(self) -> bool:
        return self in (AntProgramId.ASYNC_FT_FSM, AntProgramId.SYNC_FT_FSM)

    @property
    def synchronous_only(self) -> bool:
        return self in (AntProgramId.SYNC_FSM, AntProgramId.SYNC_FT_FSM)

    @property
    def asynchronous_only(self) -> bool:
        return self in (AntProgramId.ASYNC_FSM, AntProgramId.ASYNC_FT_FSM)

    def __str__(self) -> str:
        return self.value


# Layer events reported by programs so the scheduler can keep explorer logs.
CLAIM = "claim"
COMPLETE = "complete"
REEXPLORE = "reexplore"
