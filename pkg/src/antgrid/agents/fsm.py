"""Constant-memory ant programs driven by pheromone rays.

All four FSM variants share one transition function. Each step reads a single
bit (is there a pheromone on my cell?) and produces an optional emission, a
move and the next control state. The pseudocode macros are flattened as
follows:

* ``go(dir)`` moves once, then keeps moving while the arrival cell is marked.
  The first unmarked arrival cell is where the following instruction runs, so
  ``go(east), emit(), go(west)`` costs exactly one step per cell travelled.
* ``explore(zig, zag)`` alternates the two moves and tests the cell reached by
  each *zag* move. Zig moves land one layer further out, off every axis, so
  they are never tested (except for the pair rule of the synchronous
  programs, see below).

Deviations needed to make the fault-tolerant variants sound:

* The completion marker of layer ``m`` sits at ``(1, m)``, which is the first
  zag cell when exploring layer ``m + 1``. When that first zag cell is marked,
  the ant peeks one cell west: a marked north-ray cell means "completion
  marker, keep zig-zagging"; the unmarked nest means layer 1 and a genuine
  ray end.
* Synchronous fault-tolerant ants may find an east-ray cell whose pair marker
  ``(i, 1)`` was never written because the emitter died in between. A lone
  marked zag cell in the first quadrant is therefore resolved by peeking
  south: the east ray lies under a pair marker, while the real ray end has
  an unmarked cell below it.
"""

from __future__ import annotations

from collections import deque
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

from antgrid.agents.base import CLAIM, COMPLETE, REEXPLORE, Action, AntProgramId, Observation
from antgrid.world import Direction, Position

N, E, S, W, H = (
    Direction.NORTH,
    Direction.EAST,
    Direction.SOUTH,
    Direction.WEST,
    Direction.HOLD,
)


class Phase(str, Enum):
    # Back along the north ray to the nest, then start a new cycle.
    HOME = "home"
    # Ray extension (go out, emit at the first free cell, come back).
    EAST_SEEK = "east-seek"
    EAST_BACK = "east-back"
    SOUTH_SEEK = "south-seek"
    SOUTH_BACK = "south-back"
    WEST_SEEK = "west-seek"
    WEST_BACK = "west-back"
    NORTH_SEEK = "north-seek"
    # Synchronous eastern extension.
    NEWBIE_EAST = "newbie-east"
    NEWBIE_IDLE = "newbie-idle"
    NEWBIE_CHECK = "newbie-check"
    NEWBIE_BACK_EXTENDED = "newbie-back-extended"
    NEWBIE_BACK_RETRY = "newbie-back-retry"
    VETERAN_EAST = "veteran-east"
    VETERAN_UP = "veteran-up"
    VETERAN_DOWN = "veteran-down"
    # Layer exploration. "*_ZAG": standing on a zig cell, next move is the zag.
    # "*_ZIG": just arrived by a zag move, test the cell.
    Q1_ZAG_FIRST = "q1-zag-first"
    Q1_ZIG_FIRST = "q1-zig-first"
    PEEK_WEST = "peek-west"
    PEEK_WEST_RESUME = "peek-west-resume"
    PEEK_WEST_TURN = "peek-west-turn"
    Q1_ZAG = "q1-zag"
    Q1_ZIG = "q1-zig"
    Q1_ZIG_PAIR = "q1-zig-pair"
    PEEK_SOUTH = "peek-south"
    PEEK_SOUTH_RESUME = "peek-south-resume"
    Q2_ZAG = "q2-zag"
    Q2_ZIG = "q2-zig"
    Q3_ZAG = "q3-zag"
    Q3_ZIG = "q3-zig"
    Q4_ZAG = "q4-zag"
    Q4_ZIG = "q4-zig"
    # Fault-tolerant completion marker and verification descent.
    MARK = "mark"
    MARK_BACK = "mark-back"
    VERIFY = "verify"
    VERIFY_CHECK = "verify-check"
    VERIFY_BACK = "verify-back"


class FsmState(NamedTuple):
    program: AntProgramId
    phase: Phase
    newbie: bool = False


_VARIANTS = {
    # program: (synchronous, fault tolerant)
    AntProgramId.ASYNC_FSM: (False, False),
    AntProgramId.SYNC_FSM: (True, False),
    AntProgramId.ASYNC_FT_FSM: (False, True),
    AntProgramId.SYNC_FT_FSM: (True, True),
}


def initial_fsm_state(program: AntProgramId) -> FsmState:
    program = AntProgramId(program)
    if program not in _VARIANTS:
        raise ValueError(f"{program} is not an FSM program")
    sync, _ = _VARIANTS[program]
    return FsmState(program, Phase.HOME, newbie=sync)


@lru_cache(maxsize=None)
def fsm_transition(s: FsmState, sensed: bool) -> tuple[Action, FsmState]:
    """Pure transition: (state, pheromone bit) -> (action, next state)."""
    sync, ft = _VARIANTS[s.program]
    emit, move, phase, newbie = _step(s.phase, s.newbie, sensed, sync, ft)
    return Action(emit, move), FsmState(s.program, phase, newbie)


def _explore_start(ft: bool) -> Phase:
    return Phase.Q1_ZAG_FIRST if ft else Phase.Q1_ZAG


def _east_start(newbie: bool, sync: bool) -> Phase:
    if not sync:
        return Phase.EAST_SEEK
    return Phase.NEWBIE_EAST if newbie else Phase.VETERAN_EAST


def _step(p: Phase, newbie: bool, s: bool, sync: bool, ft: bool):
    P = Phase
    if p is P.HOME:
        if s:
            return False, S, P.HOME, newbie
        return False, E, _east_start(newbie, sync), newbie

    if p is P.EAST_SEEK:
        if s:
            return False, E, P.EAST_SEEK, newbie
        return True, W, P.EAST_BACK, newbie
    if p is P.NEWBIE_EAST:
        return not s, N, P.NEWBIE_IDLE, newbie
    if p is P.NEWBIE_IDLE:
        return False, H, P.NEWBIE_CHECK, newbie
    if p is P.NEWBIE_CHECK:
        if s:
            return False, S, P.NEWBIE_BACK_RETRY, newbie
        return True, S, P.NEWBIE_BACK_EXTENDED, newbie
    if p is P.NEWBIE_BACK_EXTENDED:
        return False, W, P.EAST_BACK, newbie
    if p is P.NEWBIE_BACK_RETRY:
        return False, E, P.NEWBIE_EAST, newbie
    if p is P.VETERAN_EAST:
        if s:
            return False, E, P.VETERAN_EAST, newbie
        return True, N, P.VETERAN_UP, newbie
    if p is P.VETERAN_UP:
        return True, S, P.VETERAN_DOWN, newbie
    if p is P.VETERAN_DOWN:
        return False, W, P.EAST_BACK, newbie

    if p is P.EAST_BACK:
        if s:
            return False, W, P.EAST_BACK, newbie
        return False, S, P.SOUTH_SEEK, newbie
    if p is P.SOUTH_SEEK:
        if s:
            return False, S, P.SOUTH_SEEK, newbie
        return True, N, P.SOUTH_BACK, newbie
    if p is P.SOUTH_BACK:
        if s:
            return False, N, P.SOUTH_BACK, newbie
        return False, W, P.WEST_SEEK, newbie
    if p is P.WEST_SEEK:
        if s:
            return False, W, P.WEST_SEEK, newbie
        return True, E, P.WEST_BACK, newbie
    if p is P.WEST_BACK:
        if s:
            return False, E, P.WEST_BACK, newbie
        return False, N, P.NORTH_SEEK, newbie
    if p is P.NORTH_SEEK:
        if s:
            return False, N, P.NORTH_SEEK, newbie
        # Claim the layer; the first zig of quadrant 1 follows immediately.
        return True, E, _explore_start(ft), False

    # Quadrant 1: zig east, zag south.
    if p is P.Q1_ZAG_FIRST:
        return False, S, P.Q1_ZIG_FIRST, newbie
    if p is P.Q1_ZIG_FIRST:
        if s:
            return False, W, P.PEEK_WEST, newbie
        return False, E, P.Q1_ZAG, newbie
    if p is P.PEEK_WEST:
        if s:
            return False, E, P.PEEK_WEST_RESUME, newbie
        return False, E, P.PEEK_WEST_TURN, newbie
    if p is P.PEEK_WEST_RESUME:
        return False, E, P.Q1_ZAG, newbie
    if p is P.PEEK_WEST_TURN:
        return False, S, P.Q2_ZAG, newbie
    if p is P.Q1_ZAG:
        if sync and s:
            return False, S, P.Q1_ZIG_PAIR, newbie
        return False, S, P.Q1_ZIG, newbie
    if p is P.Q1_ZIG:
        if s and not sync:
            return False, S, P.Q2_ZAG, newbie
        if s and ft:
            return False, S, P.PEEK_SOUTH, newbie
        return False, E, P.Q1_ZAG, newbie
    if p is P.Q1_ZIG_PAIR:
        if s:
            return False, S, P.Q2_ZAG, newbie
        return False, E, P.Q1_ZAG, newbie
    if p is P.PEEK_SOUTH:
        if s:
            return False, N, P.PEEK_SOUTH_RESUME, newbie
        # Standing on the first zig cell of quadrant 2.
        return False, W, P.Q2_ZIG, newbie
    if p is P.PEEK_SOUTH_RESUME:
        return False, E, P.Q1_ZAG, newbie

    # Quadrant 2: zig south, zag west.
    if p is P.Q2_ZAG:
        return False, W, P.Q2_ZIG, newbie
    if p is P.Q2_ZIG:
        if s:
            return False, W, P.Q3_ZAG, newbie
        return False, S, P.Q2_ZAG, newbie
    # Quadrant 3: zig west, zag north.
    if p is P.Q3_ZAG:
        return False, N, P.Q3_ZIG, newbie
    if p is P.Q3_ZIG:
        if s:
            return False, N, P.Q4_ZAG, newbie
        return False, W, P.Q3_ZAG, newbie
    # Quadrant 4: zig north, zag east; ends back on the north ray.
    if p is P.Q4_ZAG:
        return False, E, P.Q4_ZIG, newbie
    if p is P.Q4_ZIG:
        if not s:
            return False, N, P.Q4_ZAG, newbie
        if ft:
            return False, E, P.MARK, newbie
        return False, S, P.HOME, newbie

    if p is P.MARK:
        return True, W, P.MARK_BACK, newbie
    if p is P.MARK_BACK:
        return False, S, P.VERIFY, newbie
    if p is P.VERIFY:
        if s:
            return False, E, P.VERIFY_CHECK, newbie
        return False, E, _east_start(newbie, sync), newbie
    if p is P.VERIFY_CHECK:
        if s:
            return False, W, P.VERIFY_BACK, newbie
        # Unfinished layer: (1, m) is its first zig cell, carry on from there.
        return False, S, P.Q1_ZIG_FIRST, newbie
    if p is P.VERIFY_BACK:
        return False, S, P.VERIFY, newbie

    raise AssertionError(f"unhandled phase {p}")


def fsm_event(prev: FsmState, sensed: bool, pos: Position) -> tuple[str, int] | None:
    """Layer bookkeeping event triggered by taking a step from ``prev`` at ``pos``."""
    p = prev.phase
    if p is Phase.NORTH_SEEK and not sensed:
        return CLAIM, pos[1]
    if p is Phase.Q4_ZIG and sensed:
        return COMPLETE, pos[1]
    if p is Phase.VERIFY_CHECK and not sensed:
        return REEXPLORE, pos[1]
    return None


def reachable_states(program: AntProgramId) -> set[FsmState]:
    """Every control state reachable from the initial state under any observations."""
    start = initial_fsm_state(program)
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for bit in (False, True):
            _, nxt = fsm_transition(s, bit)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _checked(s: FsmState, o: Observation, program: AntProgramId) -> tuple[Action, FsmState]:
    if s.program is not program:
        raise ValueError(f"state belongs to {s.program}, not {program}")
    return fsm_transition(s, bool(o.pheromone_here))


def step_async_fsm(s: FsmState, o: Observation) -> tuple[Action, FsmState]:
    return _checked(s, o, AntProgramId.ASYNC_FSM)


def step_sync_fsm(s: FsmState, o: Observation) -> tuple[Action, FsmState]:
    return _checked(s, o, AntProgramId.SYNC_FSM)


def step_async_ft_fsm(s: FsmState, o: Observation) -> tuple[Action, FsmState]:
    return _checked(s, o, AntProgramId.ASYNC_FT_FSM)


def step_sync_ft_fsm(s: FsmState, o: Observation) -> tuple[Action, FsmState]:
    return _checked(s, o, AntProgramId.SYNC_FT_FSM)
