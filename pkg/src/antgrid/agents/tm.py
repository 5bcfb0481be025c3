"""Counting ants: renaming on the north ray, then a static layer partition.

A TM ant claims the first unmarked north-ray cell ``(0, i)``, taking ``id = i``
and ``total = i``. It then explores layers ``id, id + total, ...`` by dead
reckoning. After every layer it walks the north ray to find the end of the
marked prefix; a longer prefix means more ants joined, so ``total`` grows and
the search restarts from layer ``id + total``.

Only one pheromone per ant is ever emitted.
"""

from __future__ import annotations

from enum import Enum
from typing import NamedTuple

from antgrid.agents.base import CLAIM, COMPLETE, Action, Observation
from antgrid.world import Direction, Position

N, E, S, W = Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST

# (zig, zag) for each quadrant of the diamond walk starting at (0, l).
_QUADRANT_MOVES = ((E, S), (S, W), (W, N), (N, E))


class TmPhase(str, Enum):
    CLIMB_NORTH = "climb-north"
    TRAVEL = "travel"
    EXPLORE_LAYER = "explore-layer"
    DESCEND_VERIFY = "descend-verify"


class TmState(NamedTuple):
    phase: TmPhase = TmPhase.CLIMB_NORTH
    id: int = 0
    total: int = 0
    current_layer: int = 0
    # Dead-reckoned position relative to the nest.
    x: int = 0
    y: int = 0
    # Diamond walk progress: quadrant index and moves made within it.
    quadrant: int = 0
    moves: int = 0
    # Direction of the north-ray probe: +1 looking for the first free cell
    # above, -1 looking for the first marked cell below, 0 not started.
    probe: int = 0
    # Compatibility switch: advance the layer cursor without rewinding when
    # ``total`` grows (the literal reading of the pseudocode listing).
    listing_mode: bool = False

    def counters(self) -> tuple[int, ...]:
        return (self.id, self.total, self.current_layer, abs(self.x), abs(self.y), self.moves)


def initial_tm_state(listing_mode: bool = False) -> TmState:
    return TmState(listing_mode=listing_mode)


def _move(s: TmState, d: Direction, **changes) -> TmState:
    dx, dy = d.delta
    return s._replace(x=s.x + dx, y=s.y + dy, **changes)


def step_tm(s: TmState, o: Observation) -> tuple[Action, TmState]:
    action, nxt, _ = tm_transition(s, bool(o.pheromone_here))
    return action, nxt


def tm_transition(s: TmState, sensed: bool) -> tuple[Action, TmState, tuple[str, int] | None]:
    """One step; the third element is a layer event (claim/complete) if any."""
    emit = False
    event = None
    # Zero-time decisions are resolved in this loop; it always ends in a move.
    while True:
        phase = s.phase
        if phase is TmPhase.CLIMB_NORTH:
            if s.y == 0 or sensed:
                return Action(emit, N), _move(s, N), event
            i = s.y
            emit = True
            s = s._replace(phase=TmPhase.TRAVEL, id=i, total=i, current_layer=i)
            continue

        if phase is TmPhase.TRAVEL:
            if s.x != 0:
                raise AssertionError("TM travel must start on the north axis")
            if s.y < s.current_layer:
                return Action(emit, N), _move(s, N), event
            if s.y > s.current_layer:
                return Action(emit, S), _move(s, S), event
            s = s._replace(phase=TmPhase.EXPLORE_LAYER, quadrant=0, moves=0)
            event = (CLAIM, s.current_layer)
            continue

        if phase is TmPhase.EXPLORE_LAYER:
            l = s.current_layer
            if s.quadrant == 4:
                s = s._replace(phase=TmPhase.DESCEND_VERIFY, quadrant=0, moves=0, probe=0)
                event = (COMPLETE, l)
                continue
            zig, zag = _QUADRANT_MOVES[s.quadrant]
            d = zig if s.moves % 2 == 0 else zag
            moves = s.moves + 1
            if moves == 2 * l:
                return Action(emit, d), _move(s, d, quadrant=s.quadrant + 1, moves=0), event
            return Action(emit, d), _move(s, d, moves=moves), event

        if phase is TmPhase.DESCEND_VERIFY:
            probe = s.probe or (1 if sensed else -1)
            if probe == -1 and not sensed and s.y <= 0:
                s = _advance(s, 0)
                continue
            if probe == 1 and sensed:
                return Action(emit, N), _move(s, N, probe=probe), event
            if probe == -1 and not sensed:
                return Action(emit, S), _move(s, S, probe=probe), event
            marked = s.y - 1 if probe == 1 else s.y
            s = _advance(s, marked)
            continue

        raise AssertionError(f"unhandled phase {phase}")


def _advance(s: TmState, marked: int) -> TmState:
    """Pick the next layer once the marked prefix length is known."""
    if marked > s.total:
        total = marked
        nxt = s.current_layer + total if s.listing_mode else s.id + total
    else:
        total = s.total
        nxt = s.current_layer + total
    return s._replace(phase=TmPhase.TRAVEL, total=total, current_layer=nxt, probe=0)


def tm_event(prev: TmState, sensed: bool, pos: Position) -> tuple[str, int] | None:
    return tm_transition(prev, sensed)[2]
