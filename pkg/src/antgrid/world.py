"""The infinite grid: positions, directions, the pheromone field and the treasure.

The grid is sparse. Only marked and visited cells are stored, keyed by
``Position``; coordinates are plain Python ints so there is no overflow bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple


class Position(NamedTuple):
    x: int
    y: int

    def step(self, d: "Direction") -> "Position":
        return Position(self[0] + d.dx, self[1] + d.dy)

    def __str__(self) -> str:
        return f"({self.x},{self.y})"


NEST = Position(0, 0)


class Direction(Enum):
    NORTH = "N"
    EAST = "E"
    SOUTH = "S"
    WEST = "W"
    HOLD = "H"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]


_DELTAS = {
    Direction.NORTH: (0, 1),
    Direction.EAST: (1, 0),
    Direction.SOUTH: (0, -1),
    Direction.WEST: (-1, 0),
    Direction.HOLD: (0, 0),
}
# Plain attributes: enum hashing is slow on the hot path.
for _d, (_dx, _dy) in _DELTAS.items():
    _d.dx, _d.dy = _dx, _dy


def manhattan_distance(p: Position) -> int:
    return abs(p[0]) + abs(p[1])


def layer_cells(l: int) -> set[Position]:
    """All cells at Manhattan distance ``l`` from the nest (``4l`` of them, 1 for l=0)."""
    if l < 0:
        raise ValueError("layer index must be non-negative")
    if l == 0:
        return {NEST}
    cells = set()
    for i in range(l):
        j = l - i
        cells.update(
            (Position(i, j), Position(j, -i), Position(-i, -j), Position(-j, i))
        )
    return cells


def iter_layer(l: int) -> Iterator[Position]:
    """Layer cells in clockwise order starting at ``(0, l)``."""
    if l == 0:
        yield NEST
        return
    for i in range(l):
        yield Position(i, l - i)
    for i in range(l):
        yield Position(l - i, -i)
    for i in range(l):
        yield Position(-i, -(l - i))
    for i in range(l):
        yield Position(-(l - i), i)


class PheromoneMap:
    """Append-only set of marked cells plus a running emission counter.

    Each cell remembers the ordinal at which it was first marked; a
    :class:`SenseView` uses that ordinal as a watermark to answer sensing
    queries as of an earlier instant.
    """

    __slots__ = ("_first_mark", "emit_count")

    def __init__(self) -> None:
        self._first_mark: dict[Position, int] = {}
        self.emit_count = 0

    @property
    def cells(self) -> frozenset[Position]:
        return frozenset(self._first_mark)

    def __contains__(self, p: object) -> bool:
        return p in self._first_mark

    def __len__(self) -> int:
        return len(self._first_mark)

    def __iter__(self) -> Iterator[Position]:
        return iter(self._first_mark)

    def add(self, p: Position) -> None:
        self.emit_count += 1
        if p not in self._first_mark:
            self._first_mark[p] = len(self._first_mark)

    def first_mark(self, p: Position) -> int | None:
        return self._first_mark.get(p)


class SenseView:
    """Read-only view of a pheromone map frozen at construction time."""

    __slots__ = ("_marks", "_watermark")

    def __init__(self, pheromones: PheromoneMap) -> None:
        self._marks = pheromones._first_mark
        self._watermark = len(self._marks)

    def sense(self, p: Position) -> bool:
        ordinal = self._marks.get(p)
        return ordinal is not None and ordinal < self._watermark

    __contains__ = sense


@dataclass
class WorldState:
    """Mutable world owned by a single simulation.

    ``emit`` and ``visit`` mutate in place and return ``self`` so they can be
    chained; nothing is ever removed.
    """

    treasure: Position
    pheromones: PheromoneMap = field(default_factory=PheromoneMap)
    visited: set[Position] = field(default_factory=set)
    found: bool = False
    nest: Position = NEST

    def __post_init__(self) -> None:
        self.treasure = Position(*self.treasure)
        if self.treasure == NEST:
            from antgrid.errors import TreasureAtNest

            raise TreasureAtNest()

    @property
    def treasure_distance(self) -> int:
        return manhattan_distance(self.treasure)


def sense(w: WorldState, p: Position) -> bool:
    return p in w.pheromones


def emit(w: WorldState, p: Position) -> WorldState:
    w.pheromones.add(p)
    return w


def visit(w: WorldState, p: Position) -> WorldState:
    w.visited.add(p)
    if p == w.treasure:
        w.found = True
    return w


def snapshot_round_sense(w: WorldState) -> SenseView:
    """Freeze the pheromone field for one synchronous round."""
    return SenseView(w.pheromones)
