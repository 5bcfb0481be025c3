"""Run metrics, and their reconstruction from a JSON Lines trace."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from antgrid.agents.base import CLAIM, COMPLETE, REEXPLORE
from antgrid.world import NEST, Direction, Position, manhattan_distance


@dataclass
class RunMetrics:
    rounds: int
    steps_per_ant: list[int]
    pheromone_emissions: int
    distinct_marked_cells: int
    found: bool
    treasure_distance: int
    # layer -> ids of ants that claimed it fresh (north-ray emission for FSM,
    # start of a counted layer walk for TM).
    layer_explorer_log: dict[int, list[int]]
    visited_count: int
    completed_layers: list[int] = field(default_factory=list)
    reexplore_log: dict[int, list[int]] = field(default_factory=dict)
    departed: int = 0
    failed_ants: list[int] = field(default_factory=list)
    total_steps: int = 0
    blocked_emissions: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON object keys are strings; keep layers in ascending order.
        d["layer_explorer_log"] = {str(l): ids for l, ids in sorted(self.layer_explorer_log.items())}
        d["reexplore_log"] = {str(l): ids for l, ids in sorted(self.reexplore_log.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        d = dict(d)
        d["layer_explorer_log"] = {int(l): list(v) for l, v in d["layer_explorer_log"].items()}
        d["reexplore_log"] = {int(l): list(v) for l, v in d.get("reexplore_log", {}).items()}
        return cls(**d)

    @property
    def layers_claimed(self) -> int:
        return len(self.layer_explorer_log)


class LayerLog:
    """Accumulates layer events in arrival order."""

    def __init__(self) -> None:
        self.claims: dict[int, list[int]] = {}
        self.reexplores: dict[int, list[int]] = {}
        self.completed: set[int] = set()
        self.claim_count = 0

    def record(self, kind: str, layer: int, ant: int) -> None:
        if kind == CLAIM:
            self.claims.setdefault(layer, []).append(ant)
            self.claim_count += 1
        elif kind == REEXPLORE:
            self.reexplores.setdefault(layer, []).append(ant)
        elif kind == COMPLETE:
            self.completed.add(layer)


_MOVES = {d.value: d for d in Direction}


def metrics_from_trace(records: list[dict], treasure: Position, k: int) -> RunMetrics:
    """Recompute :class:`RunMetrics` from trace records alone."""
    treasure = Position(*treasure)
    steps = [0] * k
    marks: set[Position] = set()
    emissions = blocked = 0
    visited = {NEST}
    found = False
    rounds = 0
    log = LayerLog()
    failed: list[int] = []
    for rec in records:
        ant = rec["ant_id"]
        action = rec["action"]
        if action == "kill":
            failed.append(ant)
            continue
        pos = Position(*rec["position"])
        steps[ant - 1] += 1
        rounds = rec["round"]
        kind, _, move = action.rpartition("+")
        if kind == "emit":
            emissions += 1
            marks.add(pos)
        elif kind == "blocked":
            blocked += 1
        dest = pos.step(_MOVES[move])
        visited.add(dest)
        if dest == treasure:
            found = True
        if rec.get("event"):
            ev, layer = rec["event"].split(":")
            log.record(ev, int(layer), ant)
    return RunMetrics(
        rounds=rounds,
        steps_per_ant=steps,
        pheromone_emissions=emissions,
        distinct_marked_cells=len(marks),
        found=found,
        treasure_distance=manhattan_distance(treasure),
        layer_explorer_log=log.claims,
        visited_count=len(visited),
        completed_layers=sorted(log.completed),
        reexplore_log=log.reexplores,
        departed=sum(1 for s in steps if s > 0),
        failed_ants=sorted(failed),
        total_steps=sum(steps),
        blocked_emissions=blocked,
    )
