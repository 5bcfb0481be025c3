"""Runs a population of ants against one world.

Two execution models:

* synchronous: every live, released ant steps once per round. All
  observations in a round are answered from a snapshot taken at the round
  start, then all emissions apply, then all moves. Ants are released one per
  round in id order (``EmissionScheme.ONE_PER_ROUND``).
* asynchronous: a :class:`ScheduleStrategy` picks one ant at a time, and that
  ant's sense/emit/move is atomic against the live world.

Rounds are counted the same way in both: a round ends as soon as every live,
released ant has taken at least one step since the previous boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from antgrid.agents import CLAIM, AntProgramId, get_program, reachable_states
from antgrid.analysis import AntTrace, CycleDetector, CycleReport, StepRecord
from antgrid.errors import (
    AllDead,
    BudgetLoopDetected,
    ConfigInvalid,
    ScriptExhausted,
    StepCapExceeded,
)
from antgrid.metrics import LayerLog, RunMetrics
from antgrid.rng import Xoshiro256
from antgrid.world import NEST, Position, WorldState, manhattan_distance, snapshot_round_sense

log = logging.getLogger(__name__)

__all__ = [
    "EmissionScheme",
    "FaultPlan",
    "RoundClock",
    "RunConfig",
    "ScheduleStrategy",
    "Simulation",
    "default_max_steps",
    "inject_faults",
    "run",
    "run_async",
    "run_sync",
    "snapshot_round_sense",
    "trace_single_ant",
]


class EmissionScheme(str, Enum):
    ONE_PER_ROUND = "one-per-round"
    ON_FIRST_SCHEDULE = "on-first-schedule"


@dataclass(frozen=True)
class ScheduleStrategy:
    """Which ant steps next in asynchronous runs.

    ``kind`` is ``"round-robin"``, ``"random"`` (xoshiro256** seeded with
    ``seed``) or ``"script"`` (the ids in ``script``, in order).
    """

    kind: str = "round-robin"
    seed: int = 0
    script: tuple[int, ...] = ()

    @classmethod
    def round_robin(cls) -> "ScheduleStrategy":
        return cls("round-robin")

    @classmethod
    def seeded_random(cls, seed: int) -> "ScheduleStrategy":
        return cls("random", seed=seed)

    @classmethod
    def scripted(cls, ids: Iterable[int]) -> "ScheduleStrategy":
        return cls("script", script=tuple(int(i) for i in ids))

    @property
    def fair(self) -> bool:
        return self.kind in ("round-robin", "random")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "random":
            d["seed"] = self.seed
        if self.kind == "script":
            d["script"] = list(self.script)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleStrategy":
        return cls(d.get("kind", "round-robin"), int(d.get("seed", 0)), tuple(d.get("script", ())))


@dataclass(frozen=True)
class FaultPlan:
    """Fail-stop faults.

    ``kills``: explicit ``(ant_id, step_index)`` pairs; the ant takes steps
    ``0 .. step_index - 1`` and nothing afterwards.
    ``random_f``/``random_seed``/``horizon``: ``random_f`` distinct ants, each
    killed at a step drawn uniformly from ``[0, horizon)``.
    ``deepest``: ``(claim_ordinal, delay)`` pairs; when the n-th fresh layer
    claim of the run happens, the claiming ant (now the deepest explorer) is
    killed ``delay`` steps later.
    """

    kills: tuple[tuple[int, int], ...] = ()
    random_f: int = 0
    random_seed: int = 0
    horizon: int | None = None
    deepest: tuple[tuple[int, int], ...] = ()

    @property
    def f(self) -> int:
        return len({a for a, _ in self.kills}) + self.random_f + len(self.deepest)

    @classmethod
    def none(cls) -> "FaultPlan":
        return cls()

    @classmethod
    def seeded_random(cls, f: int, seed: int, horizon: int | None = None) -> "FaultPlan":
        return cls(random_f=f, random_seed=seed, horizon=horizon)

    def static_kills(self, k: int, D: int) -> dict[int, int]:
        """Resolve explicit and random kills to ``{ant_id: step_index}``."""
        kills: dict[int, int] = {}
        for ant, step in self.kills:
            kills[ant] = min(step, kills.get(ant, step))
        if self.random_f:
            rng = Xoshiro256(self.random_seed)
            horizon = self.horizon if self.horizon is not None else default_fault_horizon(D, k)
            candidates = [a for a in range(1, k + 1) if a not in kills]
            for ant in sorted(rng.sample(candidates, self.random_f)):
                kills[ant] = rng.below(max(1, horizon))
        return kills

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.kills:
            d["kills"] = [list(p) for p in self.kills]
        if self.random_f:
            d["random"] = {"f": self.random_f, "seed": self.random_seed}
            if self.horizon is not None:
                d["random"]["horizon"] = self.horizon
        if self.deepest:
            d["deepest"] = [list(p) for p in self.deepest]
        return d

    @classmethod
    def from_dict(cls, d: dict | list | None) -> "FaultPlan":
        if not d:
            return cls()
        if isinstance(d, list):
            return cls(kills=tuple((int(a), int(s)) for a, s in d))
        rnd = d.get("random") or {}
        return cls(
            kills=tuple((int(a), int(s)) for a, s in d.get("kills", ())),
            random_f=int(rnd.get("f", 0)),
            random_seed=int(rnd.get("seed", 0)),
            horizon=rnd.get("horizon"),
            deepest=tuple((int(n), int(delay)) for n, delay in d.get("deepest", ())),
        )


def default_fault_horizon(D: int, k: int) -> int:
    """Rough per-ant step count of a fault-free run; random kills land inside it."""
    return 8 * D * D // k + 8 * D


def default_max_steps(D: int, k: int) -> int:
    return 64 * (D * D + k * D + 1000)


@dataclass(frozen=True)
class RunConfig:
    program: AntProgramId
    k: int
    treasure: Position
    strategy: ScheduleStrategy = field(default_factory=ScheduleStrategy)
    emission: EmissionScheme | None = None
    faults: FaultPlan = field(default_factory=FaultPlan)
    max_steps: int | None = None
    pheromone_budget: int | None = None
    # "sync" or "async"; None picks the program's native model (async for TM).
    mode: str | None = None
    tm_listing_mode: bool = False
    detect_loops: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "program", AntProgramId(self.program))
        object.__setattr__(self, "treasure", Position(*self.treasure))
        if self.mode is None:
            object.__setattr__(self, "mode", "sync" if self.program.synchronous_only else "async")
        if self.emission is None:
            default = EmissionScheme.ONE_PER_ROUND if self.mode == "sync" else EmissionScheme.ON_FIRST_SCHEDULE
            object.__setattr__(self, "emission", default)
        else:
            object.__setattr__(self, "emission", EmissionScheme(self.emission))

    @property
    def D(self) -> int:
        return manhattan_distance(self.treasure)

    @property
    def step_cap(self) -> int:
        return self.max_steps if self.max_steps is not None else default_max_steps(self.D, self.k)

    def validate(self) -> "RunConfig":
        if self.k < 1:
            raise ConfigInvalid("k", "need at least one ant")
        if self.treasure == NEST:
            from antgrid.errors import TreasureAtNest

            raise TreasureAtNest()
        if self.mode not in ("sync", "async"):
            raise ConfigInvalid("mode", f"unknown mode {self.mode!r}")
        if self.mode == "sync" and self.program.asynchronous_only:
            raise ConfigInvalid("program", f"{self.program} runs only asynchronously")
        if self.mode == "async" and self.program.synchronous_only:
            raise ConfigInvalid("program", f"{self.program} runs only synchronously")
        if self.mode == "async" and self.emission is not EmissionScheme.ON_FIRST_SCHEDULE:
            raise ConfigInvalid("emission", "asynchronous runs release ants on first schedule")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigInvalid("max_steps", "must be >= 1")
        if self.pheromone_budget is not None and self.pheromone_budget < 0:
            raise ConfigInvalid("pheromone_budget", "must be >= 0")
        if self.faults.f >= self.k:
            raise AllDead(self.faults.f, self.k)
        for i, (ant, step) in enumerate(self.faults.kills):
            if not 1 <= ant <= self.k:
                raise ConfigInvalid(f"faults.kills[{i}]", f"ant id {ant} outside 1..{self.k}")
            if step < 0:
                raise ConfigInvalid(f"faults.kills[{i}]", "step index must be >= 0")
        if self.faults.deepest and not self.program.is_fsm and self.program is not AntProgramId.TM:
            raise ConfigInvalid("faults.deepest", "unsupported program")
        if self.strategy.kind not in ("round-robin", "random", "script"):
            raise ConfigInvalid("strategy.kind", f"unknown strategy {self.strategy.kind!r}")
        for i, ant in enumerate(self.strategy.script):
            if not 1 <= ant <= self.k:
                raise ConfigInvalid(f"strategy.script[{i}]", f"ant id {ant} outside 1..{self.k}")
        return self

    def to_dict(self) -> dict:
        return {
            "program": self.program.value,
            "k": self.k,
            "treasure": [self.treasure.x, self.treasure.y],
            "mode": self.mode,
            "strategy": self.strategy.to_dict(),
            "emission": self.emission.value,
            "faults": self.faults.to_dict(),
            "max_steps": self.max_steps,
            "pheromone_budget": self.pheromone_budget,
            "tm_listing_mode": self.tm_listing_mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(
            program=AntProgramId(d["program"]),
            k=int(d["k"]),
            treasure=Position(*d["treasure"]),
            strategy=ScheduleStrategy.from_dict(d.get("strategy") or {}),
            emission=d.get("emission"),
            faults=FaultPlan.from_dict(d.get("faults")),
            max_steps=d.get("max_steps"),
            pheromone_budget=d.get("pheromone_budget"),
            mode=d.get("mode"),
            tm_listing_mode=bool(d.get("tm_listing_mode", False)),
        )


class RoundClock:
    """Round accounting: a round ends once every member has stepped since the last boundary."""

    def __init__(self, k: int) -> None:
        self.steps_taken = [0] * (k + 1)
        self.round_floor = [0] * (k + 1)
        self.rounds_completed = 0
        self._members: set[int] = set()
        self._pending: set[int] = set()

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self._members)

    @property
    def current_round(self) -> int:
        return self.rounds_completed + 1

    def admit(self, ant: int) -> None:
        self._members.add(ant)
        self._pending.add(ant)

    def remove(self, ant: int) -> None:
        self._members.discard(ant)
        if ant in self._pending:
            self._pending.discard(ant)
            self._maybe_close()

    def record(self, ant: int) -> None:
        self.steps_taken[ant] += 1
        if ant in self._pending:
            self._pending.discard(ant)
            self._maybe_close()

    def _maybe_close(self) -> None:
        if self._members and not self._pending:
            self.rounds_completed += 1
            self.round_floor = list(self.steps_taken)
            self._pending = set(self._members)


@dataclass
class Population:
    """Per-ant arrays, indexed by ant id (slot 0 unused)."""

    k: int
    positions: list[Position]
    states: list[Any]
    alive: list[bool]
    released: list[bool]
    kill_at: list[int | None]

    @classmethod
    def fresh(cls, k: int, initial_state: Callable[[], Any]) -> "Population":
        return cls(
            k=k,
            positions=[NEST] * (k + 1),
            states=[None] + [initial_state() for _ in range(k)],
            alive=[False] + [True] * k,
            released=[False] * (k + 1),
            kill_at=[None] * (k + 1),
        )


def inject_faults(plan: FaultPlan, population: Population, steps: Sequence[int], D: int) -> list[int]:
    """Arm the static kills of ``plan``; returns ants that are dead right away."""
    dead_now = []
    for ant, step in plan.static_kills(population.k, D).items():
        population.kill_at[ant] = step
        if steps[ant] >= step and population.alive[ant]:
            population.alive[ant] = False
            dead_now.append(ant)
    return dead_now


class Simulation:
    """One deterministic run. Call :meth:`run` once."""

    def __init__(
        self,
        cfg: RunConfig,
        *,
        record_trace: bool = False,
        record_states: bool = False,
    ) -> None:
        self.cfg = cfg.validate()
        self.program = get_program(cfg.program, tm_listing_mode=cfg.tm_listing_mode)
        self.world = WorldState(treasure=cfg.treasure)
        self.world.visited.add(NEST)
        self.k = cfg.k
        self.pop = Population.fresh(cfg.k, self.program.initial_state)
        self.clock = RoundClock(cfg.k)
        self.layers = LayerLog()
        self.trace: list[dict] | None = [] if record_trace else None
        self.state_log: list[list[StepRecord]] | None = (
            [[] for _ in range(cfg.k + 1)] if record_states else None
        )
        self.global_step = 0
        self.blocked = 0
        self.failed: list[int] = []
        self.exhausted_at: int | None = None
        self.found_round: int | None = None
        self._deepest = dict(cfg.faults.deepest)
        self._budget = cfg.pheromone_budget
        self._detectors: dict[int, CycleDetector] | None = None
        self._loops: dict[int, CycleReport] = {}
        self._loop_checks = (
            cfg.detect_loops and self._budget is not None and cfg.program.is_fsm
        )
        self._state_count = len(reachable_states(cfg.program)) if self._loop_checks else 0
        for ant in inject_faults(cfg.faults, self.pop, self.clock.steps_taken, cfg.D):
            self._record_death(ant)
        if self._budget is not None and self._budget == 0:
            self.exhausted_at = 0

    # -- helpers -----------------------------------------------------------

    def _record_death(self, ant: int) -> None:
        self.pop.alive[ant] = False
        self.failed.append(ant)
        self.clock.remove(ant)
        if self.trace is not None:
            p = self.pop.positions[ant]
            self.trace.append(
                {
                    "step_index": self.global_step,
                    "round": self.clock.current_round,
                    "ant_id": ant,
                    "action": "kill",
                    "position": [p.x, p.y],
                }
            )

    def _release(self, ant: int) -> None:
        if not self.pop.released[ant]:
            self.pop.released[ant] = True
            if self.pop.alive[ant]:
                self.clock.admit(ant)

    def _decide(self, ant: int, sensed: bool):
        pos = self.pop.positions[ant]
        state = self.pop.states[ant]
        action, nxt, event = self.program.transition(state, sensed, pos)
        if self.state_log is not None:
            self.state_log[ant].append(
                StepRecord(self.clock.steps_taken[ant], pos, state, sensed)
            )
        if self._detectors is not None and ant in self._detectors:
            report = self._detectors[ant].observe(self.clock.steps_taken[ant], state, pos, sensed)
            if report is not None:
                self._loops[ant] = report
                del self._detectors[ant]
        return pos, action, nxt, event

    def _emit(self, pos: Position) -> bool:
        pher = self.world.pheromones
        if self._budget is not None and pher.emit_count >= self._budget:
            self.blocked += 1
            return False
        pher.add(pos)
        if self._budget is not None and pher.emit_count >= self._budget and self.exhausted_at is None:
            self.exhausted_at = self.global_step + 1
        return True

    def _commit(self, ant: int, pos, action, nxt, event, sensed: bool, round_no: int, emitted: bool | None) -> None:
        dest = pos.step(action.move)
        self.pop.positions[ant] = dest
        self.pop.states[ant] = nxt
        w = self.world
        w.visited.add(dest)
        if dest == w.treasure and not w.found:
            w.found = True
            self.found_round = round_no
        if event is not None:
            kind, layer = event
            self.layers.record(kind, layer, ant)
            if kind == CLAIM and self.layers.claim_count in self._deepest:
                delay = self._deepest[self.layers.claim_count]
                kill = self.clock.steps_taken[ant] + 1 + delay
                cur = self.pop.kill_at[ant]
                self.pop.kill_at[ant] = kill if cur is None else min(cur, kill)
        if self.trace is not None:
            if emitted is None:
                act = action.move.value
            else:
                act = ("emit+" if emitted else "blocked+") + action.move.value
            rec = {
                "step_index": self.global_step,
                "round": round_no,
                "ant_id": ant,
                "action": act,
                "position": [pos.x, pos.y],
                "sensed": sensed,
            }
            if event is not None:
                rec["event"] = f"{event[0]}:{event[1]}"
            self.trace.append(rec)
        self.global_step += 1
        self.clock.record(ant)
        kill = self.pop.kill_at[ant]
        if kill is not None and self.clock.steps_taken[ant] >= kill and not w.found:
            self._record_death(ant)

    def _arm_detectors(self) -> None:
        if self._loop_checks and self._detectors is None and self.exhausted_at is not None:
            marks = self.world.pheromones
            self._detectors = {
                a: CycleDetector(marks, self._state_count)
                for a in range(1, self.k + 1)
                if self.pop.alive[a]
            }

    def _check_loops(self) -> None:
        if not self._loop_checks or self._detectors is None:
            return
        live = [a for a in range(1, self.k + 1) if self.pop.alive[a]]
        if all(a in self._loops for a in live):
            t = self.world.treasure
            reports = {a: self._loops[a] for a in live}
            if not any(r.in_band(t) for r in reports.values()):
                raise BudgetLoopDetected(reports, self.metrics())

    # -- main loops --------------------------------------------------------

    def run(self) -> RunMetrics:
        if self.cfg.mode == "sync":
            self._run_sync()
        else:
            self._run_async()
        return self.metrics()

    def _run_sync(self) -> None:
        pop = self.pop
        k = self.k
        cap = self.cfg.step_cap
        one_per_round = self.cfg.emission is EmissionScheme.ONE_PER_ROUND
        if not one_per_round:
            for a in range(1, k + 1):
                self._release(a)
        r = 0
        while True:
            r += 1
            if one_per_round and r <= k:
                self._release(r)
            active = [a for a in range(1, k + 1) if pop.released[a] and pop.alive[a]]
            self._arm_detectors()
            view = snapshot_round_sense(self.world)
            decisions = []
            for a in active:
                sensed = view.sense(pop.positions[a])
                decisions.append((a, sensed) + self._decide(a, sensed))
            emitted_flags = []
            for a, sensed, pos, action, nxt, event in decisions:
                emitted_flags.append(self._emit(pos) if action.emit_pheromone else None)
            for (a, sensed, pos, action, nxt, event), emitted in zip(decisions, emitted_flags):
                self._commit(a, pos, action, nxt, event, sensed, r, emitted)
            if self.world.found:
                return
            if self.global_step >= cap:
                raise StepCapExceeded(cap, self.metrics(rounds=r))
            self._check_loops()

    def _run_async(self) -> None:
        pop = self.pop
        k = self.k
        cap = self.cfg.step_cap
        marks = self.world.pheromones
        for a in range(1, k + 1):
            self._release(a)
        strategy = self.cfg.strategy
        rng = Xoshiro256(strategy.seed) if strategy.kind == "random" else None
        script = strategy.script
        cursor = 0
        rr = 0
        while True:
            if strategy.kind == "round-robin":
                for _ in range(k):
                    rr = rr % k + 1
                    if pop.alive[rr]:
                        break
                ant = rr
            elif rng is not None:
                live = [a for a in range(1, k + 1) if pop.alive[a]]
                ant = live[rng.below(len(live))]
            else:
                if cursor >= len(script):
                    raise ScriptExhausted(cursor, self.metrics())
                ant = script[cursor]
                cursor += 1
                if not pop.alive[ant]:
                    continue
            self._arm_detectors()
            round_no = self.clock.current_round
            pos = pop.positions[ant]
            sensed = pos in marks
            pos, action, nxt, event = self._decide(ant, sensed)
            emitted = self._emit(pos) if action.emit_pheromone else None
            self._commit(ant, pos, action, nxt, event, sensed, round_no, emitted)
            if self.world.found:
                return
            if self.global_step >= cap:
                raise StepCapExceeded(cap, self.metrics())
            if self._detectors is not None:
                self._check_loops()

    # -- results -----------------------------------------------------------

    def metrics(self, rounds: int | None = None) -> RunMetrics:
        w = self.world
        steps = self.clock.steps_taken[1:]
        if rounds is None:
            rounds = self.found_round if self.found_round is not None else self.clock.rounds_completed
        return RunMetrics(
            rounds=rounds,
            steps_per_ant=list(steps),
            pheromone_emissions=w.pheromones.emit_count,
            distinct_marked_cells=len(w.pheromones),
            found=w.found,
            treasure_distance=w.treasure_distance,
            layer_explorer_log={l: list(v) for l, v in self.layers.claims.items()},
            visited_count=len(w.visited),
            completed_layers=sorted(self.layers.completed),
            reexplore_log={l: list(v) for l, v in self.layers.reexplores.items()},
            departed=sum(1 for s in steps if s > 0),
            failed_ants=sorted(self.failed),
            total_steps=self.global_step,
            blocked_emissions=self.blocked,
        )

    def ant_trace(self, ant: int = 1) -> AntTrace:
        if self.state_log is None:
            raise ValueError("simulation was created without record_states=True")
        return AntTrace(
            records=list(self.state_log[ant]),
            marks=frozenset(self.world.pheromones.cells),
            budget=self._budget,
            exhausted_at=self._ant_exhaustion_step(ant),
        )

    def _ant_exhaustion_step(self, ant: int) -> int | None:
        """Translate the global exhaustion instant to the ant's own step index."""
        if self.exhausted_at is None or self.state_log is None:
            return None
        if self.k == 1:
            return self.exhausted_at
        steps_before = 0
        for rec in self.trace or []:
            if rec["step_index"] >= self.exhausted_at:
                break
            if rec["ant_id"] == ant and rec["action"] != "kill":
                steps_before += 1
        return steps_before


def run(cfg: RunConfig, **kwargs) -> RunMetrics:
    return Simulation(cfg, **kwargs).run()


def run_sync(cfg: RunConfig, **kwargs) -> RunMetrics:
    if cfg.mode != "sync":
        cfg = replace(cfg, mode="sync", emission=None)
    return run(cfg, **kwargs)


def run_async(cfg: RunConfig, **kwargs) -> RunMetrics:
    if cfg.mode != "async":
        cfg = replace(cfg, mode="async", emission=None)
    return run(cfg, **kwargs)


def trace_single_ant(
    program: AntProgramId | str,
    budget: int | None,
    steps: int,
    *,
    treasure: Position = Position(10**9, 0),
) -> tuple[Simulation, AntTrace]:
    """Run one ant for ``steps`` steps (no loop short-circuit) and return its trace."""
    program = AntProgramId(program)
    cfg = RunConfig(
        program=program,
        k=1,
        treasure=treasure,
        max_steps=steps,
        pheromone_budget=budget,
        detect_loops=False,
    )
    sim = Simulation(cfg, record_states=True)
    try:
        sim.run()
    except StepCapExceeded:
        pass
    return sim, sim.ant_trace(1)
