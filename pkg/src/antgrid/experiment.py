"""Experiment specs, sweep execution and report summaries.

A spec is a JSON object. Scalar keys describe one run; the optional
``sweep`` object lists values per axis and expands into the cartesian
product, in the fixed order program, treasure/distance, k, f, seed,
repetition. Example::

    {"program": "async-fsm", "k": 2, "scheduler": "round-robin",
     "sweep": {"distance": [10, 20, 40], "k": [1, 4]}, "repetitions": 1}

Every report row echoes a complete single-run config. Feeding that echo back
through :func:`parse_config` and :func:`run_experiment` reproduces the row.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

from antgrid.agents import AntProgramId
from antgrid.analysis import (
    MAX_RELATIVE_RESIDUAL,
    FitResult,
    collision_failures,
    coverage_failures,
    fit_complexity,
    pheromone_audit,
    pheromone_bound,
)
from antgrid.errors import AntGridError, ConfigInvalid, TreasureAtNest, Underdetermined
from antgrid.metrics import RunMetrics
from antgrid.scheduler import FaultPlan, RunConfig, ScheduleStrategy, Simulation
from antgrid.world import NEST, Position, manhattan_distance

log = logging.getLogger(__name__)

_SWEEP_AXES = ("program", "treasure", "distance", "k", "f", "seed")
_RUN_KEYS = {
    "program", "k", "treasure", "distance", "mode", "strategy", "scheduler", "seed",
    "emission", "faults", "f", "budget", "pheromone_budget", "max_steps",
    "tm_listing_mode", "sweep", "repetitions", "trace_dir", "workers",
}


# ---------------------------------------------------------------------------
# Treasure placement


def _rotate(p: Position, quarter_turns: int) -> Position:
    for _ in range(quarter_turns % 4):
        p = Position(-p.y, p.x)
    return p


def placement_candidates(D: int) -> list[Position]:
    """Axis, near-axis and diagonal cells at distance ``D``, each in four rotations."""
    if D < 1:
        raise TreasureAtNest()
    bases = [Position(D, 0), Position(D - 1, 1), Position((D + 1) // 2, D // 2)]
    out: list[Position] = []
    for b in bases:
        for r in range(4):
            p = _rotate(b, r)
            if p not in out:
                out.append(p)
    return out


def place_treasure(D: int, seed: int) -> Position:
    """Deterministic placement at distance ``D``, cycled by ``seed``."""
    cands = placement_candidates(D)
    return cands[seed % len(cands)]


# ---------------------------------------------------------------------------
# Spec parsing


@dataclass
class ExperimentSpec:
    base: dict[str, Any]
    axes: dict[str, list] = field(default_factory=dict)
    repetitions: int = 1
    trace_dir: str | None = None
    workers: int = 1
    # Relative script and fault file paths resolve against this directory.
    base_dir: Path | None = None

    def cell_params(self) -> list[dict[str, Any]]:
        names = [a for a in _SWEEP_AXES if a in self.axes]
        cells = []
        for combo in itertools.product(*(self.axes[a] for a in names)):
            params = dict(self.base)
            for name, value in zip(names, combo):
                if name == "treasure":
                    params.pop("distance", None)
                elif name == "distance":
                    params.pop("treasure", None)
                params[name] = value
            for rep in range(self.repetitions):
                p = dict(params)
                p["seed"] = int(p.get("seed", 0)) + rep
                cells.append(p)
        return cells

    def cells(self) -> list[RunConfig]:
        """Expand into validated run configs (raises on the first bad cell)."""
        return [build_run_config(p, self.base_dir).validate() for p in self.cell_params()]


def _parse_treasure(value: Any, field_name: str = "treasure") -> Position:
    try:
        if isinstance(value, str):
            x, y = (int(v) for v in value.split(","))
        else:
            x, y = (int(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigInvalid(field_name, f"expected X,Y, got {value!r}") from e
    p = Position(x, y)
    if p == NEST:
        raise TreasureAtNest()
    return p


def _parse_scheduler(value: Any, seed: int, base_dir: Path | None) -> ScheduleStrategy:
    if isinstance(value, dict):
        return ScheduleStrategy.from_dict(value)
    if isinstance(value, list):
        return ScheduleStrategy.scripted(value)
    if value in (None, "round-robin"):
        return ScheduleStrategy.round_robin()
    if value == "random":
        return ScheduleStrategy.seeded_random(seed)
    if isinstance(value, str) and value.startswith("script:"):
        path = Path(value[len("script:"):])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            ids = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigInvalid("scheduler", f"cannot read script {path}: {e}") from e
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise ConfigInvalid("scheduler", "script must be a JSON array of ant ids")
        return ScheduleStrategy.scripted(ids)
    raise ConfigInvalid("scheduler", f"unknown scheduler {value!r}")


def _parse_faults(value: Any, f: int | None, seed: int, base_dir: Path | None) -> FaultPlan:
    if isinstance(value, str):
        if value.startswith("random:"):
            try:
                count = int(value[len("random:"):])
            except ValueError as e:
                raise ConfigInvalid("faults", f"bad fault count in {value!r}") from e
            return FaultPlan.seeded_random(count, seed)
        path = Path(value)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            value = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigInvalid("faults", f"cannot read fault file {path}: {e}") from e
    try:
        plan = FaultPlan.from_dict(value)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigInvalid("faults", f"malformed fault plan: {e}") from e
    if f:
        plan = FaultPlan(plan.kills, f, seed, plan.horizon, plan.deepest)
    return plan


def build_run_config(params: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    """Turn one cell's flat parameter dict into a :class:`RunConfig`."""
    seed = int(params.get("seed", 0))
    try:
        program = AntProgramId(params.get("program", "async-fsm"))
    except ValueError as e:
        choices = ", ".join(p.value for p in AntProgramId)
        raise ConfigInvalid("program", f"unknown program {params.get('program')!r}; choose from {choices}") from e
    k = params.get("k", 1)
    if not isinstance(k, int) or isinstance(k, bool):
        raise ConfigInvalid("k", f"expected an integer, got {k!r}")
    if params.get("treasure") is not None:
        treasure = _parse_treasure(params["treasure"])
    elif params.get("distance") is not None:
        D = params["distance"]
        if not isinstance(D, int) or D < 1:
            raise ConfigInvalid("distance", f"expected an integer >= 1, got {D!r}")
        treasure = place_treasure(D, seed)
    else:
        raise ConfigInvalid("treasure", "either treasure or distance is required")
    strategy = params.get("strategy")
    if strategy is None:
        strategy = params.get("scheduler")
    budget = params.get("pheromone_budget", params.get("budget"))
    return RunConfig(
        program=program,
        k=k,
        treasure=treasure,
        strategy=_parse_scheduler(strategy, seed, base_dir),
        emission=params.get("emission"),
        faults=_parse_faults(params.get("faults"), params.get("f"), seed, base_dir),
        max_steps=params.get("max_steps"),
        pheromone_budget=budget,
        mode=params.get("mode"),
        tm_listing_mode=bool(params.get("tm_listing_mode", False)),
    )


def parse_config(path: str | os.PathLike | None = None, overrides: dict[str, Any] | None = None) -> ExperimentSpec:
    """Load a JSON spec (optional) and apply flag ``overrides`` on top.

    Validates every cell; errors carry the offending field path.
    """
    data: dict[str, Any] = {}
    base_dir = None
    if path is not None:
        base_dir = Path(path).parent
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigInvalid("config", f"cannot read {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigInvalid("config", f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigInvalid("config", "top level must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("treasure", "distance"):
            data.pop("treasure", None)
            data.pop("distance", None)
            if isinstance(data.get("sweep"), dict):
                data["sweep"].pop("treasure", None)
                data["sweep"].pop("distance", None)
        data[key] = value
    unknown = set(data) - _RUN_KEYS
    if unknown:
        raise ConfigInvalid(sorted(unknown)[0], "unknown field")
    sweep = data.pop("sweep", None) or {}
    if not isinstance(sweep, dict):
        raise ConfigInvalid("sweep", "must be an object of axis -> list")
    axes = {}
    for name, values in sweep.items():
        if name not in _SWEEP_AXES:
            raise ConfigInvalid(f"sweep.{name}", f"unknown axis; choose from {', '.join(_SWEEP_AXES)}")
        if not isinstance(values, list) or not values:
            raise ConfigInvalid(f"sweep.{name}", "must be a non-empty list")
        axes[name] = values
    if "treasure" in axes and "distance" in axes:
        raise ConfigInvalid("sweep", "give treasure or distance, not both")
    reps = data.pop("repetitions", 1)
    if not isinstance(reps, int) or reps < 1:
        raise ConfigInvalid("repetitions", "must be an integer >= 1")
    spec = ExperimentSpec(
        base=data,
        axes=axes,
        repetitions=reps,
        trace_dir=data.pop("trace_dir", None),
        workers=int(data.pop("workers", 1)),
        base_dir=base_dir,
    )
    for i, params in enumerate(spec.cell_params()):
        try:
            cfg = build_run_config(params, base_dir)
            # Flag f >= k later as a per-row AllDead instead of rejecting the sweep.
            if cfg.faults.f < cfg.k:
                cfg.validate()
        except ConfigInvalid as e:
            if spec.axes:
                e.field = f"cell[{i}].{e.field}"
                e.args = (f"{e.field}: {str(e).split(': ', 1)[-1]}",)
            raise
        if cfg.D <= cfg.k:
            log.warning("cell %d: D=%d does not exceed k=%d", i, cfg.D, cfg.k)
    return spec


# ---------------------------------------------------------------------------
# Running


def _verdicts(cfg: RunConfig, sim: Simulation, m: RunMetrics) -> dict[str, Any]:
    D = cfg.D
    cov = coverage_failures(m, sim.world.visited, D)
    checks: dict[str, Any] = {
        "found": m.found,
        "layer_coverage": not cov,
        "nest_unmarked": NEST not in sim.world.pheromones,
    }
    if cfg.mode == "sync" and cfg.program in (AntProgramId.SYNC_FSM, AntProgramId.SYNC_FT_FSM) and not m.failed_ants:
        checks["no_collision"] = not collision_failures(m)
    if cov:
        checks["coverage_failures"] = cov
    return checks


def _audits(cfg: RunConfig, m: RunMetrics) -> dict[str, Any]:
    f = cfg.faults.f
    return {
        "pheromone": pheromone_audit(m, cfg.program, cfg.D, cfg.k, f),
        "pheromone_bound": pheromone_bound(cfg.program, cfg.D, cfg.k, f),
    }


def run_cell(params: dict[str, Any], trace_path: str | None = None, base_dir: Path | None = None) -> dict:
    """Run one cell and return its report row (errors are captured in the row)."""
    row: dict[str, Any] = {"config": None, "metrics": None, "verdicts": None, "audits": None, "error": None}
    try:
        cfg = build_run_config(params, base_dir)
        row["config"] = cfg.to_dict()
        cfg.validate()
    except AntGridError as e:
        row["error"] = e.payload()
        return row
    sim = Simulation(cfg, record_trace=trace_path is not None)
    try:
        m = sim.run()
    except AntGridError as e:
        row["error"] = e.payload()
        m = getattr(e, "metrics", None) or sim.metrics()
    row["metrics"] = m.to_dict()
    row["verdicts"] = _verdicts(cfg, sim, m)
    row["audits"] = _audits(cfg, m)
    if trace_path is not None:
        write_trace(trace_path, sim.trace or [])
    return row


def row_passes(row: dict) -> bool:
    if row.get("error"):
        return False
    v, a = row["verdicts"], row["audits"]
    return all(v[key] for key in ("found", "layer_coverage", "nest_unmarked")) and v.get(
        "no_collision", True
    ) and a["pheromone"]


def write_trace(path: str | os.PathLike, records: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_jsonl(path: str | os.PathLike) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def dump_row(row: dict) -> str:
    return json.dumps(row, separators=(",", ":"))


def _run_cell_args(args: tuple) -> dict:
    return run_cell(*args)


def run_experiment(spec: ExperimentSpec, report: str | os.PathLike | None = None) -> Iterator[dict]:
    """Yield one report row per cell, in cell order; also write them to ``report``."""
    cells = spec.cell_params()
    base_dir = spec.base_dir
    jobs = []
    for i, params in enumerate(cells):
        trace = None
        if spec.trace_dir is not None:
            Path(spec.trace_dir).mkdir(parents=True, exist_ok=True)
            trace = str(Path(spec.trace_dir) / f"cell-{i:05d}.jsonl")
        jobs.append((params, trace, base_dir))
    out = open(report, "w") if report is not None else None
    try:
        if spec.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                rows = pool.map(_run_cell_args, jobs, chunksize=max(1, len(jobs) // (4 * spec.workers)))
                for row in rows:
                    if out:
                        out.write(dump_row(row) + "\n")
                    yield row
        else:
            for job in jobs:
                row = _run_cell_args(job)
                if out:
                    out.write(dump_row(row) + "\n")
                yield row
    finally:
        if out:
            out.close()


# ---------------------------------------------------------------------------
# Summaries


def fit_model_for(program: AntProgramId) -> str:
    return "D+D2/(k-f)+Df" if program.fault_tolerant else "D+D2/k"


def worst_case_samples(rows: Sequence[dict]) -> list[tuple[int, int, int, float]]:
    """Max round count per (D, k, f) cell over all placements and seeds."""
    worst: dict[tuple[int, int, int], int] = {}
    for row in rows:
        if row.get("error") or not row.get("metrics") or not row["metrics"]["found"]:
            continue
        cfg = RunConfig.from_dict(row["config"])
        key = (cfg.D, cfg.k, cfg.faults.f)
        worst[key] = max(worst.get(key, 0), row["metrics"]["rounds"])
    return [(D, k, f, r) for (D, k, f), r in sorted(worst.items())]


def summarize(rows_or_path: str | os.PathLike | Sequence[dict]) -> dict:
    """Per-program round fits and pheromone verdicts for a report.

    Raises :class:`Underdetermined` when a program's rows cannot support a fit.
    """
    rows = read_jsonl(rows_or_path) if isinstance(rows_or_path, (str, os.PathLike)) else list(rows_or_path)
    by_program: dict[str, list[dict]] = {}
    for row in rows:
        if row.get("config"):
            by_program.setdefault(row["config"]["program"], []).append(row)
    out: dict[str, Any] = {"programs": {}, "passed": True}
    for name, prog_rows in sorted(by_program.items()):
        program = AntProgramId(name)
        entry: dict[str, Any] = {
            "rows": len(prog_rows),
            "errors": sum(1 for r in prog_rows if r.get("error")),
            "all_found": all(r.get("metrics") and r["metrics"]["found"] for r in prog_rows),
            "row_verdicts_pass": all(row_passes(r) for r in prog_rows),
            "pheromone_audit_pass": all(r.get("audits") and r["audits"]["pheromone"] for r in prog_rows),
        }
        if program is AntProgramId.TM:
            entry["emissions_le_k"] = all(
                r.get("metrics") and r["metrics"]["pheromone_emissions"] <= r["config"]["k"] for r in prog_rows
            )
        fit = fit_complexity(worst_case_samples(prog_rows), fit_model_for(program))
        entry["fit"] = fit.to_dict()
        entry["fit_pass"] = fit.all_within_bound and fit.max_relative_residual <= MAX_RELATIVE_RESIDUAL
        entry["passed"] = (
            entry["row_verdicts_pass"] and entry["pheromone_audit_pass"] and entry["fit_pass"]
            and entry.get("emissions_le_k", True)
        )
        out["programs"][name] = entry
        out["passed"] = out["passed"] and entry["passed"]
    return out


def summarize_safe(rows_or_path) -> dict:
    """Like :func:`summarize` but records ``Underdetermined`` per program instead of raising."""
    rows = read_jsonl(rows_or_path) if isinstance(rows_or_path, (str, os.PathLike)) else list(rows_or_path)
    by_program: dict[str, list[dict]] = {}
    for row in rows:
        if row.get("config"):
            by_program.setdefault(row["config"]["program"], []).append(row)
    out: dict[str, Any] = {"programs": {}, "passed": True}
    for name, prog_rows in sorted(by_program.items()):
        try:
            entry = summarize(prog_rows)["programs"][name]
        except Underdetermined as e:
            entry = {"rows": len(prog_rows), "passed": False, "error": e.payload()}
        out["programs"][name] = entry
        out["passed"] = out["passed"] and entry["passed"]
    return out


__all__ = [
    "ExperimentSpec",
    "FitResult",
    "build_run_config",
    "dump_row",
    "parse_config",
    "place_treasure",
    "placement_candidates",
    "read_jsonl",
    "row_passes",
    "run_cell",
    "run_experiment",
    "summarize",
    "summarize_safe",
    "worst_case_samples",
    "write_trace",
]
