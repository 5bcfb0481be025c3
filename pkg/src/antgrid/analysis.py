"""Post-hoc checks over finished runs.

* :class:`CycleDetector` / :func:`detect_cycle` prove that an ant whose
  pheromone supply is exhausted is stuck in a periodic, pheromone-free walk.
* ``verify_*`` functions check coverage and collision-freedom.
* :func:`fit_complexity` fits round counts to a bound form from above.
* :func:`pheromone_audit` checks emission counts against the linear bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from antgrid.agents import AntProgramId, reachable_states
from antgrid.errors import NoBudgetExhaustion, Underdetermined
from antgrid.metrics import RunMetrics
from antgrid.world import Position, layer_cells, manhattan_distance

# Emission bound used for FSM programs: emissions <= slope * D + intercept.
FSM_PHEROMONE_SLOPE = 8
FSM_PHEROMONE_INTERCEPT = 16
MAX_RELATIVE_RESIDUAL = 0.5


# ---------------------------------------------------------------------------
# Cycle detection


@dataclass
class CycleReport:
    cycle_found: bool
    cycle_start_step: int = -1
    period: int = 0
    displacement: tuple[int, int] = (0, 0)
    covered_radius: int = 0
    detected_at_step: int = -1
    state_count: int = 0
    cycle_cells: tuple[Position, ...] = ()
    prefix_cells: frozenset[Position] = field(default_factory=frozenset)

    @property
    def bounded(self) -> bool:
        return self.cycle_found and self.displacement == (0, 0)

    def in_band(self, p: Position) -> bool:
        """Whether ``p`` can ever be occupied: the prefix or a translate of the cycle."""
        if p in self.prefix_cells:
            return True
        dx, dy = self.displacement
        for c in self.cycle_cells:
            if _on_orbit(p[0] - c[0], p[1] - c[1], dx, dy):
                return True
        return False

    def to_dict(self) -> dict:
        return {
            "cycle_found": self.cycle_found,
            "cycle_start_step": self.cycle_start_step,
            "period": self.period,
            "displacement": list(self.displacement),
            "covered_radius": self.covered_radius,
            "detected_at_step": self.detected_at_step,
            "state_count": self.state_count,
            "cycle_cells": [list(c) for c in self.cycle_cells],
        }


def _on_orbit(ex: int, ey: int, dx: int, dy: int) -> bool:
    """True iff (ex, ey) = n * (dx, dy) for some integer n >= 0."""
    if dx == 0 and dy == 0:
        return ex == 0 and ey == 0
    if dx != 0:
        if ex % dx:
            return False
        n = ex // dx
        return n >= 0 and ey == n * dy
    if ex != 0 or ey % dy:
        return False
    return ey // dy >= 0


class CycleDetector:
    """Incremental detector fed one step at a time.

    Keys on the control state only: two visits to the same state with no
    pheromone sensed in between are a candidate period. The candidate is
    accepted once every translate of the period's path is checked against the
    (frozen) set of marked cells, which makes the report a proof rather than a
    heuristic.
    """

    def __init__(self, marks: Any, state_count: int = 0) -> None:
        self._marks = marks
        self._seen: dict[Hashable, int] = {}
        self._window: list[Position] = []
        self._window_start: int | None = None
        self.state_count = state_count

    def observe(self, step: int, state: Hashable, pos: Position, sensed: bool) -> CycleReport | None:
        if sensed:
            self._seen.clear()
            self._window.clear()
            self._window_start = step + 1
            return None
        if self._window_start is None:
            self._window_start = step
        t1 = self._seen.get(state)
        if t1 is not None:
            offset = t1 - self._window_start
            path = self._window[offset:]
            start = path[0]
            d = (pos[0] - start[0], pos[1] - start[1])
            if self._orbit_clear(path, d):
                return CycleReport(
                    cycle_found=True,
                    cycle_start_step=t1,
                    period=step - t1,
                    displacement=d,
                    detected_at_step=step,
                    state_count=self.state_count,
                    cycle_cells=tuple(path),
                )
        self._seen[state] = step
        self._window.append(pos)
        return None

    def _orbit_clear(self, path: Sequence[Position], d: tuple[int, int]) -> bool:
        dx, dy = d
        for m in self._marks:
            for c in path:
                if _on_orbit(m[0] - c[0], m[1] - c[1], dx, dy):
                    return False
        return True


@dataclass
class StepRecord:
    step: int
    position: Position
    state: Hashable
    sensed: bool


@dataclass
class AntTrace:
    """Per-step log of one ant plus the pheromone context of its run.

    ``exhausted_at`` is the index of the first step at which no emission was
    possible any more (``None`` while the budget lasts or if there is none).
    """

    records: list[StepRecord]
    marks: frozenset[Position]
    budget: int | None
    exhausted_at: int | None


def detect_cycle(trace: AntTrace, program: AntProgramId | str) -> CycleReport:
    program = AntProgramId(program)
    state_count = len(reachable_states(program)) if program.is_fsm else 0
    if trace.budget is None:
        return CycleReport(cycle_found=False, state_count=state_count)
    if trace.exhausted_at is None:
        raise NoBudgetExhaustion(
            f"budget {trace.budget} not exhausted within {len(trace.records)} steps"
        )
    det = CycleDetector(trace.marks, state_count)
    for rec in trace.records:
        if rec.step >= trace.exhausted_at:
            report = det.observe(rec.step, rec.state, rec.position, rec.sensed)
            if report is not None:
                before = [r.position for r in trace.records if r.step < report.cycle_start_step]
                report.prefix_cells = frozenset(before)
                cells = list(before) + list(report.cycle_cells)
                report.covered_radius = max(manhattan_distance(c) for c in cells)
                return report
    return CycleReport(cycle_found=False, state_count=state_count)


# ---------------------------------------------------------------------------
# Verifiers


def coverage_failures(metrics: RunMetrics, visited: Iterable[Position], D: int) -> list[dict]:
    """Completed layers with an unvisited cell, as ``{"layer", "cell"}`` entries."""
    visited = visited if isinstance(visited, (set, frozenset)) else set(visited)
    failures = []
    for l in sorted(metrics.completed_layers):
        for c in sorted(layer_cells(l)):
            if c not in visited:
                failures.append({"layer": l, "cell": [c[0], c[1]]})
                break
    return failures


def verify_layer_coverage(metrics: RunMetrics, visited: Iterable[Position], D: int) -> bool:
    return not coverage_failures(metrics, visited, D)


def collision_failures(metrics: RunMetrics) -> list[dict]:
    return [
        {"layer": l, "ants": ids}
        for l, ids in sorted(metrics.layer_explorer_log.items())
        if len(ids) != 1
    ]


def verify_no_collision(metrics: RunMetrics) -> bool:
    return not collision_failures(metrics)


# ---------------------------------------------------------------------------
# Complexity fitting

MODELS = {
    "D+D2/k": ("c1*D + c2*D^2/k", lambda D, k, f: (D, D * D / k)),
    "D+D2/(k-f)+Df": ("c1*D + c2*D^2/(k-f) + c3*D*f", lambda D, k, f: (D, D * D / (k - f), D * f)),
    "D+D2/k+Df": ("c1*D + c2*D^2/k + c3*D*f", lambda D, k, f: (D, D * D / k, D * f)),
}


@dataclass
class FitResult:
    model: str
    coefficients: list[float]
    max_relative_residual: float
    samples: int
    all_within_bound: bool
    formula: str = ""

    def predict(self, D: int, k: int, f: int = 0) -> float:
        cols = MODELS[self.model][1](D, k, f)
        return float(sum(c * x for c, x in zip(self.coefficients, cols)))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "formula": self.formula,
            "coefficients": self.coefficients,
            "max_relative_residual": self.max_relative_residual,
            "samples": self.samples,
            "all_within_bound": self.all_within_bound,
        }


def fit_complexity(samples: Sequence[tuple[int, int, int, float]], model: str = "D+D2/k") -> FitResult:
    """Fit the tightest upper envelope of the given bound form to ``rounds``.

    Samples are ``(D, k, f, rounds)``. Solves the linear program
    ``min u`` subject to ``rounds_i <= bound_i <= u * rounds_i`` with
    non-negative coefficients, i.e. the envelope with the smallest worst-case
    relative gap. The residual reported is ``max (bound - rounds) / bound``.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    if len(samples) < 6:
        raise Underdetermined(f"need >= 6 samples, got {len(samples)}")
    if len({s[0] for s in samples}) < 3 or len({s[1] for s in samples}) < 2:
        raise Underdetermined("samples must span >= 3 distinct D and >= 2 distinct k")
    formula, columns = MODELS[model]
    A = np.array([columns(D, k, f) for D, k, f, _ in samples], dtype=float)
    y = np.array([r for *_, r in samples], dtype=float)
    if np.any(y <= 0):
        raise Underdetermined("round counts must be positive")
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise Underdetermined(f"design matrix for {model} is rank-deficient")
    n = A.shape[1]
    R = A / y[:, None]
    ones = np.ones((len(y), 1))
    res = linprog(
        c=np.r_[np.zeros(n), 1.0],
        A_ub=np.vstack([np.hstack([-R, 0 * ones]), np.hstack([R, -ones])]),
        b_ub=np.r_[-np.ones(len(y)), np.zeros(len(y))],
        bounds=[(0, None)] * n + [(1, None)],
        method="highs",
    )
    if res.status != 0:
        raise Underdetermined(f"envelope fit failed: {res.message}")
    coef = res.x[:n]
    pred = A @ coef
    # The solver works to a tolerance; lift so every sample is inside.
    coef = coef * max(1.0, float(np.max(y / pred)))
    pred = A @ coef
    residual = float(np.max(np.abs(y - pred) / pred))
    return FitResult(
        model=model,
        coefficients=[float(c) for c in coef],
        max_relative_residual=residual,
        samples=len(samples),
        all_within_bound=bool(np.all(y <= pred)),
        formula=formula,
    )


# ---------------------------------------------------------------------------
# Pheromone audit


def pheromone_bound(program: AntProgramId | str, D: int, k: int, f: int = 0) -> int:
    program = AntProgramId(program)
    if program is AntProgramId.TM:
        return k
    return FSM_PHEROMONE_SLOPE * D + FSM_PHEROMONE_INTERCEPT


def pheromone_audit(metrics: RunMetrics, program: AntProgramId | str, D: int, k: int, f: int = 0) -> bool:
    program = AntProgramId(program)
    e = metrics.pheromone_emissions
    if e < metrics.distinct_marked_cells:
        return False
    if program is AntProgramId.TM:
        return e <= metrics.departed <= k
    return e <= pheromone_bound(program, D, k, f)


def relative_residual(measured: float, bound: float) -> float:
    return abs(measured - bound) / bound if bound > 0 else math.inf
