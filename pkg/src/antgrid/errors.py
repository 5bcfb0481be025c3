"""Exception hierarchy shared by the simulator, analysis and CLI."""

from __future__ import annotations


class AntGridError(Exception):
    """Base class for all antgrid errors."""

    code = "error"

    def payload(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ConfigInvalid(AntGridError):
    """A configuration field failed validation.

    ``field`` is a dotted path to the offending entry (``"faults.kills[2]"``).
    """

    code = "ConfigInvalid"

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field

    def payload(self) -> dict:
        return {"error": self.code, "field": self.field, "message": str(self)}


class TreasureAtNest(ConfigInvalid):
    code = "TreasureAtNest"

    def __init__(self) -> None:
        super().__init__("treasure", "treasure must not be placed on the nest (D >= 1)")


class AllDead(ConfigInvalid):
    code = "AllDead"

    def __init__(self, f: int, k: int) -> None:
        super().__init__("faults", f"fault plan kills {f} of {k} ants; need f < k")


class SimulationError(AntGridError):
    pass


class StepCapExceeded(SimulationError):
    code = "StepCapExceeded"

    def __init__(self, max_steps: int, metrics=None) -> None:
        super().__init__(f"treasure not found within {max_steps} steps")
        self.max_steps = max_steps
        self.metrics = metrics


class ScriptExhausted(SimulationError):
    code = "ScriptExhausted"

    def __init__(self, consumed: int, metrics=None) -> None:
        super().__init__(f"scripted schedule ran out after {consumed} entries")
        self.consumed = consumed
        self.metrics = metrics


class BudgetLoopDetected(SimulationError):
    """Every live ant is provably trapped in a pheromone-free periodic walk."""

    code = "BudgetLoopDetected"

    def __init__(self, reports: dict, metrics=None) -> None:
        super().__init__(f"pheromone budget exhausted and {len(reports)} ant(s) loop forever")
        self.reports = reports
        self.metrics = metrics


class NoBudgetExhaustion(AntGridError):
    code = "NoBudgetExhaustion"


class Underdetermined(AntGridError):
    code = "Underdetermined"
