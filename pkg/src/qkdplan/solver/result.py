from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

STATUSES = ("optimal", "gap-limit", "time-limit", "solution-limit", "infeasible", "unbounded")


class NumericalError(RuntimeError):
    """The simplex could not make reliable progress (singular basis, iteration cap)."""


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules and tolerances (7200 s, 1% relative gap, 200 incumbents)."""

    time_limit_s: float = 7200.0
    mip_gap: float = 0.01
    solution_limit: int = 200
    feas_tol: float = 1e-6
    opt_tol: float = 1e-7
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.time_limit_s > 0:
            raise ValueError("time_limit_s must be > 0")
        if not 0 <= self.mip_gap < 1:
            raise ValueError("mip_gap must be in [0, 1)")
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.solution_limit < 1:
            raise ValueError("solution_limit must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def relative_gap(objective: float, bound: float) -> float:
    if objective is None or not math.isfinite(objective) or not math.isfinite(bound):
        return math.inf
    return max(0.0, bound - objective) / max(abs(objective), 1e-10)


@dataclass
class SolveResult:
    status: str
    objective: float | None
    bound: float | None
    assignment: dict[str, float] = field(default_factory=dict)
    gap: float = math.inf
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def has_solution(self) -> bool:
        return bool(self.assignment)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return str(x)
            return x

        return {
            "status": self.status,
            "objective": clean(self.objective),
            "bound": clean(self.bound),
            "gap": clean(self.gap),
            "stats": {k: clean(v) for k, v in self.stats.items()},
            "assignment": dict(self.assignment),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SolveResult:
        def num(x):
            return float(x) if isinstance(x, str) else x

        return cls(
            status=data["status"],
            objective=num(data["objective"]),
            bound=num(data["bound"]),
            assignment={k: float(v) for k, v in data.get("assignment", {}).items()},
            gap=num(data.get("gap", math.inf)),
            stats=dict(data.get("stats", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)
