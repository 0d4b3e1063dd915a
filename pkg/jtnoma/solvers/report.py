from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable

import numpy as np
import pandas as pd

from jtnoma.feasibility import (
    ConstraintViolations,
    FeasibilityVerdict,
    Tolerances,
    is_feasible,
    violations,
)
from jtnoma.interference import evaluate_network
from jtnoma.qoe import per_user_mos

if TYPE_CHECKING:
    from jtnoma.alm import TraceRow
    from jtnoma.instance import NetworkInstance
    from jtnoma.schedule import PowerAllocation, Schedule

TRACE_COLUMNS = [
    "phase",
    "round",
    "iteration",
    "objective",
    "utility",
    "max_violation",
    "penalty",
    "multiplier_sum",
    "inner_iterations",
]


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    NOT_CONVERGED = "not_converged"
    INFEASIBLE = "infeasible"


@dataclass
class SolveReport:
    """Result of a solve: the returned point, its audit and the convergence trace.

    `utility` and the per-user figures are evaluated with the exact model.
    `best_iteration` is the index into `utility_trace` of the returned point. Power
    solves also set `model_utility`, the utility of the returned point under the
    convexified JT model the solver optimized, which never exceeds `utility`.
    """

    status: SolveStatus
    schedule: Schedule | None
    power: PowerAllocation | None
    utility: float = float("nan")
    model_utility: float = float("nan")
    utility_trace: list[float] = field(default_factory=list)
    best_iteration: int | None = None
    trace: list[dict[str, Any]] = field(default_factory=list)
    verdict: FeasibilityVerdict | None = None
    violations: ConstraintViolations | None = None
    per_user_mos: np.ndarray = field(default_factory=lambda: np.zeros(0))
    per_user_rate: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    runtime: float = 0.0
    scheme: str = ""
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    @property
    def feasible(self) -> bool:
        return self.verdict is not None and self.verdict.feasible

    def audit(
        self,
        inst: NetworkInstance,
        tol: Tolerances | None = None,
        families: Iterable[str] | None = None,
    ) -> SolveReport:
        """Fill utility, per-user figures and the feasibility verdict from the point."""
        if self.schedule is None or self.power is None:
            return self
        self.violations = violations(inst, self.schedule, self.power)
        self.verdict = is_feasible(
            self.violations, tol, None if families is None else tuple(families)
        )
        self.per_user_mos = per_user_mos(inst, self.schedule, self.power)
        self.per_user_rate = evaluate_network(inst, self.schedule, self.power).sut_rate
        self.utility = float(self.per_user_mos.sum())
        return self

    def extend_trace(self, rows: Iterable[TraceRow], *, phase: str, outer: int = 0) -> None:
        for row in rows:
            self.trace.append({"phase": phase, "round": outer, **vars(row)})

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace, columns=TRACE_COLUMNS)
