from jtnoma.alm.core import (
    AlmResult,
    AlmSettings,
    AlmState,
    InnerResult,
    NonFiniteObjectiveError,
    TraceRow,
    augmented_objective,
    inner_maximize,
    max_violation,
    outer_loop,
    update_multiplier,
)
from jtnoma.alm.problem import AlmProblem

__all__ = [
    "AlmProblem",
    "AlmResult",
    "AlmSettings",
    "AlmState",
    "InnerResult",
    "NonFiniteObjectiveError",
    "TraceRow",
    "augmented_objective",
    "inner_maximize",
    "max_violation",
    "outer_loop",
    "update_multiplier",
]
