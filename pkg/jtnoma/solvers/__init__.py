from jtnoma.solvers.power import (
    LambdaPolicy,
    PowerProblem,
    PowerSolveConfig,
    refresh_lambda,
    restore_power_feasibility,
    solve_power,
)
from jtnoma.solvers.report import SolveReport, SolveStatus
from jtnoma.solvers.scheduling import (
    InfeasibleScheduleError,
    ScheduleProblem,
    ScheduleSolveConfig,
    binary_forcing_residuals,
    improve_schedule,
    linearization_residuals,
    round_and_repair,
    solve_schedule,
    structurally_feasible,
)

__all__ = [
    "InfeasibleScheduleError",
    "LambdaPolicy",
    "PowerProblem",
    "PowerSolveConfig",
    "ScheduleProblem",
    "ScheduleSolveConfig",
    "SolveReport",
    "SolveStatus",
    "binary_forcing_residuals",
    "improve_schedule",
    "linearization_residuals",
    "refresh_lambda",
    "restore_power_feasibility",
    "round_and_repair",
    "solve_power",
    "solve_schedule",
    "structurally_feasible",
]
