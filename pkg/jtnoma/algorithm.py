"""Joint resource allocation by alternating power control and scheduling."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from jtnoma.feasibility import Tolerances
from jtnoma.instance import NetworkInstance
from jtnoma.qoe import total_qoe
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.schemes import Scheme
from jtnoma.solvers import (
    InfeasibleScheduleError,
    PowerSolveConfig,
    ScheduleSolveConfig,
    SolveReport,
    SolveStatus,
    restore_power_feasibility,
    round_and_repair,
    solve_power,
    solve_schedule,
)
from jtnoma.utils.run_args import SOLVER, check_keys

logger = logging.getLogger(__name__)

# Child index of the instance seed sequence reserved for the initial schedule.
_INIT_STREAM = 2


@dataclass
class AlgorithmSettings:
    """Settings of `run_algorithm1`.

    Attributes:
        max_outer_iters: Alternations of power control and scheduling.
        err_tol: Stop once the total QoE changes by less than this.
        power: Settings of the power sub-problem.
        schedule: Settings of the scheduling sub-problem.
        tolerances: Tolerances of the final feasibility audit.
    """

    max_outer_iters: int = 50
    err_tol: float = 1e-3
    power: PowerSolveConfig = field(default_factory=PowerSolveConfig)
    schedule: ScheduleSolveConfig = field(default_factory=ScheduleSolveConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AlgorithmSettings:
        check_keys(SOLVER, data, cls)
        data = dict(data)
        if "power" in data:
            data["power"] = PowerSolveConfig.from_dict(data["power"])
        if "schedule" in data:
            data["schedule"] = ScheduleSolveConfig.from_dict(data["schedule"])
        if "tolerances" in data:
            check_keys(f"{SOLVER}.tolerances", data["tolerances"], Tolerances)
            data["tolerances"] = Tolerances(**data["tolerances"])
        return cls(**data)


def initial_schedule(
    inst: NetworkInstance, pw: PowerAllocation, scheme: Scheme = Scheme.JT_NOMA
) -> Schedule:
    """Random feasible schedule: uniform relaxed entries passed through the repair.

    Raises:
        InfeasibleScheduleError: If no schedule meets the caps.
    """
    seed = np.random.SeedSequence(inst.config.rng_seed).spawn(_INIT_STREAM + 1)[_INIT_STREAM]
    rng = np.random.default_rng(seed)
    L, G, N = inst.shape
    theta = rng.uniform(size=(L, G))
    eps = rng.uniform(size=(L, G, N))
    relaxed = Schedule.from_relaxed(theta, eps, theta[:, :, None] * eps)
    return round_and_repair(relaxed, inst, pw, scheme)


def run_algorithm1(
    inst: NetworkInstance,
    settings: AlgorithmSettings | None = None,
    scheme: Scheme = Scheme.JT_NOMA,
) -> SolveReport:
    """Alternate `solve_power` and `solve_schedule` until the total QoE settles.

    Starts from `p = p_max / N`, `q = q_max / N` and a random repaired schedule. Every
    iteration re-projects the powers onto the constraints of the new schedule before
    evaluating the exact total QoE.
    """
    settings = settings or AlgorithmSettings()
    started = time.perf_counter()

    pw = PowerAllocation.uniform(inst)
    try:
        sched = initial_schedule(inst, pw, scheme)
    except InfeasibleScheduleError as e:
        logger.warning(f"No initial schedule for scheme {scheme.value}: {e}")
        return SolveReport(
            status=SolveStatus.INFEASIBLE,
            schedule=None,
            power=None,
            scheme=scheme.value,
            message=str(e),
            runtime=time.perf_counter() - started,
        )
    pw = restore_power_feasibility(inst, sched, pw, settings.tolerances)

    report = SolveReport(
        status=SolveStatus.NOT_CONVERGED, schedule=sched, power=pw, scheme=scheme.value
    )
    previous = total_qoe(inst, sched, pw)
    report.utility_trace.append(previous)
    best = (previous, sched, pw, 0)
    converged = False
    iteration = 0

    for iteration in range(1, settings.max_outer_iters + 1):  # noqa: B007
        pw, power_report = solve_power(inst, sched, pw, settings.power)
        sched, schedule_report = solve_schedule(inst, pw, sched, settings.schedule, scheme)
        for row in (*power_report.trace, *schedule_report.trace):
            report.trace.append({**row, "round": iteration})
        if schedule_report.status is SolveStatus.INFEASIBLE:
            report.message = schedule_report.message
            break
        pw = restore_power_feasibility(inst, sched, pw, settings.tolerances)

        utility = total_qoe(inst, sched, pw)
        report.utility_trace.append(utility)
        logger.info(
            f"[{scheme.value}] iteration {iteration}: total QoE {utility:.6f}"
            f" (change {utility - previous:+.3g})"
        )
        if utility > best[0]:
            best = (utility, sched, pw, iteration)
        if abs(utility - previous) < settings.err_tol:
            converged = True
            break
        previous = utility

    report.best_iteration = len(report.utility_trace) - 1
    if not converged:
        _, sched, pw, report.best_iteration = best
        logger.warning(
            f"[{scheme.value}] no convergence after {iteration} iterations,"
            " returning the best iterate"
        )

    report.schedule, report.power = sched, pw
    report.iterations = iteration
    report.audit(inst, settings.tolerances)
    report.runtime = time.perf_counter() - started
    if not report.feasible:
        report.status = SolveStatus.INFEASIBLE
        report.message = report.message or f"constraints violated: {report.verdict}"
    elif converged:
        report.status = SolveStatus.CONVERGED
    return report
