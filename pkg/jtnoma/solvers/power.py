"""Power control with the schedule held fixed.

Maximizes the total QoE over the SBS powers `p` and the MBS powers `q` subject to the
power budgets, PUT rate guarantees, MOS floors and backhaul capacities. The JT cross
term is replaced by its convex upper bound, with the bound parameters refreshed from
the previous iterate at every outer ALM iteration.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import torch

from jtnoma.alm import AlmProblem, AlmSettings, AlmState, outer_loop
from jtnoma.feasibility import POWER_PROBLEM_FAMILIES, Tolerances, is_feasible, violations
from jtnoma.instance import NetworkInstance
from jtnoma.interference import JtLambda, NetworkEvaluation, NetworkModel
from jtnoma.qoe import mos_curve, total_qoe
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.solvers.report import SolveReport, SolveStatus
from jtnoma.utils.run_args import SOLVER, check_keys
from jtnoma.utils.types import as_tensor, to_numpy

logger = logging.getLogger(__name__)

LAMBDA_MIN = 1e-6
LAMBDA_MAX = 1e6
# Slack of the exact versus optimization-model utility check, in MOS units.
MODEL_GAP_TOL = 1e-6


class LambdaPolicy(str, enum.Enum):
    FIXED = "fixed"
    PER_PAIR = "per_pair"


@dataclass
class PowerSolveConfig:
    """Settings of `solve_power`.

    Attributes:
        lambda_policy: `per_pair` refreshes every JT bound parameter to the power ratio
            of the previous iterate, `fixed` uses `fixed_lambda` throughout.
        fixed_lambda: Bound parameter of the `fixed` policy.
        power_floor: Powers below this are treated as off when refreshing parameters.
        floor_slope: Slope of the optimized MOS curve below MOS 1, relative to the slope
            of the curve. Reported utilities always use the clamped curve.
        alm: Settings of the ALM loops.
        tolerances: Feasibility tolerances of the final audit.
        restore_rounds: Rounds of `restore_power_feasibility`.
        bisection_steps: Bisection steps per restoring projection.
    """

    lambda_policy: LambdaPolicy = LambdaPolicy.PER_PAIR
    fixed_lambda: float = 1.0
    power_floor: float = 1e-12
    floor_slope: float = 0.05
    alm: AlmSettings = field(default_factory=AlmSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)
    restore_rounds: int = 5
    bisection_steps: int = 50

    def __post_init__(self) -> None:
        self.lambda_policy = LambdaPolicy(self.lambda_policy)
        if not self.fixed_lambda > 0:
            raise ValueError(f"fixed_lambda={self.fixed_lambda} must be positive")
        if not 0 <= self.floor_slope <= 1:
            raise ValueError(f"floor_slope={self.floor_slope} must be in [0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PowerSolveConfig:
        check_keys(f"{SOLVER}.power", data, cls)
        data = dict(data)
        if "alm" in data:
            check_keys(f"{SOLVER}.power.alm", data["alm"], AlmSettings)
            data["alm"] = AlmSettings(**data["alm"])
        if "tolerances" in data:
            check_keys(f"{SOLVER}.power.tolerances", data["tolerances"], Tolerances)
            data["tolerances"] = Tolerances(**data["tolerances"])
        return cls(**data)


def refresh_lambda(prev: PowerAllocation, power_floor: float = 1e-12) -> np.ndarray:
    """Tight JT bound parameters `lam[a, b, g, n] = p[b, g, n] / p[a, g, n]`.

    Ratios are clipped to `[1e-6, 1e6]`; pairs whose first power is below
    `power_floor` get 1.
    """
    p = np.asarray(prev.p, dtype=np.float64)
    first = p[:, None, :, :]
    second = p[None, :, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.clip(second / first, LAMBDA_MIN, LAMBDA_MAX)
    ratio = np.where(first < power_floor, 1.0, ratio)
    L = p.shape[0]
    ratio[np.arange(L), np.arange(L)] = 1.0
    return ratio


class PowerProblem(AlmProblem):
    """Power sub-problem over the flattened vector `[p, q]`.

    Entries of `p` on inactive links and of `q` on subcarriers no PUT holds are frozen
    at their start value.
    """

    def __init__(
        self,
        inst: NetworkInstance,
        sched: Schedule,
        start: PowerAllocation,
        cfg: PowerSolveConfig,
    ):
        self.inst = inst
        self.cfg = cfg
        self.model = NetworkModel(inst)
        self.curve = mos_curve(inst.config.service)
        self.activation = as_tensor(sched.activation)
        self.precedence = self.model.precedence(sched)

        config = inst.config
        L, G, N = inst.shape
        self._p_shape = (L, G, N)
        self._q_shape = (inst.num_put, N)
        self._p_size = L * G * N

        active_p = self.activation >= 0.5
        active_q = as_tensor(inst.primary_alloc) >= 0.5
        p_max = as_tensor(config.p_max_array)[:, None, None].expand(L, G, N)
        start_p = torch.minimum(as_tensor(start.p), p_max).clamp(min=0.0)
        start_q = as_tensor(start.q).clamp(min=0.0, max=config.q_max)

        p_lower = torch.where(active_p, torch.zeros_like(start_p), start_p)
        p_upper = torch.where(active_p, p_max, start_p)
        q_lower = torch.where(active_q, torch.zeros_like(start_q), start_q)
        q_upper = torch.where(active_q, torch.full_like(start_q, config.q_max), start_q)
        self._bounds = (
            torch.cat([p_lower.flatten(), q_lower.flatten()]),
            torch.cat([p_upper.flatten(), q_upper.flatten()]),
        )
        self._start = torch.cat([start_p.flatten(), start_q.flatten()])

        self.q_max = float(config.q_max)
        self.p_max = as_tensor(config.p_max_array)
        self.backhaul_cap = as_tensor(config.backhaul_cap_array)
        self.bandwidth = float(config.subcarrier_bandwidth)
        self.put_rate_min = as_tensor(config.put_rate_min_array)
        self.mos_min = as_tensor(config.mos_min_array)
        self.primary_alloc = as_tensor(inst.primary_alloc)

        self.jt_lambda: JtLambda = (
            cfg.fixed_lambda
            if cfg.lambda_policy is LambdaPolicy.FIXED
            else refresh_lambda(start, cfg.power_floor)
        )
        self._cache: tuple[torch.Tensor, NetworkEvaluation[torch.Tensor]] | None = None

    @property
    def bounds(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self._bounds

    def initial_point(self) -> torch.Tensor:
        return self._start.clone()

    def split(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        p = x[: self._p_size].reshape(self._p_shape)
        q = x[self._p_size :].reshape(self._q_shape)
        return p, q

    def to_allocation(self, x: torch.Tensor) -> PowerAllocation:
        p, q = self.split(x.detach())
        return PowerAllocation(p=to_numpy(p), q=to_numpy(q))

    def _evaluate(self, x: torch.Tensor) -> NetworkEvaluation[torch.Tensor]:
        if self._cache is not None and self._cache[0] is x:
            return self._cache[1]
        p, q = self.split(x)
        ev = self.model.evaluate(self.activation, p, q, self.precedence, self.jt_lambda)
        self._cache = (x, ev)
        return ev

    def mos(self, x: torch.Tensor) -> torch.Tensor:
        return self.curve.with_floor_slope(self._evaluate(x).sut_rate, self.cfg.floor_slope)

    def utility(self, x: torch.Tensor) -> torch.Tensor:
        return self.mos(x).sum()

    def residuals(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        p, q = self.split(x)
        ev = self._evaluate(x)
        served = (self.activation * p).sum(dim=(1, 2))
        return {
            "mbs_power": ((self.primary_alloc * q).sum() / self.q_max - 1.0).reshape(1),
            "sbs_power": served / self.p_max - 1.0,
            "backhaul": ev.backhaul_rate * self.bandwidth / self.backhaul_cap - 1.0,
            "put_qos": self.put_rate_min - ev.put_rate,
            "mos_floor": self.mos_min - self.curve(ev.sut_rate),
        }

    def before_outer_iteration(self, x: torch.Tensor, state: AlmState) -> None:
        if self.cfg.lambda_policy is LambdaPolicy.PER_PAIR:
            self.jt_lambda = refresh_lambda(self.to_allocation(x), self.cfg.power_floor)
            self._cache = None


def _bisect_scale(feasible_at: Any, steps: int) -> float:
    """Largest scale in [0, 1] at which `feasible_at` holds, assuming it holds at 0."""
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if feasible_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def restore_power_feasibility(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    tol: Tolerances | None = None,
    *,
    rounds: int = 5,
    steps: int = 50,
) -> PowerAllocation:
    """Project powers back onto the budgets, PUT guarantees and backhaul caps.

    Budgets are met by uniform scaling. A PUT short of its rate gets the SBS powers on
    its subcarriers scaled down by bisection; an SBS over its backhaul cap gets all its
    powers scaled down the same way. Powers are never increased. A PUT that misses its
    rate even with all SBSs silent on its subcarriers is left as is.
    """
    tol = tol or Tolerances()
    cfg = inst.config
    model = NetworkModel(inst)
    activation = as_tensor(sched.activation)
    precedence = model.precedence(sched)
    p = np.array(pw.p, dtype=np.float64)
    q = np.array(pw.q, dtype=np.float64)

    total_q = float(np.sum(inst.primary_alloc * q))
    if total_q > cfg.q_max:
        q *= cfg.q_max / total_q
    served = np.einsum("lgn,lgn->l", sched.activation, p)
    over = served > cfg.p_max_array
    p[over] *= (cfg.p_max_array[over] / served[over])[:, None, None]

    put_rate_min = cfg.put_rate_min_array
    backhaul_cap = cfg.backhaul_cap_array
    bandwidth = cfg.subcarrier_bandwidth
    q_t = as_tensor(q)

    def put_rate(p_trial: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return to_numpy(model.put_rate(activation * as_tensor(p_trial), q_t))

    def backhaul(p_trial: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            ev = model.evaluate(activation, as_tensor(p_trial), q_t, precedence)
            return to_numpy(ev.backhaul_rate) * bandwidth

    for _ in range(rounds):
        changed = False
        rates = put_rate(p)
        for m in np.flatnonzero(rates < put_rate_min - tol.rate):
            cols = inst.put_subcarriers(m)

            def put_ok(scale: float, m: int = m, cols: np.ndarray = cols) -> bool:
                trial = p.copy()
                trial[:, :, cols] *= scale
                return bool(put_rate(trial)[m] >= put_rate_min[m])

            if not put_ok(0.0):
                logger.warning(
                    f"PUT {m} misses its rate even without secondary transmissions"
                )
                continue
            p[:, :, cols] *= _bisect_scale(put_ok, steps)
            changed = True

        carried = backhaul(p)
        for l in np.flatnonzero(carried > backhaul_cap + tol.backhaul):

            def backhaul_ok(scale: float, l: int = l) -> bool:
                trial = p.copy()
                trial[l] *= scale
                return bool(backhaul(trial)[l] <= backhaul_cap[l])

            p[l] *= _bisect_scale(backhaul_ok, steps)
            changed = True

        if not changed:
            break
    return PowerAllocation(p=p, q=q)


def solve_power(
    inst: NetworkInstance,
    sched: Schedule,
    start: PowerAllocation,
    cfg: PowerSolveConfig | None = None,
) -> tuple[PowerAllocation, SolveReport]:
    """Maximize the total QoE over the powers with `sched` held fixed.

    The ALM optimizes the convexified model; the result is then projected by
    `restore_power_feasibility` and evaluated with the exact model. A feasible start
    that scores higher than the result is returned instead.
    """
    cfg = cfg or PowerSolveConfig()
    started = time.perf_counter()

    problem = PowerProblem(inst, sched, start, cfg)
    result = outer_loop(problem, cfg.alm, phase="power")
    candidate = restore_power_feasibility(
        inst,
        sched,
        problem.to_allocation(result.solution),
        cfg.tolerances,
        rounds=cfg.restore_rounds,
        steps=cfg.bisection_steps,
    )

    def power_feasible(pw: PowerAllocation) -> bool:
        return is_feasible(
            violations(inst, sched, pw), cfg.tolerances, POWER_PROBLEM_FAMILIES
        ).feasible

    candidate_utility = total_qoe(inst, sched, candidate)
    if power_feasible(start) and total_qoe(inst, sched, start) > candidate_utility:
        logger.info("Power solve did not improve on its feasible start, keeping it")
        candidate = start

    report = SolveReport(
        status=SolveStatus.CONVERGED,
        schedule=sched,
        power=candidate,
        iterations=result.state.t,
    )
    report.extend_trace(result.state.trace, phase="power")
    report.audit(inst, cfg.tolerances, POWER_PROBLEM_FAMILIES)
    report.utility_trace = [row.utility for row in result.state.trace]
    report.model_utility = total_qoe(inst, sched, candidate, problem.jt_lambda)
    if report.utility < report.model_utility - MODEL_GAP_TOL:
        logger.error(
            f"Exact utility {report.utility:.6f} below the convexified model utility"
            f" {report.model_utility:.6f} at the returned point"
        )
    report.runtime = time.perf_counter() - started
    if not report.feasible:
        report.status = SolveStatus.INFEASIBLE
        report.message = f"power constraints violated: {report.verdict}"
    elif not result.converged:
        report.status = SolveStatus.NOT_CONVERGED
        report.message = "ALM did not converge, returning the best iterate"
    logger.info(
        f"Power solve: {report.status.value} after {report.iterations} outer iterations,"
        f" utility {report.utility:.4f}"
    )
    return candidate, report
