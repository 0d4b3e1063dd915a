"""Association and subcarrier scheduling with the powers held fixed.

The binary variables `theta`, `eps` and their product `chi` are relaxed to [0, 1]. The
product is linearized by three inequalities per entry and the binary domain is forced
back by the summed residuals `sum(x - x^2) <= 0`, one per tensor. The relaxed solution
of the ALM is rounded, repaired to satisfy every structural constraint exactly, and
polished by a greedy local search.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import torch

from jtnoma.alm import AlmProblem, AlmSettings, AlmState, outer_loop
from jtnoma.feasibility import STRUCTURAL_FAMILIES, Tolerances
from jtnoma.instance import NetworkInstance
from jtnoma.interference import NetworkEvaluation, NetworkModel
from jtnoma.qoe import mos_curve
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.schemes import Scheme, scheme_residuals, scheme_satisfied
from jtnoma.solvers.report import SolveReport, SolveStatus
from jtnoma.utils.run_args import SOLVER, check_keys
from jtnoma.utils.types import as_tensor, to_numpy

logger = logging.getLogger(__name__)


class InfeasibleScheduleError(RuntimeError):
    """Raised when no schedule meets the association and subcarrier minimums under the caps."""


@dataclass
class ScheduleSolveConfig:
    """Settings of `solve_schedule`.

    Attributes:
        alm: Settings of the ALM loops.
        threshold: Rounding threshold of the relaxed solution.
        start_weight: The relaxed start is `w * start + (1 - w) / 2`.
        improve: Run the greedy local search after repair.
        improve_candidates: Moves of each kind tried per pass.
        improve_passes: Passes of the local search.
        tolerances: Feasibility tolerances of the final audit.
    """

    alm: AlmSettings = field(default_factory=AlmSettings)
    threshold: float = 0.5
    start_weight: float = 0.75
    improve: bool = True
    improve_candidates: int = 16
    improve_passes: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold={self.threshold} must lie in (0, 1)")
        if not 0.0 <= self.start_weight <= 1.0:
            raise ValueError(f"start_weight={self.start_weight} must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ScheduleSolveConfig:
        check_keys(f"{SOLVER}.schedule", data, cls)
        data = dict(data)
        if "alm" in data:
            check_keys(f"{SOLVER}.schedule.alm", data["alm"], AlmSettings)
            data["alm"] = AlmSettings(**data["alm"])
        if "tolerances" in data:
            check_keys(f"{SOLVER}.schedule.tolerances", data["tolerances"], Tolerances)
            data["tolerances"] = Tolerances(**data["tolerances"])
        return cls(**data)


def linearization_residuals(s: Schedule) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residuals `chi - theta`, `chi - eps` and `theta + eps - 1 - chi` per `(l, g, n)`."""
    theta = np.asarray(s.theta)[:, :, None]
    eps = np.asarray(s.eps)
    chi = np.asarray(s.chi)
    return chi - theta, chi - eps, theta + eps - 1.0 - chi


def binary_forcing_residuals(s: Schedule) -> tuple[float, float, float]:
    """`sum(x - x^2)` of `theta`, `eps` and `chi`; zero exactly at binary points."""
    return tuple(  # type: ignore[return-value]
        float(np.sum(x - x * x)) for x in (s.theta, s.eps, s.chi)
    )


class ScheduleProblem(AlmProblem):
    """Relaxed scheduling over the flattened vector `[theta, eps, chi]`."""

    def __init__(
        self,
        inst: NetworkInstance,
        pw: PowerAllocation,
        start: Schedule,
        cfg: ScheduleSolveConfig,
        scheme: Scheme = Scheme.JT_NOMA,
    ):
        self.inst = inst
        self.cfg = cfg
        self.scheme = scheme
        self.model = NetworkModel(inst)
        self.curve = mos_curve(inst.config.service)
        self.p = as_tensor(pw.p)
        self.q = as_tensor(pw.q)

        config = inst.config
        L, G, N = inst.shape
        self._sizes = (L * G, L * G * N, L * G * N)
        self._shapes = ((L, G), (L, G, N), (L, G, N))

        w = cfg.start_weight
        shift = (1.0 - w) / 2.0
        self._start = torch.cat(
            [
                as_tensor(start.theta).flatten() * w + shift,
                as_tensor(start.eps).flatten() * w + shift,
                as_tensor(start.chi).flatten() * w + shift,
            ]
        )
        self._bounds = (torch.zeros_like(self._start), torch.ones_like(self._start))

        self.p_max = as_tensor(config.p_max_array)
        self.backhaul_cap = as_tensor(config.backhaul_cap_array)
        self.bandwidth = float(config.subcarrier_bandwidth)
        self.put_rate_min = as_tensor(config.put_rate_min_array)
        self.mos_min = as_tensor(config.mos_min_array)
        self.load_cap = as_tensor(config.load_cap_array)
        self.sic_cap = as_tensor(config.sic_cap_array)

        self.precedence = self.model.precedence(start)
        self._cache: tuple[torch.Tensor, NetworkEvaluation[torch.Tensor]] | None = None

    @property
    def bounds(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self._bounds

    def initial_point(self) -> torch.Tensor:
        return self._start.clone()

    def split(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        theta, eps, chi = torch.split(x, self._sizes)
        return (
            theta.reshape(self._shapes[0]),
            eps.reshape(self._shapes[1]),
            chi.reshape(self._shapes[2]),
        )

    def to_schedule(self, x: torch.Tensor) -> Schedule:
        theta, eps, chi = (to_numpy(t) for t in self.split(x.detach()))
        return Schedule.from_relaxed(theta, eps, chi)

    def rounded(self, x: torch.Tensor) -> Schedule:
        return self.to_schedule(x).rounded(self.cfg.threshold)

    def _evaluate(self, x: torch.Tensor) -> NetworkEvaluation[torch.Tensor]:
        if self._cache is not None and self._cache[0] is x:
            return self._cache[1]
        _, _, chi = self.split(x)
        ev = self.model.evaluate(chi, self.p, self.q, self.precedence)
        self._cache = (x, ev)
        return ev

    def utility(self, x: torch.Tensor) -> torch.Tensor:
        return self.curve(self._evaluate(x).sut_rate).sum()

    def residuals(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        theta, eps, chi = self.split(x)
        ev = self._evaluate(x)
        residuals = {
            "sbs_power": (chi * self.p).sum(dim=(1, 2)) / self.p_max - 1.0,
            "put_qos": self.put_rate_min - ev.put_rate,
            "mos_floor": self.mos_min - self.curve(ev.sut_rate),
            "backhaul": ev.backhaul_rate * self.bandwidth / self.backhaul_cap - 1.0,
            "load": theta.sum(dim=1) - self.load_cap,
            "min_assoc": 1.0 - theta.sum(dim=0),
            "min_subc": 1.0 - eps.sum(dim=(0, 2)),
            "sic": eps.sum(dim=(0, 1)) - self.sic_cap,
            "precedence": eps - theta[:, :, None],
            "chi_below_theta": chi - theta[:, :, None],
            "chi_below_eps": chi - eps,
            "chi_above_product": theta[:, :, None] + eps - 1.0 - chi,
            "binary_theta": (theta - theta * theta).sum().reshape(1),
            "binary_eps": (eps - eps * eps).sum().reshape(1),
            "binary_chi": (chi - chi * chi).sum().reshape(1),
        }
        residuals.update(scheme_residuals(self.scheme, theta, eps))
        return residuals

    def before_outer_iteration(self, x: torch.Tensor, state: AlmState) -> None:
        self.precedence = self.model.precedence(self.rounded(x))
        self._cache = None

    def has_converged(
        self,
        x_prev: torch.Tensor,
        x: torch.Tensor,
        max_violation: float,
        settings: AlmSettings,
    ) -> bool:
        # Fixpoint of the rounded schedule.
        return self.rounded(x_prev) == self.rounded(x)


class _Scorer:
    """Exact-model evaluations of binary `(theta, eps)` candidates at fixed powers."""

    def __init__(self, inst: NetworkInstance, pw: PowerAllocation):
        self.inst = inst
        self.model = NetworkModel(inst)
        self.curve = mos_curve(inst.config.service)
        self.p = as_tensor(pw.p)
        self.q = as_tensor(pw.q)

    def evaluate(self, theta: np.ndarray, eps: np.ndarray) -> NetworkEvaluation[np.ndarray]:
        sched = Schedule.from_assignment(theta, eps)
        with torch.no_grad():
            ev = self.model.evaluate(
                as_tensor(sched.chi), self.p, self.q, self.model.precedence(sched)
            )
        return ev.to_numpy()

    def utility(self, theta: np.ndarray, eps: np.ndarray) -> float:
        rates = self.evaluate(theta, eps).sut_rate
        with torch.no_grad():
            return float(self.curve(as_tensor(rates)).sum())

    def utilities_after(
        self, theta: np.ndarray, eps: np.ndarray, candidates: np.ndarray
    ) -> np.ndarray:
        """Utility after removing each candidate activation, in one batched evaluation.

        `candidates` is a `[K, L, G, N]` boolean mask of entries to switch off.
        """
        sched = Schedule.from_assignment(theta, eps)
        active = as_tensor(sched.chi)
        batch = active * (1.0 - as_tensor(candidates.astype(np.float64)))
        with torch.no_grad():
            ev = self.model.evaluate(batch, self.p, self.q, self.model.precedence(sched))
            return to_numpy(self.curve(ev.sut_rate).sum(dim=-1))

    def rate_excess(self, theta: np.ndarray, eps: np.ndarray, tol: Tolerances) -> np.ndarray:
        """Positive parts of the PUT shortfalls and backhaul excesses, concatenated."""
        config = self.inst.config
        ev = self.evaluate(theta, eps)
        put = np.maximum(config.put_rate_min_array - ev.put_rate - tol.rate, 0.0)
        backhaul = np.maximum(
            ev.backhaul_rate * config.subcarrier_bandwidth
            - config.backhaul_cap_array
            - tol.backhaul,
            0.0,
        )
        return np.concatenate([put, backhaul])


def structurally_feasible(
    inst: NetworkInstance, theta: np.ndarray, eps: np.ndarray, scheme: Scheme
) -> bool:
    """Association, subcarrier, cap and precedence constraints plus the scheme's."""
    config = inst.config
    return bool(
        np.all(eps <= theta[:, :, None])
        and np.all(theta.sum(axis=1) <= config.load_cap_array)
        and np.all(eps.sum(axis=(0, 1)) <= config.sic_cap_array)
        and np.all(theta.sum(axis=0) >= 1)
        and np.all(eps.sum(axis=(0, 2)) >= 1)
        and scheme_satisfied(scheme, theta, eps)
    )


def _pick_drop(
    scorer: _Scorer,
    theta: np.ndarray,
    eps: np.ndarray,
    masks: list[np.ndarray],
    not_last: list[bool],
    gains: list[float],
) -> int:
    """Index of the candidate whose removal costs the least utility.

    Candidates that are not the user's last grant or association come first, then
    lower utility loss, then lower gain.
    """
    after = scorer.utilities_after(theta, eps, np.stack(masks))
    order = np.lexsort((np.asarray(gains), -after, ~np.asarray(not_last)))
    return int(order[0])


def _enforce_single_association(
    theta: np.ndarray, eps: np.ndarray, weight: np.ndarray
) -> None:
    for g in range(theta.shape[1]):
        serving = np.flatnonzero(theta[:, g])
        if len(serving) > 1:
            keep = serving[np.argmax(weight[serving, g])]
            for l in serving:
                if l != keep:
                    theta[l, g] = 0.0
                    eps[l, g, :] = 0.0


def _enforce_caps(
    inst: NetworkInstance,
    scorer: _Scorer,
    theta: np.ndarray,
    eps: np.ndarray,
    scheme: Scheme,
) -> None:
    config = inst.config
    L, G, N = inst.shape
    load_cap = config.load_cap_array
    sic_cap = config.sic_cap_array
    gain = inst.sbs_sut_gain

    for l in range(L):
        while theta[l].sum() > load_cap[l]:
            users = np.flatnonzero(theta[l])
            masks, not_last, gains = [], [], []
            for g in users:
                mask = np.zeros((L, G, N), dtype=bool)
                mask[l, g, :] = True
                masks.append(mask)
                not_last.append(bool(theta[:, g].sum() > 1))
                gains.append(float(gain[l, g].mean()))
            g = users[_pick_drop(scorer, theta, eps, masks, not_last, gains)]
            theta[l, g] = 0.0
            eps[l, g, :] = 0.0

    def drop_grant(slots: list[tuple[int, int, int]]) -> None:
        masks, not_last, gains = [], [], []
        for l, g, n in slots:
            mask = np.zeros((L, G, N), dtype=bool)
            mask[l, g, n] = True
            masks.append(mask)
            not_last.append(bool(eps[:, g, :].sum() > 1))
            gains.append(float(gain[l, g, n]))
        l, g, n = slots[_pick_drop(scorer, theta, eps, masks, not_last, gains)]
        eps[l, g, n] = 0.0

    for n in range(N):
        while eps[:, :, n].sum() > sic_cap[n]:
            drop_grant([(l, g, n) for l, g in np.argwhere(eps[:, :, n] > 0)])

    if not scheme.allows_noma:
        for l in range(L):
            for n in range(N):
                while eps[l, :, n].sum() > 1:
                    drop_grant([(l, g, n) for g in np.flatnonzero(eps[l, :, n])])


def _prune_idle(theta: np.ndarray, eps: np.ndarray) -> None:
    idle = (theta > 0) & (eps.sum(axis=2) == 0)
    theta[idle] = 0.0


def _fix_orphans(
    inst: NetworkInstance,
    scorer: _Scorer,
    theta: np.ndarray,
    eps: np.ndarray,
    scheme: Scheme,
) -> None:
    config = inst.config
    L, G, N = inst.shape
    load_cap = config.load_cap_array
    sic_cap = config.sic_cap_array
    mean_gain = inst.sbs_sut_gain.mean(axis=2)

    for g in range(G):
        if theta[:, g].sum() >= 1:
            continue
        spare = np.flatnonzero(theta.sum(axis=1) < load_cap)
        if len(spare) == 0:
            raise InfeasibleScheduleError(
                f"SUT {g} cannot be associated: every SBS is at its load cap"
            )
        theta[spare[np.argmax(mean_gain[spare, g])], g] = 1.0

    for g in range(G):
        if eps[:, g, :].sum() >= 1:
            continue
        sinr = scorer.evaluate(theta, eps).sinr[:, g, :]
        free_subcarrier = eps.sum(axis=(0, 1)) < sic_cap
        free_slot = np.broadcast_to(free_subcarrier, (L, N)).copy()
        if not scheme.allows_noma:
            free_slot &= eps.sum(axis=1) == 0

        associated = theta[:, g] > 0
        slots = free_slot & associated[:, None]
        if not slots.any():
            # Move or add an association to an SBS with spare load.
            spare = (theta.sum(axis=1) < load_cap) & ~associated
            slots = free_slot & spare[:, None]
        if not slots.any():
            raise InfeasibleScheduleError(
                f"SUT {g} cannot get a subcarrier under the load and SIC caps"
            )
        l, n = np.unravel_index(np.argmax(np.where(slots, sinr, -np.inf)), (L, N))
        if not associated[l]:
            if not scheme.allows_jt:
                theta[:, g] = 0.0
                eps[:, g, :] = 0.0
            theta[l, g] = 1.0
        eps[l, g, n] = 1.0


def round_and_repair(
    s: Schedule,
    inst: NetworkInstance,
    pw: PowerAllocation,
    scheme: Scheme = Scheme.JT_NOMA,
    threshold: float = 0.5,
) -> Schedule:
    """Turn a relaxed schedule into a binary one meeting every structural constraint.

    Entries are thresholded and grants without association removed. Restricted schemes
    keep one association per SUT. Load, SIC and OMA caps are enforced by dropping the
    assignments of least marginal utility, idle associations are pruned, and every SUT
    left without an association or a subcarrier gets its strongest SBS with spare load
    and its best-SINR free slot.

    Raises:
        InfeasibleScheduleError: If the caps leave no room for some SUT.
    """
    scorer = _Scorer(inst, pw)
    theta = (np.asarray(s.theta) >= threshold).astype(np.float64)
    eps = (np.asarray(s.eps) >= threshold).astype(np.float64) * theta[:, :, None]

    if not scheme.allows_jt:
        _enforce_single_association(theta, eps, np.asarray(s.theta))
    _enforce_caps(inst, scorer, theta, eps, scheme)
    _prune_idle(theta, eps)
    _fix_orphans(inst, scorer, theta, eps, scheme)
    _prune_idle(theta, eps)

    repaired = Schedule.from_assignment(theta, eps)
    assert structurally_feasible(inst, repaired.theta, repaired.eps, scheme)
    return repaired


def improve_schedule(
    inst: NetworkInstance,
    pw: PowerAllocation,
    sched: Schedule,
    scheme: Scheme = Scheme.JT_NOMA,
    cfg: ScheduleSolveConfig | None = None,
) -> Schedule:
    """Greedy local search over single grant toggles and JT association additions.

    A move is kept when it raises the exact utility, keeps every structural and scheme
    constraint, and does not worsen any PUT shortfall or backhaul excess.
    """
    cfg = cfg or ScheduleSolveConfig()
    scorer = _Scorer(inst, pw)
    gain = inst.sbs_sut_gain
    k = cfg.improve_candidates
    theta = np.array(sched.theta)
    eps = np.array(sched.eps)
    utility = scorer.utility(theta, eps)
    excess = scorer.rate_excess(theta, eps, cfg.tolerances)

    for _ in range(cfg.improve_passes):
        served = theta[:, :, None] > 0
        granted = eps > 0
        grants_per_user = eps.sum(axis=(0, 2))

        adds = np.argwhere(served & ~granted)
        adds = adds[np.argsort(-gain[tuple(adds.T)], kind="stable")][:k]
        removes = np.argwhere(granted & (grants_per_user[None, :, None] > 1))
        removes = removes[np.argsort(gain[tuple(removes.T)], kind="stable")][:k]
        if scheme.allows_jt:
            on_subcarrier = granted.any(axis=0)  # [G, N]
            joint = np.argwhere(~served & on_subcarrier[None, :, :])
            joint = joint[np.argsort(-gain[tuple(joint.T)], kind="stable")][:k]
        else:
            joint = np.zeros((0, 3), dtype=np.int64)

        moves = [(tuple(e), 1.0, False) for e in adds]
        moves += [(tuple(e), 1.0, True) for e in joint]
        moves += [(tuple(e), 0.0, False) for e in removes]

        improved = False
        for (l, g, n), value, associate in moves:
            if eps[l, g, n] == value or (associate and theta[l, g] > 0):
                continue
            trial_theta = theta.copy()
            trial_eps = eps.copy()
            if associate:
                trial_theta[l, g] = 1.0
            trial_eps[l, g, n] = value
            if not structurally_feasible(inst, trial_theta, trial_eps, scheme):
                continue
            trial_excess = scorer.rate_excess(trial_theta, trial_eps, cfg.tolerances)
            if np.any(trial_excess > excess + 1e-12):
                continue
            trial_utility = scorer.utility(trial_theta, trial_eps)
            if trial_utility > utility + 1e-12:
                theta, eps = trial_theta, trial_eps
                utility, excess = trial_utility, trial_excess
                improved = True
        if not improved:
            break

    return Schedule.from_assignment(theta, eps)


def solve_schedule(
    inst: NetworkInstance,
    pw: PowerAllocation,
    start: Schedule,
    cfg: ScheduleSolveConfig | None = None,
    scheme: Scheme = Scheme.JT_NOMA,
) -> tuple[Schedule, SolveReport]:
    """Optimize association and subcarrier grants with `pw` held fixed.

    The output always meets the structural constraints exactly. A structurally feasible
    start that scores higher than the repaired result is returned instead.
    """
    cfg = cfg or ScheduleSolveConfig()
    started = time.perf_counter()
    scorer = _Scorer(inst, pw)

    problem = ScheduleProblem(inst, pw, start, cfg, scheme)
    result = outer_loop(problem, cfg.alm, phase="schedule")

    report = SolveReport(
        status=SolveStatus.CONVERGED,
        schedule=start,
        power=pw,
        iterations=result.state.t,
        scheme=scheme.value,
    )
    report.extend_trace(result.state.trace, phase="schedule")
    try:
        sched = round_and_repair(
            problem.to_schedule(result.x), inst, pw, scheme, cfg.threshold
        )
    except InfeasibleScheduleError as e:
        logger.warning(f"Schedule repair failed: {e}")
        report.status = SolveStatus.INFEASIBLE
        report.message = str(e)
        report.runtime = time.perf_counter() - started
        return start, report.audit(inst, cfg.tolerances, STRUCTURAL_FAMILIES)

    if cfg.improve:
        sched = improve_schedule(inst, pw, sched, scheme, cfg)

    if structurally_feasible(inst, start.theta, start.eps, scheme) and (
        scorer.utility(start.theta, start.eps) > scorer.utility(sched.theta, sched.eps)
    ):
        logger.info("Schedule solve did not improve on its feasible start, keeping it")
        sched = start

    report.schedule = sched
    report.audit(inst, cfg.tolerances, STRUCTURAL_FAMILIES)
    report.utility_trace = [row.utility for row in result.state.trace]
    report.runtime = time.perf_counter() - started
    if not result.converged:
        report.status = SolveStatus.NOT_CONVERGED
        report.message = "ALM did not converge, rounded the last iterate"
    logger.info(
        f"Schedule solve: {report.status.value} after {report.iterations} outer"
        f" iterations, utility {report.utility:.4f}"
    )
    return sched, report
