"""Brute-force reference solutions for micro instances.

`enumerate_schedules` lists every canonical binary schedule meeting the association,
subcarrier, cap and scheme constraints; `grid_power_search` scans a log-spaced grid of
the active SBS powers and the MBS powers on PUT-held subcarriers; `best_joint` combines
both. The `reference_*` functions evaluate the SINR and rate formulas with plain scalar
loops and their own decoding-order rule, so they share no code with
`jtnoma.interference`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch
from more_itertools import sliced

from jtnoma.config import ServiceProfile
from jtnoma.feasibility import Tolerances
from jtnoma.instance import NetworkInstance
from jtnoma.interference import NetworkModel
from jtnoma.qoe import mos_curve
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.schemes import Scheme
from jtnoma.utils.types import TORCH_DTYPE, as_tensor

logger = logging.getLogger(__name__)

MAX_SCHEDULE_ENTRIES = 16
MAX_GRID_VARIABLES = 4
DEFAULT_GRID_POINTS = 64
REFINE_POINTS = 9
REFINE_ROUNDS = 4
POWER_FLOOR = 1e-12


class OracleSizeError(ValueError):
    """Raised when an instance or schedule is too large for exhaustive search."""


@dataclass(frozen=True)
class GridSearchResult:
    """Outcome of `grid_power_search`.

    `power` is None and `utility` is `-inf` when no grid point passes the power, PUT
    rate, MOS floor and backhaul filters.
    """

    power: PowerAllocation | None
    utility: float
    feasible: bool
    evaluated: int


@dataclass(frozen=True)
class OracleSolution:
    schedule: Schedule
    power: PowerAllocation
    utility: float
    schedules_evaluated: int
    schedules_skipped: int = 0


def enumerate_schedules(
    inst: NetworkInstance, scheme: Scheme = Scheme.JT_NOMA
) -> Iterator[Schedule]:
    """Every canonical binary schedule of `inst` satisfying the structural constraints.

    A schedule is canonical when `theta[l, g] = 1` exactly where SBS `l` grants SUT `g`
    at least one subcarrier. Associations without a grant change neither rates nor
    interference, so the canonical set covers every distinct operating point.

    Raises:
        OracleSizeError: If `L * G * N` exceeds `MAX_SCHEDULE_ENTRIES`.
    """
    L, G, N = inst.shape
    entries = L * G * N
    if entries > MAX_SCHEDULE_ENTRIES:
        raise OracleSizeError(
            f"Schedule enumeration needs L*G*N <= {MAX_SCHEDULE_ENTRIES}, got {entries}"
        )
    cfg = inst.config

    codes = np.arange(2**entries, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(entries, dtype=np.int64)) & 1
    eps = bits.reshape(-1, L, G, N).astype(np.float64)
    theta = eps.max(axis=-1)

    keep = (
        np.all(theta.sum(axis=2) <= cfg.load_cap_array, axis=1)
        & np.all(theta.sum(axis=1) >= 1, axis=1)
        & np.all(eps.sum(axis=(1, 3)) >= 1, axis=1)
        & np.all(eps.sum(axis=(1, 2)) <= cfg.sic_cap_array, axis=1)
    )
    if not scheme.allows_jt:
        keep &= np.all(theta.sum(axis=1) <= 1, axis=1)
    if not scheme.allows_noma:
        keep &= np.all(eps.sum(axis=2) <= 1, axis=(1, 2))

    for index in np.flatnonzero(keep):
        yield Schedule.from_grants(eps[index])


def grid_variables(inst: NetworkInstance, sched: Schedule) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the free powers of `sched`: active `(l, g, n)` and PUT-held `(m, n)`."""
    return np.argwhere(np.asarray(sched.chi) >= 0.5), np.argwhere(inst.primary_alloc >= 1)


class _GridScanner:
    """Evaluates the exact utility and the power, PUT, MOS and backhaul filter in batches."""

    def __init__(
        self,
        inst: NetworkInstance,
        sched: Schedule,
        active_p: np.ndarray,
        active_q: np.ndarray,
        tol: Tolerances,
        chunk_size: int,
    ):
        cfg = inst.config
        self.shape = inst.shape
        self.q_shape = (inst.num_put, inst.num_subcarriers)
        self.num_p = len(active_p)
        self.chunk_size = chunk_size
        self.tol = tol
        self.model = NetworkModel(inst)
        self.curve = mos_curve(cfg.service)
        self.activation = as_tensor(sched.chi)
        self.precedence = self.model.precedence(sched)
        self.p_index = torch.as_tensor(
            np.ravel_multi_index(active_p.T, self.shape), dtype=torch.long
        )
        self.q_index = torch.as_tensor(
            np.ravel_multi_index(active_q.T, self.q_shape), dtype=torch.long
        )
        self.primary_alloc = as_tensor(inst.primary_alloc)
        self.q_max = float(cfg.q_max)
        self.p_max = as_tensor(cfg.p_max_array)
        self.put_min = as_tensor(cfg.put_rate_min_array)
        self.mos_min = as_tensor(cfg.mos_min_array)
        self.backhaul_cap = as_tensor(cfg.backhaul_cap_array)
        self.bandwidth = float(cfg.subcarrier_bandwidth)

    def split(self, values: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        L, G, N = self.shape
        batch = values.shape[0]
        p = torch.zeros((batch, L * G * N), dtype=TORCH_DTYPE)
        p[:, self.p_index] = values[:, : self.num_p]
        q = torch.zeros((batch, self.q_shape[0] * self.q_shape[1]), dtype=TORCH_DTYPE)
        q[:, self.q_index] = values[:, self.num_p :]
        return p.reshape(batch, L, G, N), q.reshape(batch, *self.q_shape)

    def scan(self, axes: list[np.ndarray]) -> tuple[float, np.ndarray | None, int]:
        """Best feasible point of the Cartesian product of `axes`, ties to the first."""
        sizes = tuple(len(axis) for axis in axes)
        total = int(np.prod(sizes))
        best_utility = -math.inf
        best: np.ndarray | None = None
        tol = self.tol
        with torch.no_grad():
            for block in sliced(range(total), self.chunk_size):
                index = np.unravel_index(np.arange(block.start, block.stop), sizes)
                values = np.stack([axis[i] for axis, i in zip(axes, index)], axis=-1)
                p, q = self.split(torch.as_tensor(values, dtype=TORCH_DTYPE))

                ev = self.model.evaluate(self.activation, p, q, self.precedence)
                sut_mos = self.curve(ev.sut_rate)
                utility = sut_mos.sum(dim=-1)
                served = (self.activation * p).sum(dim=(-2, -1))
                feasible = (
                    ((self.primary_alloc * q).sum(dim=(-2, -1)) <= self.q_max + tol.power)
                    & torch.all(served <= self.p_max + tol.power, dim=-1)
                    & torch.all(ev.put_rate >= self.put_min - tol.rate, dim=-1)
                    & torch.all(sut_mos >= self.mos_min - tol.mos, dim=-1)
                    & torch.all(
                        ev.backhaul_rate * self.bandwidth <= self.backhaul_cap + tol.backhaul,
                        dim=-1,
                    )
                )
                masked = torch.where(feasible, utility, torch.full_like(utility, -math.inf))
                k = int(torch.argmax(masked))
                if bool(feasible[k]) and float(masked[k]) > best_utility:
                    best_utility = float(masked[k])
                    best = values[k].copy()
        return best_utility, best, total


def grid_power_search(
    inst: NetworkInstance,
    sched: Schedule,
    grid_points: int = DEFAULT_GRID_POINTS,
    *,
    tol: Tolerances | None = None,
    refine_rounds: int = REFINE_ROUNDS,
    refine_points: int = REFINE_POINTS,
    chunk_size: int = 8192,
) -> GridSearchResult:
    """Exhaustive argmax of the exact total QoE over a grid of the free powers.

    The free powers are the SBS powers on the active entries `(l, g, n)` of `sched` and
    the MBS powers on PUT-held subcarriers. Each takes `grid_points` log-spaced values
    from `POWER_FLOOR` to its budget; every other power is zero. Points violating the
    budgets, PUT rates, MOS floors or backhaul caps are discarded and ties keep the
    first point found. The best point is then refined `refine_rounds` times on a
    `refine_points` grid spanning one step of the previous grid on either side, keeping
    the incumbent unless a point is strictly better.

    Raises:
        OracleSizeError: If the schedule has more than `MAX_GRID_VARIABLES` free powers.
        ValueError: If `grid_points < 2` or `refine_points < 2`.
    """
    if grid_points < 2:
        raise ValueError(f"grid_points={grid_points} must be at least 2")
    if refine_points < 2:
        raise ValueError(f"refine_points={refine_points} must be at least 2")
    active_p, active_q = grid_variables(inst, sched)
    count = len(active_p) + len(active_q)
    if count > MAX_GRID_VARIABLES:
        raise OracleSizeError(
            f"Grid search supports at most {MAX_GRID_VARIABLES} power variables, got"
            f" {count} ({len(active_p)} SBS, {len(active_q)} MBS)"
        )
    cfg = inst.config
    scanner = _GridScanner(inst, sched, active_p, active_q, tol or Tolerances(), chunk_size)
    upper = np.array(
        [cfg.p_max_array[l] for l, _, _ in active_p] + [cfg.q_max] * len(active_q),
        dtype=np.float64,
    )

    axes = [np.geomspace(POWER_FLOOR, hi, grid_points) for hi in upper]
    best_utility, best, evaluated = scanner.scan(axes)
    if best is None:
        logger.debug(f"No feasible grid point among {evaluated} for this schedule")
        return GridSearchResult(power=None, utility=-math.inf, feasible=False, evaluated=evaluated)

    ratio = (upper / POWER_FLOOR) ** (1.0 / (grid_points - 1))
    for _ in range(refine_rounds):
        lo = np.maximum(best / ratio, POWER_FLOOR)
        hi = np.minimum(best * ratio, upper)
        utility, point, count = scanner.scan(
            [np.geomspace(a, b, refine_points) for a, b in zip(lo, hi)]
        )
        evaluated += count
        if point is not None and utility > best_utility:
            best_utility, best = utility, point
        ratio = ratio ** (2.0 / (refine_points - 1))

    p, q = scanner.split(torch.as_tensor(best[None, :], dtype=TORCH_DTYPE))
    return GridSearchResult(
        power=PowerAllocation(p=p[0].numpy().copy(), q=q[0].numpy().copy()),
        utility=best_utility,
        feasible=True,
        evaluated=evaluated,
    )


def best_joint(
    inst: NetworkInstance,
    scheme: Scheme = Scheme.JT_NOMA,
    grid_points: int = DEFAULT_GRID_POINTS,
    *,
    tol: Tolerances | None = None,
) -> OracleSolution | None:
    """Joint argmax over `enumerate_schedules` and `grid_power_search`.

    Schedules with more free powers than the grid supports are skipped and counted.
    Returns None when no schedule admits a feasible grid point.

    Raises:
        OracleSizeError: If the instance is too large to enumerate.
    """
    best: tuple[float, Schedule, PowerAllocation] | None = None
    evaluated = skipped = 0
    for sched in enumerate_schedules(inst, scheme):
        if sum(len(v) for v in grid_variables(inst, sched)) > MAX_GRID_VARIABLES:
            skipped += 1
            continue
        evaluated += 1
        result = grid_power_search(inst, sched, grid_points, tol=tol)
        if result.power is not None and (best is None or result.utility > best[0]):
            best = (result.utility, sched, result.power)

    if skipped:
        logger.warning(
            f"Skipped {skipped} schedules with more than {MAX_GRID_VARIABLES} free powers"
        )
    if best is None:
        logger.warning(f"No feasible joint solution for scheme {scheme.value}")
        return None
    utility, sched, power = best
    logger.info(f"[{scheme.value}] oracle utility {utility:.6f} over {evaluated} schedules")
    return OracleSolution(
        schedule=sched,
        power=power,
        utility=utility,
        schedules_evaluated=evaluated,
        schedules_skipped=skipped,
    )


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return max(1.0, math.hypot(float(a[0] - b[0]), float(a[1] - b[1])))


def reference_decoding_order(
    inst: NetworkInstance, sched: Schedule, l: int, n: int
) -> list[int]:
    """SIC order on `(l, n)`: JT users by falling mean distance, then others by rising gain."""
    chi = np.asarray(sched.chi)
    L, G, _ = chi.shape
    jt_users: list[tuple[float, int]] = []
    single_users: list[tuple[float, int]] = []
    for g in range(G):
        if chi[l, g, n] < 0.5:
            continue
        serving = [k for k in range(L) if chi[k, g, n] >= 0.5]
        if len(serving) >= 2:
            mean = sum(
                _distance(inst.positions.sbs[k], inst.positions.sut[g]) for k in serving
            ) / len(serving)
            jt_users.append((-mean, g))
        else:
            single_users.append((float(inst.sbs_sut_gain[l, g, n]), g))
    return [g for _, g in sorted(jt_users)] + [g for _, g in sorted(single_users)]


def reference_sinr(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    chi, p, q, h = sched.chi, pw.p, pw.q, inst.sbs_sut_gain
    L, G, _ = chi.shape

    udl = 0.0
    for m in range(inst.num_put):
        udl += inst.primary_alloc[m, n] * q[m, n] * inst.mbs_sut_gain[g, n]

    ccd = 0.0
    for other_l in range(L):
        if other_l == l:
            continue
        for other_g in range(G):
            if other_g != g:
                ccd += chi[other_l, other_g, n] * p[other_l, other_g, n] * h[other_l, g, n]

    noma = 0.0
    order = reference_decoding_order(inst, sched, l, n)
    if g in order:
        for later in order[order.index(g) + 1 :]:
            noma += p[l, later, n] * h[l, g, n]

    jt = 0.0
    for other_g in range(G):
        if other_g == g:
            continue
        for a in range(L):
            for b in range(L):
                if a != b:
                    jt += (
                        2.0
                        * chi[a, other_g, n]
                        * chi[b, other_g, n]
                        * p[a, other_g, n]
                        * p[b, other_g, n]
                        * h[a, g, n]
                        * h[b, g, n]
                    )

    noise = inst.config.noise_power_array[g]
    return float(p[l, g, n] * h[l, g, n] / (udl + ccd + noma + jt + noise))


def _reference_link_rate(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    if sched.chi[l, g, n] < 0.5:
        return 0.0
    return math.log2(1.0 + reference_sinr(inst, sched, pw, l, g, n))


def reference_sut_rate(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, g: int
) -> float:
    L, _, N = inst.shape
    return sum(_reference_link_rate(inst, sched, pw, l, g, n) for l in range(L) for n in range(N))


def reference_put_rate(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, m: int
) -> float:
    L, G, N = inst.shape
    rate = 0.0
    for n in range(N):
        if inst.primary_alloc[m, n] == 0:
            continue
        interference = 0.0
        for l in range(L):
            for g in range(G):
                interference += sched.chi[l, g, n] * pw.p[l, g, n] * inst.sbs_put_gain[l, m, n]
        signal = pw.q[m, n] * inst.mbs_put_gain[m, n]
        rate += math.log2(1.0 + signal / (interference + inst.config.put_noise_power))
    return rate


def reference_backhaul_rate(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int
) -> float:
    """Rate carried by SBS `l` in bits/s/Hz."""
    _, G, N = inst.shape
    return sum(_reference_link_rate(inst, sched, pw, l, g, n) for g in range(G) for n in range(N))


def reference_total_qoe(inst: NetworkInstance, sched: Schedule, pw: PowerAllocation) -> float:
    profile = ServiceProfile.for_service(inst.config.service)
    lo = math.log2(profile.rate_anchor_min)
    hi = math.log2(profile.rate_anchor_max)
    total = 0.0
    for g in range(inst.num_sut):
        rate = max(reference_sut_rate(inst, sched, pw, g), 1e-6)
        score = 1.0 + (profile.mos_max - 1.0) * (math.log2(rate) - lo) / (hi - lo)
        total += min(max(score, 1.0), profile.mos_max)
    return total
