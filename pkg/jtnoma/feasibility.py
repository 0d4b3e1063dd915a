"""Signed residuals of every constraint of the joint allocation problem.

Residuals are oriented so that a positive entry is a violation:

| family       | constraint                                   | unit        | shape       |
|--------------|----------------------------------------------|-------------|-------------|
| `mbs_power`  | MBS power budget                             | W           | `[1]`       |
| `sbs_power`  | per-SBS power budget                         | W           | `[L]`       |
| `put_qos`    | PUT minimum rate (shortfall)                 | bits/s/Hz   | `[M]`       |
| `mos_floor`  | SUT minimum MOS (shortfall)                  | MOS         | `[G]`       |
| `backhaul`   | per-SBS backhaul capacity                    | bits/s      | `[L]`       |
| `load`       | per-SBS associated SUT count                 | count       | `[L]`       |
| `min_assoc`  | every SUT associated (shortfall)             | count       | `[G]`       |
| `min_subc`   | every SUT holds a subcarrier (shortfall)     | count       | `[G]`       |
| `sic`        | per-subcarrier multiplexed SUT count         | count       | `[N]`       |
| `precedence` | subcarrier only from an associated SBS       | binary      | `[L, G, N]` |
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from jtnoma.instance import NetworkInstance
from jtnoma.interference import evaluate_network
from jtnoma.qoe import mos_curve
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.utils.types import ResidualKey, as_tensor, to_numpy

POWER_FAMILIES = ("mbs_power", "sbs_power")
RATE_FAMILIES = ("put_qos",)
COUNT_FAMILIES = ("load", "min_assoc", "min_subc", "sic", "precedence")

# Families constrained by the power sub-problem.
POWER_PROBLEM_FAMILIES = ("mbs_power", "sbs_power", "put_qos", "mos_floor", "backhaul")
# Families the scheduling repair satisfies by construction.
STRUCTURAL_FAMILIES = COUNT_FAMILIES


@dataclass(frozen=True)
class Tolerances:
    """Per-family feasibility tolerances."""

    power: float = 1e-6
    count: float = 1e-6
    rate: float = 1e-4
    mos: float = 1e-4
    backhaul: float = 1.0

    def for_family(self, family: str) -> float:
        if family in POWER_FAMILIES:
            return self.power
        if family in RATE_FAMILIES:
            return self.rate
        if family == "mos_floor":
            return self.mos
        if family == "backhaul":
            return self.backhaul
        if family in COUNT_FAMILIES:
            return self.count
        raise KeyError(f"Unknown constraint family '{family}'")


@dataclass(frozen=True, eq=False)
class ConstraintViolations:
    mbs_power: np.ndarray
    sbs_power: np.ndarray
    put_qos: np.ndarray
    mos_floor: np.ndarray
    backhaul: np.ndarray
    load: np.ndarray
    min_assoc: np.ndarray
    min_subc: np.ndarray
    sic: np.ndarray
    precedence: np.ndarray

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def to_frame(self, tol: Tolerances | None = None) -> pd.DataFrame:
        """Long-format audit, one row per residual entry."""
        tol = tol or Tolerances()
        rows = []
        for family, residual in self.items():
            limit = tol.for_family(family)
            for index in np.ndindex(residual.shape):
                value = float(residual[index])
                rows.append(
                    {
                        "family": family,
                        "index": ",".join(str(i) for i in index),
                        "residual": value,
                        "violated": value > limit,
                    }
                )
        return pd.DataFrame(rows, columns=["family", "index", "residual", "violated"])


@dataclass(frozen=True)
class FeasibilityVerdict:
    """Outcome of `is_feasible`; `worst` locates the entry with the largest excess."""

    feasible: bool
    worst: ResidualKey | None
    worst_excess: float

    def __bool__(self) -> bool:
        return self.feasible

    def __str__(self) -> str:
        if self.worst is None:
            return "no constraints"
        family, index = self.worst
        state = "feasible" if self.feasible else "infeasible"
        return f"{state}, worst {family}{list(index)} exceeds tolerance by {self.worst_excess:.3g}"


def violations(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation
) -> ConstraintViolations:
    """Evaluate every constraint residual at `(sched, pw)` with the exact model."""
    cfg = inst.config
    theta = np.asarray(sched.theta)
    eps = np.asarray(sched.eps)
    served = theta[:, :, None] * eps

    ev = evaluate_network(inst, sched, pw)
    curve = mos_curve(cfg.service)
    sut_mos = to_numpy(curve(as_tensor(ev.sut_rate)))

    return ConstraintViolations(
        mbs_power=np.array([np.sum(inst.primary_alloc * pw.q) - cfg.q_max]),
        sbs_power=np.einsum("lgn,lgn->l", served, pw.p) - cfg.p_max_array,
        put_qos=cfg.put_rate_min_array - ev.put_rate,
        mos_floor=cfg.mos_min_array - sut_mos,
        backhaul=ev.backhaul_rate * cfg.subcarrier_bandwidth - cfg.backhaul_cap_array,
        load=theta.sum(axis=1) - cfg.load_cap_array,
        min_assoc=1.0 - theta.sum(axis=0),
        min_subc=1.0 - eps.sum(axis=(0, 2)),
        sic=eps.sum(axis=(0, 1)) - cfg.sic_cap_array,
        precedence=eps - theta[:, :, None],
    )


def is_feasible(
    v: ConstraintViolations,
    tol: Tolerances | None = None,
    families: Sequence[str] | None = None,
) -> FeasibilityVerdict:
    """True iff every residual is at most its family tolerance (closed comparison).

    Args:
        v: The residuals to audit.
        tol: Per-family tolerances, defaults to `Tolerances()`.
        families: Restrict the audit to these families.
    """
    tol = tol or Tolerances()
    worst: ResidualKey | None = None
    worst_excess = -np.inf
    for family, residual in v.items():
        if families is not None and family not in families:
            continue
        if residual.size == 0:
            continue
        excess = residual - tol.for_family(family)
        flat = int(np.argmax(excess))
        if excess.flat[flat] > worst_excess:
            worst_excess = float(excess.flat[flat])
            worst = (family, tuple(int(i) for i in np.unravel_index(flat, residual.shape)))
    if worst is None:
        return FeasibilityVerdict(feasible=True, worst=None, worst_excess=0.0)
    return FeasibilityVerdict(
        feasible=worst_excess <= 0.0, worst=worst, worst_excess=worst_excess
    )
