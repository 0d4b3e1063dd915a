"""Scheduling and power decision tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from jtnoma.instance import NetworkInstance
from jtnoma.topology import decoding_order


def _readonly(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Schedule:
    """Association `theta[l, g]`, subcarrier grants `eps[l, g, n]` and `chi = theta * eps`.

    A binary schedule (`relaxed=False`) has all entries in {0, 1} and `chi` equal to the
    elementwise product. Relaxed schedules carry continuous entries in [0, 1] and an
    independent `chi`.
    """

    theta: np.ndarray
    eps: np.ndarray
    chi: np.ndarray
    relaxed: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _readonly(self.theta))
        object.__setattr__(self, "eps", _readonly(self.eps))
        object.__setattr__(self, "chi", _readonly(self.chi))

    @classmethod
    def from_assignment(cls, theta: Any, eps: Any) -> Schedule:
        """Binary schedule with `chi` recomputed as `theta * eps`."""
        theta = (np.asarray(theta, dtype=np.float64) >= 0.5).astype(np.float64)
        eps = (np.asarray(eps, dtype=np.float64) >= 0.5).astype(np.float64)
        return cls(theta=theta, eps=eps, chi=theta[:, :, None] * eps)

    @classmethod
    def from_grants(cls, eps: Any) -> Schedule:
        """Canonical binary schedule: associated exactly where a subcarrier is granted."""
        eps = (np.asarray(eps, dtype=np.float64) >= 0.5).astype(np.float64)
        return cls.from_assignment(eps.max(axis=-1, initial=0.0), eps)

    @classmethod
    def from_relaxed(cls, theta: Any, eps: Any, chi: Any) -> Schedule:
        return cls(
            theta=np.clip(theta, 0.0, 1.0),
            eps=np.clip(eps, 0.0, 1.0),
            chi=np.clip(chi, 0.0, 1.0),
            relaxed=True,
        )

    @classmethod
    def empty(cls, num_sbs: int, num_sut: int, num_subcarriers: int) -> Schedule:
        zeros = np.zeros((num_sbs, num_sut, num_subcarriers))
        return cls(theta=np.zeros((num_sbs, num_sut)), eps=zeros, chi=zeros)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.eps.shape  # type: ignore[return-value]

    @property
    def activation(self) -> np.ndarray:
        """Indicator of a transmission on `(l, g, n)`, used for interference and rates."""
        return self.chi

    def rounded(self, threshold: float = 0.5) -> Schedule:
        """Binary schedule read off a relaxed one at `threshold`; eps is masked by theta."""
        theta = (self.theta >= threshold).astype(np.float64)
        eps = (self.eps >= threshold).astype(np.float64) * theta[:, :, None]
        return Schedule.from_assignment(theta, eps)

    def serving_sbs(self, g: int, n: int) -> list[int]:
        return [int(l) for l in np.flatnonzero(self.chi[:, g, n] >= 0.5)]

    def is_jt(self, g: int, n: int) -> bool:
        return len(self.serving_sbs(g, n)) >= 2

    def check(self) -> list[str]:
        """List every broken invariant. Empty iff the schedule is consistent."""
        problems: list[str] = []
        L, G, N = self.eps.shape
        if self.theta.shape != (L, G):
            problems.append(f"theta has shape {self.theta.shape}, expected {(L, G)}")
            return problems
        if self.chi.shape != (L, G, N):
            problems.append(f"chi has shape {self.chi.shape}, expected {(L, G, N)}")
            return problems

        for name in ("theta", "eps", "chi"):
            arr = getattr(self, name)
            if not np.all((arr >= 0.0) & (arr <= 1.0)):
                problems.append(f"{name} has entries outside [0, 1]")
        for l, g, n in np.argwhere(self.eps > self.theta[:, :, None] + 1e-12):
            problems.append(f"eps[{l}, {g}, {n}] > theta[{l}, {g}]")

        if not self.relaxed:
            for name in ("theta", "eps", "chi"):
                arr = getattr(self, name)
                if not np.all((arr == 0.0) | (arr == 1.0)):
                    problems.append(f"{name} is not binary")
            product = self.theta[:, :, None] * self.eps
            for l, g, n in np.argwhere(self.chi != product):
                problems.append(f"chi[{l}, {g}, {n}] != theta[{l}, {g}] * eps[{l}, {g}, {n}]")
        return problems

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Schedule):
            return NotImplemented
        return (
            self.relaxed == other.relaxed
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.eps, other.eps)
            and np.array_equal(self.chi, other.chi)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """SBS powers `p[l, g, n]` and MBS powers `q[m, n]` in watts."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _readonly(self.p))
        object.__setattr__(self, "q", _readonly(self.q))

    @classmethod
    def uniform(cls, inst: NetworkInstance) -> PowerAllocation:
        """`p = p_max[l] / N` on every entry and `q = q_max / N` on PUT-held subcarriers."""
        L, G, N = inst.shape
        cfg = inst.config
        p = np.broadcast_to((cfg.p_max_array / N)[:, None, None], (L, G, N))
        q = inst.primary_alloc * (cfg.q_max / N)
        return cls(p=p, q=q)

    def check(self) -> list[str]:
        problems = []
        for name in ("p", "q"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                problems.append(f"{name} has non-finite entries")
            elif np.any(arr < 0):
                problems.append(f"{name} has negative entries")
        return problems

    def replace(self, *, p: Any = None, q: Any = None) -> PowerAllocation:
        return PowerAllocation(
            p=self.p if p is None else p,
            q=self.q if q is None else q,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerAllocation):
            return NotImplemented
        return np.array_equal(self.p, other.p) and np.array_equal(self.q, other.q)

    __hash__ = None  # type: ignore[assignment]


def noma_cluster(inst: NetworkInstance, sched: Schedule, l: int, n: int) -> list[int]:
    """SUTs multiplexed on subcarrier `n` of SBS `l`, listed in SIC decoding order."""
    return decoding_order(inst, sched, l, n)
