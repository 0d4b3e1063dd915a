"""Immutable network instances and their structural audit."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterator

import numpy as np

from jtnoma.config import NetworkConfig

if TYPE_CHECKING:
    from jtnoma.topology import ChannelModelParams


def _frozen(values: np.ndarray | list, dtype: type = np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Positions:
    """Node coordinates in meters, MBS first, then `[L, 2]`, `[G, 2]` and `[M, 2]`."""

    mbs: np.ndarray
    sbs: np.ndarray
    sut: np.ndarray
    put: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mbs", _frozen(self.mbs).reshape(2))
        for name in ("sbs", "sut", "put"):
            object.__setattr__(self, name, _frozen(getattr(self, name)).reshape(-1, 2))


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Topology, power gains and primary-tier allocation of one scenario.

    Gains are power gains `|h|^2`. All arrays are read-only.

    Attributes:
        config: Sizes and limits of the scenario.
        positions: Node coordinates.
        sbs_sut_gain: `[L, G, N]` gain from SBS `l` to SUT `g` on subcarrier `n`.
        mbs_sut_gain: `[G, N]` gain from the MBS to SUT `g`.
        sbs_put_gain: `[L, M, N]` gain from SBS `l` to PUT `m`.
        mbs_put_gain: `[M, N]` gain from the MBS to PUT `m`.
        primary_alloc: `[M, N]` binary OFDMA map of the primary tier.
        channel: Channel parameters the gains were drawn with, if known.
    """

    config: NetworkConfig
    positions: Positions
    sbs_sut_gain: np.ndarray
    mbs_sut_gain: np.ndarray
    sbs_put_gain: np.ndarray
    mbs_put_gain: np.ndarray
    primary_alloc: np.ndarray
    channel: ChannelModelParams | None = field(default=None)

    def __post_init__(self) -> None:
        for name in ("sbs_sut_gain", "mbs_sut_gain", "sbs_put_gain", "mbs_put_gain"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "primary_alloc", _frozen(self.primary_alloc, np.int64))

    @property
    def num_sbs(self) -> int:
        return self.config.num_sbs

    @property
    def num_sut(self) -> int:
        return self.config.num_sut

    @property
    def num_put(self) -> int:
        return self.config.num_put

    @property
    def num_subcarriers(self) -> int:
        return self.config.num_subcarriers

    @property
    def shape(self) -> tuple[int, int, int]:
        """`(L, G, N)`, the shape of every secondary-tier tensor."""
        return (self.num_sbs, self.num_sut, self.num_subcarriers)

    @cached_property
    def sbs_sut_distance(self) -> np.ndarray:
        """`[L, G]` euclidean distance in meters, clamped below at 1 m."""
        diff = self.positions.sbs[:, None, :] - self.positions.sut[None, :, :]
        return np.maximum(np.linalg.norm(diff, axis=-1), 1.0)

    def put_subcarriers(self, m: int) -> np.ndarray:
        """Subcarriers held by PUT `m`."""
        return np.flatnonzero(self.primary_alloc[m])


@dataclass(frozen=True)
class ValidationReport:
    """Every broken invariant of an instance, one human readable line each."""

    problems: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.problems

    def __len__(self) -> int:
        return len(self.problems)

    def __iter__(self) -> Iterator[str]:
        return iter(self.problems)

    def __str__(self) -> str:
        if self.ok:
            return "instance is well-formed"
        return "\n".join(self.problems)


def _gain_problems(name: str, gains: np.ndarray) -> list[str]:
    bad = np.argwhere(~(np.isfinite(gains) & (gains > 0)))
    return [
        f"{name}{tuple(int(i) for i in index)} = {float(gains[tuple(index)])!r} is not a"
        " strictly positive finite gain"
        for index in bad
    ]


def validate_instance(inst: NetworkInstance) -> ValidationReport:
    """Audit an instance against all its type invariants.

    Never raises for bad data; the returned report is empty iff the instance is
    well-formed.
    """
    problems = list(inst.config.check())
    if problems:
        return ValidationReport(tuple(problems))

    L, G, N = inst.shape
    M = inst.num_put
    expected = {
        "sbs_sut_gain": (L, G, N),
        "mbs_sut_gain": (G, N),
        "sbs_put_gain": (L, M, N),
        "mbs_put_gain": (M, N),
        "primary_alloc": (M, N),
    }
    for name, shape in expected.items():
        actual = getattr(inst, name).shape
        if actual != shape:
            problems.append(f"{name} has shape {actual}, expected {shape}")
    positions = {
        "sbs": (L, 2),
        "sut": (G, 2),
        "put": (M, 2),
    }
    for name, shape in positions.items():
        actual = getattr(inst.positions, name).shape
        if actual != shape:
            problems.append(f"positions.{name} has shape {actual}, expected {shape}")
    if problems:
        return ValidationReport(tuple(problems))

    for name in ("sbs_sut_gain", "mbs_sut_gain", "sbs_put_gain", "mbs_put_gain"):
        problems.extend(_gain_problems(name, getattr(inst, name)))

    pi = inst.primary_alloc
    for m, n in np.argwhere((pi != 0) & (pi != 1)):
        problems.append(f"primary_alloc[{m}, {n}] = {pi[m, n]} is not binary")
    per_subcarrier = pi.sum(axis=0)
    for n in np.flatnonzero(per_subcarrier > 1):
        holders = np.flatnonzero(pi[:, n]).tolist()
        problems.append(
            f"OFDMA violation at subcarrier {n}: held by PUTs {holders}"
        )
    for m in np.flatnonzero(pi.sum(axis=1) < 1):
        problems.append(f"PUT {m} holds no subcarrier")

    return ValidationReport(tuple(problems))
