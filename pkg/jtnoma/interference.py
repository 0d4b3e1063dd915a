"""Interference terms, SINR and rates of the two-tier downlink.

Every SUT `g` on subcarrier `n` of SBS `l` sees four interference terms:

* underlay (UDL): the MBS transmitting to the PUT that holds `n`,
* co-channel (CCD): other SBSs serving other SUTs on `n`,
* NOMA: users of the same SBS on `n` decoded after `g` (not cancelled by SIC),
* joint transmission (JT): the coherent cross term of other SUTs served jointly by two
  SBSs on `n`.

`NetworkModel` evaluates all of them on float64 tensors with optional leading batch
dimensions on the activation and power tensors, so the same code serves the solvers
(through autograd), the oracle grid search (batched) and the scalar accessors below.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Generic, TypeVar, Union

import numpy as np
import torch

from jtnoma.instance import NetworkInstance
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.topology import precedence_tensor
from jtnoma.utils.types import TORCH_DTYPE, as_tensor, to_numpy

T = TypeVar("T", np.ndarray, torch.Tensor)

JtLambda = Union[float, np.ndarray, torch.Tensor]


@dataclass(frozen=True)
class InterferenceBreakdown:
    """The four interference powers, in watts, seen on one `(l, g, n)` link."""

    udl: float
    ccd: float
    noma: float
    jt: float

    @property
    def total(self) -> float:
        return self.udl + self.ccd + self.noma + self.jt


@dataclass(frozen=True)
class NetworkEvaluation(Generic[T]):
    """All model quantities of one (schedule, power) point.

    Shapes, with optional leading batch dimensions:

    * `udl`, `jt`: `[G, N]` (they do not depend on the serving SBS),
    * `ccd`, `noma`, `signal`, `sinr`, `link_rate`: `[L, G, N]`,
    * `sut_rate`: `[G]`, `put_rate`: `[M]`, `backhaul_rate`: `[L]`.

    Rates are in bits/s/Hz.
    """

    udl: T
    ccd: T
    noma: T
    jt: T
    signal: T
    sinr: T
    link_rate: T
    sut_rate: T
    put_rate: T
    backhaul_rate: T

    def to_numpy(self) -> NetworkEvaluation[np.ndarray]:
        return NetworkEvaluation(
            **{f.name: to_numpy(getattr(self, f.name)) for f in fields(self)}
        )


class NetworkModel:
    """Tensor view of a `NetworkInstance`.

    Args:
        inst: The instance whose gains and limits are used.
    """

    def __init__(self, inst: NetworkInstance):
        self.inst = inst
        self.shape = inst.shape
        L, G, N = inst.shape
        self.gain = as_tensor(inst.sbs_sut_gain)
        self.mbs_gain = as_tensor(inst.mbs_sut_gain)
        self.put_gain = as_tensor(inst.sbs_put_gain)
        self.mbs_put_gain = as_tensor(inst.mbs_put_gain)
        self.primary_alloc = as_tensor(inst.primary_alloc)
        self.noise = as_tensor(inst.config.noise_power_array)
        self.put_noise = float(inst.config.put_noise_power)
        self._sbs_offdiag = 1.0 - torch.eye(L, dtype=TORCH_DTYPE)
        self._sut_offdiag = (1.0 - torch.eye(G, dtype=TORCH_DTYPE))[:, :, None]

    def precedence(self, sched: Schedule) -> torch.Tensor:
        return as_tensor(precedence_tensor(self.inst, sched))

    def udl(self, q: torch.Tensor) -> torch.Tensor:
        return torch.einsum("...mn,mn,gn->...gn", q, self.primary_alloc, self.mbs_gain)

    def ccd(self, tx: torch.Tensor) -> torch.Tensor:
        # tx = activation * p; other SUTs of each other SBS, seen through that SBS's gain.
        per_sbs = tx.sum(dim=-2, keepdim=True)
        cross = (per_sbs - tx) * self.gain
        return cross.sum(dim=-3, keepdim=True) - cross

    def noma(self, tx: torch.Tensor, precedence: torch.Tensor) -> torch.Tensor:
        later = torch.einsum("lgkn,...lkn->...lgn", precedence, tx)
        return later * self.gain

    def jt_exact(self, tx: torch.Tensor) -> torch.Tensor:
        # Ordered SBS pairs (a, b), a != b, jointly serving SUT j, received at SUT i.
        pairs = torch.einsum(
            "...ajn,...bjn,ain,bin,ab->...jin",
            tx,
            tx,
            self.gain,
            self.gain,
            self._sbs_offdiag,
        )
        return 2.0 * (pairs * self._sut_offdiag).sum(dim=-3)

    def jt_convex(
        self, activation: torch.Tensor, p: torch.Tensor, jt_lambda: JtLambda
    ) -> torch.Tensor:
        """Upper bound of `jt_exact` from `2xy <= lam * x^2 + y^2 / lam` per ordered pair.

        `jt_lambda` is a positive scalar or a `[L, L, G, N]` tensor indexed by the
        ordered pair `(a, b)`, the served SUT and the subcarrier.
        """
        lam = self._lambda_tensor(jt_lambda)
        weight = lam * self._sbs_offdiag[:, :, None, None]
        inv_weight = self._sbs_offdiag[:, :, None, None] / lam
        energy = activation * p * p
        first = torch.einsum(
            "abjn,...ajn,...bjn,ain,bin->...jin",
            weight,
            energy,
            activation,
            self.gain,
            self.gain,
        )
        second = torch.einsum(
            "abjn,...ajn,...bjn,ain,bin->...jin",
            inv_weight,
            activation,
            energy,
            self.gain,
            self.gain,
        )
        return ((first + second) * self._sut_offdiag).sum(dim=-3)

    def _lambda_tensor(self, jt_lambda: JtLambda) -> torch.Tensor:
        L, G, N = self.shape
        lam = as_tensor(jt_lambda)
        if not torch.all(lam > 0):
            raise ValueError("JT convexification parameter lambda must be positive")
        return torch.broadcast_to(lam, (L, L, G, N))

    def put_rate(self, tx: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        interference = torch.einsum("...lgn,lmn->...mn", tx, self.put_gain)
        sinr = q * self.mbs_put_gain / (interference + self.put_noise)
        return (self.primary_alloc * torch.log2(1.0 + sinr)).sum(dim=-1)

    def evaluate(
        self,
        activation: torch.Tensor,
        p: torch.Tensor,
        q: torch.Tensor,
        precedence: torch.Tensor,
        jt_lambda: JtLambda | None = None,
    ) -> NetworkEvaluation[torch.Tensor]:
        """Evaluate the model. `jt_lambda=None` uses the exact JT term."""
        tx = activation * p
        udl = self.udl(q)
        ccd = self.ccd(tx)
        noma = self.noma(tx, precedence)
        jt = self.jt_exact(tx) if jt_lambda is None else self.jt_convex(activation, p, jt_lambda)

        signal = p * self.gain
        denominator = (
            udl.unsqueeze(-3) + ccd + noma + jt.unsqueeze(-3) + self.noise[:, None]
        )
        sinr = signal / denominator
        link_rate = activation * torch.log2(1.0 + sinr)
        return NetworkEvaluation(
            udl=udl,
            ccd=ccd,
            noma=noma,
            jt=jt,
            signal=signal,
            sinr=sinr,
            link_rate=link_rate,
            sut_rate=link_rate.sum(dim=(-3, -1)),
            put_rate=self.put_rate(tx, q),
            backhaul_rate=link_rate.sum(dim=(-2, -1)),
        )

    def evaluate_schedule(
        self,
        sched: Schedule,
        pw: PowerAllocation,
        jt_lambda: JtLambda | None = None,
    ) -> NetworkEvaluation[torch.Tensor]:
        return self.evaluate(
            as_tensor(sched.activation),
            as_tensor(pw.p),
            as_tensor(pw.q),
            self.precedence(sched),
            jt_lambda,
        )


def evaluate_network(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    jt_lambda: JtLambda | None = None,
) -> NetworkEvaluation[np.ndarray]:
    """All interference terms, SINRs and rates of one point, as numpy arrays."""
    with torch.no_grad():
        return NetworkModel(inst).evaluate_schedule(sched, pw, jt_lambda).to_numpy()


def interference_breakdown(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> InterferenceBreakdown:
    ev = evaluate_network(inst, sched, pw)
    return InterferenceBreakdown(
        udl=float(ev.udl[g, n]),
        ccd=float(ev.ccd[l, g, n]),
        noma=float(ev.noma[l, g, n]),
        jt=float(ev.jt[g, n]),
    )


def udl_interference(inst: NetworkInstance, pw: PowerAllocation, g: int, n: int) -> float:
    """Underlay interference from the MBS at SUT `g` on subcarrier `n`, in watts."""
    udl = np.einsum("mn,mn->n", inst.primary_alloc, pw.q) * inst.mbs_sut_gain[g]
    return float(udl[n])


def ccd_interference(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    return float(evaluate_network(inst, sched, pw).ccd[l, g, n])


def noma_interference(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    return float(evaluate_network(inst, sched, pw).noma[l, g, n])


def jt_interference_exact(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    del l  # The JT term does not depend on the serving SBS.
    return float(evaluate_network(inst, sched, pw).jt[g, n])


def jt_interference_convex(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    jt_lambda: JtLambda,
    l: int,
    g: int,
    n: int,
) -> float:
    """Convexified JT interference, never below `jt_interference_exact`.

    Raises:
        ValueError: If any entry of `jt_lambda` is not strictly positive.
    """
    del l
    return float(evaluate_network(inst, sched, pw, jt_lambda).jt[g, n])


def sinr(
    inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, l: int, g: int, n: int
) -> float:
    return float(evaluate_network(inst, sched, pw).sinr[l, g, n])


def sut_rate(inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, g: int) -> float:
    """Aggregated rate of SUT `g` over its serving SBSs and subcarriers, in bits/s/Hz."""
    return float(evaluate_network(inst, sched, pw).sut_rate[g])


def put_rate(inst: NetworkInstance, sched: Schedule, pw: PowerAllocation, m: int) -> float:
    return float(evaluate_network(inst, sched, pw).put_rate[m])


def backhaul_rate(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    l: int,
    *,
    in_bits: bool = False,
) -> float:
    """Total rate carried by SBS `l`, in bits/s/Hz or, with `in_bits`, in bits/s."""
    rate = float(evaluate_network(inst, sched, pw).backhaul_rate[l])
    if in_bits:
        rate *= inst.config.subcarrier_bandwidth
    return rate


__all__ = [
    "InterferenceBreakdown",
    "NetworkEvaluation",
    "NetworkModel",
    "backhaul_rate",
    "ccd_interference",
    "evaluate_network",
    "interference_breakdown",
    "jt_interference_convex",
    "jt_interference_exact",
    "noma_interference",
    "put_rate",
    "sinr",
    "sut_rate",
    "udl_interference",
]
