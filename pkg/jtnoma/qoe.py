"""Rate to MOS mapping and the aggregate QoE utility."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import torch

from jtnoma.config import ServiceKind, ServiceProfile
from jtnoma.instance import NetworkInstance
from jtnoma.interference import JtLambda, NetworkModel
from jtnoma.schedule import PowerAllocation, Schedule
from jtnoma.utils.types import as_tensor, to_numpy

RATE_FLOOR = 1e-6


@dataclass(frozen=True)
class MosCurve:
    """Logarithmic rate to MOS law through the two anchors of a service profile.

    `mos(r) = clamp(intercept + slope * log2(r), 1, mos_max)`
    """

    profile: ServiceProfile
    slope: float = field(init=False)
    intercept: float = field(init=False)

    def __post_init__(self) -> None:
        lo = math.log2(self.profile.rate_anchor_min)
        hi = math.log2(self.profile.rate_anchor_max)
        slope = (self.profile.mos_max - 1.0) / (hi - lo)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", 1.0 - slope * lo)

    @property
    def mos_max(self) -> float:
        return self.profile.mos_max

    def __call__(self, rate: torch.Tensor) -> torch.Tensor:
        """MOS of a rate tensor in bits/s/Hz, differentiable away from the clamps."""
        log_rate = torch.log2(torch.clamp(rate, min=RATE_FLOOR))
        return torch.clamp(self.intercept + self.slope * log_rate, 1.0, self.mos_max)

    def with_floor_slope(self, rate: torch.Tensor, floor_slope: float) -> torch.Tensor:
        """The curve with its lower clamp replaced by a gentle slope.

        Below the rate mapping to MOS 1 the value keeps falling at `floor_slope` times
        the slope of the curve, so a user on the floor still has an ascent direction.
        Equals `self(rate)` wherever that is above 1.
        """
        raw = self.intercept + self.slope * torch.log2(torch.clamp(rate, min=RATE_FLOOR))
        smooth = self.intercept + self.slope * torch.log2(rate + RATE_FLOOR)
        return torch.where(
            raw < 1.0,
            1.0 + floor_slope * (smooth - 1.0),
            torch.clamp(raw, max=self.mos_max),
        )

    def rate_for(self, mos_value: float) -> float:
        """Smallest rate reaching `mos_value`."""
        if mos_value <= 1.0:
            return 0.0
        return 2.0 ** ((mos_value - self.intercept) / self.slope)


@lru_cache(maxsize=None)
def mos_curve(service: ServiceKind | str | int) -> MosCurve:
    return MosCurve(ServiceProfile.for_service(service))


def mos(curve: MosCurve, rate: float) -> float:
    """MOS of one SUT achieving `rate` bits/s/Hz."""
    return float(curve(torch.tensor(float(rate), dtype=torch.float64)))


def per_user_mos(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    jt_lambda: JtLambda | None = None,
) -> np.ndarray:
    curve = mos_curve(inst.config.service)
    with torch.no_grad():
        ev = NetworkModel(inst).evaluate_schedule(sched, pw, jt_lambda)
        return to_numpy(curve(ev.sut_rate))


def total_qoe(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    jt_lambda: JtLambda | None = None,
) -> float:
    """Sum of the MOS of every SUT, evaluated with the exact JT term by default."""
    return float(per_user_mos(inst, sched, pw, jt_lambda).sum())


def mos_gradient_wrt_power(
    inst: NetworkInstance,
    sched: Schedule,
    pw: PowerAllocation,
    jt_lambda: JtLambda | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the total QoE with respect to `p` and `q`, schedule held fixed.

    Entries of users clamped at 1 or at `mos_max` contribute zero.

    Returns:
        `(dU/dp, dU/dq)` with the shapes of `pw.p` and `pw.q`.
    """
    model = NetworkModel(inst)
    curve = mos_curve(inst.config.service)
    p = as_tensor(pw.p).clone().requires_grad_(True)
    q = as_tensor(pw.q).clone().requires_grad_(True)
    ev = model.evaluate(
        as_tensor(sched.activation), p, q, model.precedence(sched), jt_lambda
    )
    curve(ev.sut_rate).sum().backward()
    assert p.grad is not None and q.grad is not None
    return to_numpy(p.grad), to_numpy(q.grad)
