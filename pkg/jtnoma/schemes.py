"""Multiple-access schemes compared by the experiments.

Restricted schemes add constraints to the joint problem:

* non-JT: every SUT is associated with at most one SBS,
* OMA: every `(l, n)` carries at most one SUT, which removes the NOMA term.
"""

from __future__ import annotations

import enum

import numpy as np
import torch

from jtnoma.config import InvalidConfigError


class Scheme(str, enum.Enum):
    JT_NOMA = "jt_noma"
    NON_JT_NOMA = "non_jt_noma"
    JT_OMA = "jt_oma"
    NON_JT_OMA = "non_jt_oma"

    @property
    def allows_jt(self) -> bool:
        return self in (Scheme.JT_NOMA, Scheme.JT_OMA)

    @property
    def allows_noma(self) -> bool:
        return self in (Scheme.JT_NOMA, Scheme.NON_JT_NOMA)

    @classmethod
    def from_name(cls, name: str | Scheme) -> Scheme:
        if isinstance(name, Scheme):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError as e:
            choices = ", ".join(s.value for s in cls)
            raise InvalidConfigError(
                f"Unknown scheme '{name}'. Expected one of: {choices}"
            ) from e


def scheme_residuals(
    scheme: Scheme, theta: torch.Tensor, eps: torch.Tensor
) -> dict[str, torch.Tensor]:
    """Extra residuals of a restricted scheme; empty for JT-NOMA."""
    residuals: dict[str, torch.Tensor] = {}
    if not scheme.allows_jt:
        residuals["single_association"] = theta.sum(dim=-2) - 1.0
    if not scheme.allows_noma:
        residuals["oma_exclusive"] = eps.sum(dim=-2) - 1.0
    return residuals


def scheme_satisfied(scheme: Scheme, theta: np.ndarray, eps: np.ndarray) -> bool:
    """Whether a binary `(theta, eps)` respects the scheme restrictions."""
    if not scheme.allows_jt and np.any(theta.sum(axis=-2) > 1):
        return False
    if not scheme.allows_noma and np.any(eps.sum(axis=-2) > 1):
        return False
    return True
