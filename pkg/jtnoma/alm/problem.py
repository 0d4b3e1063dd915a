from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

import torch

if TYPE_CHECKING:
    from jtnoma.alm.core import AlmSettings, AlmState


class AlmProblem(ABC):
    """Base class for a box-constrained maximization solved by `outer_loop`.

    Variables are flattened into one float64 vector. Residuals are oriented so that a
    positive entry is a violation.
    """

    @property
    @abstractmethod
    def bounds(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Lower and upper bound of every variable. Equal bounds freeze a variable."""
        raise NotImplementedError

    @abstractmethod
    def initial_point(self) -> torch.Tensor:
        raise NotImplementedError

    @abstractmethod
    def utility(self, x: torch.Tensor) -> torch.Tensor:
        """Scalar objective to maximize."""
        raise NotImplementedError

    @abstractmethod
    def residuals(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        raise NotImplementedError

    def before_outer_iteration(self, x: torch.Tensor, state: AlmState) -> None:  # noqa: B027
        """Hook to refresh linearization points from the current iterate."""

    def has_converged(
        self,
        x_prev: torch.Tensor,
        x: torch.Tensor,
        max_violation: float,
        settings: AlmSettings,
    ) -> bool:
        """Default test: feasible, and the largest variable change is below `err_tol`."""
        if max_violation > settings.feas_tol:
            return False
        if x.numel() == 0:
            return True
        return float((x - x_prev).abs().max()) < settings.err_tol
