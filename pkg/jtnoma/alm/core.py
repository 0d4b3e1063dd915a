"""Augmented Lagrangian machinery for box-constrained maximization.

The augmented objective of a maximization with inequality residuals `r_c(x) <= 0` is

    L(x) = U(x) - 1/(2 alpha) * sum_c ( [psi_c + alpha r_c(x)]_+^2 - psi_c^2 )

and the multipliers are updated as `psi_c <- [psi_c + alpha r_c(x)]_+`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Mapping

import torch

from jtnoma.utils.types import TORCH_DTYPE

if TYPE_CHECKING:
    from jtnoma.alm.problem import AlmProblem

logger = logging.getLogger(__name__)

Objective = Callable[[torch.Tensor], torch.Tensor]


class NonFiniteObjectiveError(FloatingPointError):
    """Raised when the objective is not finite at the start of an inner maximization."""


@dataclass
class AlmSettings:
    """Knobs of the outer and inner loops.

    Attributes:
        err_tol: Outer convergence threshold on the largest variable change.
        feas_tol: Largest residual accepted as satisfied.
        max_outer_iters: Multiplier updates before giving up.
        max_inner_iters: Gradient steps per inner maximization.
        inner_tol: Inner stop on the projected gradient norm.
        inner_ftol: Inner stop on the relative objective improvement.
        penalty_init: Initial penalty `alpha`.
        multiplier_init: Initial value of every multiplier.
        penalty_growth: Factor applied to `alpha` when violations stall.
        penalty_cap: Upper limit of `alpha`.
        shrink_factor: Violations must shrink by this factor to avoid penalty growth.
        inner_step_init: First trial step of the inner ascent.
        step_min: Lower clip of the Barzilai-Borwein step.
        step_max: Upper clip of the Barzilai-Borwein step.
        armijo_c: Sufficient increase constant.
        backtrack: Step reduction factor of the line search.
        max_backtracks: Line search trials per inner step.
    """

    err_tol: float = 1e-3
    feas_tol: float = 1e-4
    max_outer_iters: int = 100
    max_inner_iters: int = 200
    inner_tol: float = 1e-8
    inner_ftol: float = 1e-10
    penalty_init: float = 2.0
    multiplier_init: float = 0.1
    penalty_growth: float = 1.5
    penalty_cap: float = 1e6
    shrink_factor: float = 0.9
    inner_step_init: float = 1.0
    step_min: float = 1e-12
    step_max: float = 1e12
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self) -> None:
        if not self.err_tol > 0:
            raise ValueError(f"err_tol={self.err_tol} must be positive")
        if not self.penalty_growth >= 1:
            raise ValueError(f"penalty_growth={self.penalty_growth} must be >= 1")
        if not self.penalty_init > 0:
            raise ValueError(f"penalty_init={self.penalty_init} must be positive")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    utility: float
    max_violation: float
    penalty: float
    multiplier_sum: float
    inner_iterations: int


@dataclass
class AlmState:
    """Multipliers, penalty and history of one constrained solve."""

    multipliers: dict[str, torch.Tensor]
    penalty: float
    t: int = 0
    violation_history: list[float] = field(default_factory=list)
    trace: list[TraceRow] = field(default_factory=list)

    @classmethod
    def initial(
        cls, residuals: Mapping[str, torch.Tensor], settings: AlmSettings
    ) -> AlmState:
        multipliers = {
            name: torch.full_like(r.detach(), settings.multiplier_init, dtype=TORCH_DTYPE)
            for name, r in residuals.items()
        }
        return cls(multipliers=multipliers, penalty=settings.penalty_init)

    def multiplier_sum(self) -> float:
        return float(sum(float(m.sum()) for m in self.multipliers.values()))

    def violation_monotonicity(self, atol: float = 0.0) -> tuple[int, int]:
        """Count nonincreasing steps of the largest violation once the penalty has grown.

        Pairs of consecutive trace rows are counted from the first row whose penalty
        exceeds the penalty of the first row. A pair is nonincreasing when the later
        violation exceeds the earlier one by at most `atol`.

        Returns:
            `(nonincreasing, pairs)`; both are 0 when the penalty never grew.
        """
        if not self.trace:
            return 0, 0
        first_penalty = self.trace[0].penalty
        start = next(
            (i for i, row in enumerate(self.trace) if row.penalty > first_penalty), None
        )
        if start is None:
            return 0, 0
        tail = [row.max_violation for row in self.trace[start:]]
        steps = [later <= earlier + atol for earlier, later in zip(tail, tail[1:])]
        return sum(steps), len(steps)


def augmented_objective(
    base_utility: torch.Tensor,
    residuals: Mapping[str, torch.Tensor],
    multipliers: Mapping[str, torch.Tensor],
    penalty: float,
) -> torch.Tensor:
    """Utility minus the squared-hinge augmented Lagrangian penalty.

    Raises:
        ValueError: If `penalty` is not positive.
    """
    if not penalty > 0:
        raise ValueError(f"penalty={penalty} must be positive")
    total = base_utility
    for name, residual in residuals.items():
        psi = multipliers[name]
        hinge = torch.clamp(psi + penalty * residual, min=0.0)
        total = total - (hinge.square() - psi.square()).sum() / (2.0 * penalty)
    return total


def update_multiplier(
    psi: torch.Tensor | float, alpha: float, residual: torch.Tensor | float
) -> torch.Tensor:
    """`[psi + alpha * residual]_+`, never negative."""
    psi_t = torch.as_tensor(psi, dtype=TORCH_DTYPE)
    residual_t = torch.as_tensor(residual, dtype=TORCH_DTYPE)
    return torch.clamp(psi_t + alpha * residual_t, min=0.0)


def max_violation(residuals: Mapping[str, torch.Tensor]) -> float:
    worst = 0.0
    for residual in residuals.values():
        if residual.numel():
            worst = max(worst, float(residual.detach().max()))
    return worst


@dataclass
class InnerResult:
    x: torch.Tensor
    trace: list[float]
    converged: bool
    iterations: int


def _value_and_grad(objective: Objective, x: torch.Tensor) -> tuple[float, torch.Tensor]:
    x = x.detach().clone().requires_grad_(True)
    value = objective(x)
    if not value.requires_grad:
        return float(value), torch.zeros_like(x.detach())
    (grad,) = torch.autograd.grad(value, x, allow_unused=True)
    if grad is None:
        grad = torch.zeros_like(x)
    return float(value.detach()), grad.detach()


def inner_maximize(
    objective: Objective,
    x0: torch.Tensor,
    lower: torch.Tensor,
    upper: torch.Tensor,
    settings: AlmSettings,
) -> InnerResult:
    """Projected gradient ascent on the box `[lower, upper]`.

    Each step starts from a Barzilai-Borwein trial length and backtracks until the
    Armijo sufficient-increase condition holds. Steps that would decrease the objective
    are never accepted, so the returned trace is nondecreasing.

    Raises:
        NonFiniteObjectiveError: If the objective or its gradient is not finite at `x0`.
    """

    def project(z: torch.Tensor) -> torch.Tensor:
        return torch.minimum(torch.maximum(z, lower), upper)

    x = project(x0.detach().to(TORCH_DTYPE))
    value, grad = _value_and_grad(objective, x)
    if not math.isfinite(value) or not torch.all(torch.isfinite(grad)):
        raise NonFiniteObjectiveError(f"Objective is not finite at the start point ({value})")

    trace = [value]
    step = settings.inner_step_init
    prev_x: torch.Tensor | None = None
    prev_grad: torch.Tensor | None = None
    converged = False
    iteration = 0

    for iteration in range(1, settings.max_inner_iters + 1):  # noqa: B007
        projected = project(x + grad) - x
        if projected.numel() == 0 or float(projected.abs().max()) <= settings.inner_tol:
            converged = True
            break

        if prev_x is not None and prev_grad is not None:
            s = x - prev_x
            y = grad - prev_grad
            curvature = -float(torch.dot(s, y))
            if curvature > 0:
                step = float(torch.dot(s, s)) / curvature
            step = min(max(step, settings.step_min), settings.step_max)

        accepted = False
        for _ in range(settings.max_backtracks):
            candidate = project(x + step * grad)
            ascent = float(torch.dot(grad, candidate - x))
            new_value, new_grad = _value_and_grad(objective, candidate)
            if (
                math.isfinite(new_value)
                and torch.all(torch.isfinite(new_grad))
                and new_value >= value + settings.armijo_c * ascent
                and new_value >= value
            ):
                accepted = True
                break
            step *= settings.backtrack

        if not accepted:
            # No representable ascent step left: x is stationary to working precision.
            converged = True
            break

        improvement = new_value - value
        prev_x, prev_grad = x, grad
        x, value, grad = candidate, new_value, new_grad
        trace.append(value)
        if improvement <= settings.inner_ftol * (1.0 + abs(value)):
            converged = True
            break

    return InnerResult(x=x.detach(), trace=trace, converged=converged, iterations=iteration)


@dataclass
class AlmResult:
    """Outcome of `outer_loop`.

    `x` is the last iterate; `best_feasible` the feasible iterate of highest utility,
    if any was seen.
    """

    x: torch.Tensor
    state: AlmState
    converged: bool
    best_feasible: torch.Tensor | None
    best_feasible_utility: float

    @property
    def solution(self) -> torch.Tensor:
        return self.x if self.best_feasible is None else self.best_feasible


def outer_loop(
    problem: AlmProblem,
    settings: AlmSettings,
    state: AlmState | None = None,
    *,
    phase: str = "alm",
) -> AlmResult:
    """Alternate inner maximizations and multiplier updates until convergence.

    Convergence is the problem's own `has_converged` test, or the largest residual
    within `feas_tol` with unchanged multipliers after a converged inner solve.
    The penalty grows by `penalty_growth` whenever the largest violation fails to
    shrink by `shrink_factor`.
    """
    lower, upper = problem.bounds
    x = torch.minimum(torch.maximum(problem.initial_point().to(TORCH_DTYPE), lower), upper)
    if state is None:
        state = AlmState.initial(problem.residuals(x), settings)

    best_feasible: torch.Tensor | None = None
    best_utility = -math.inf
    converged = False

    for _ in range(settings.max_outer_iters):
        state.t += 1
        problem.before_outer_iteration(x, state)

        def objective(z: torch.Tensor) -> torch.Tensor:
            return augmented_objective(
                problem.utility(z), problem.residuals(z), state.multipliers, state.penalty
            )

        inner = inner_maximize(objective, x, lower, upper, settings)
        x_new = inner.x
        with torch.no_grad():
            residuals = {k: r.detach() for k, r in problem.residuals(x_new).items()}
            utility = float(problem.utility(x_new))
        violation = max_violation(residuals)

        updated = {
            name: update_multiplier(state.multipliers[name], state.penalty, residual)
            for name, residual in residuals.items()
        }
        multipliers_stable = all(
            torch.allclose(
                updated[name], state.multipliers[name], atol=settings.err_tol * 1e-3, rtol=0.0
            )
            for name in updated
        )
        state.multipliers = updated

        previous = state.violation_history[-1] if state.violation_history else math.inf
        state.violation_history.append(violation)
        state.trace.append(
            TraceRow(
                iteration=state.t,
                objective=inner.trace[-1],
                utility=utility,
                max_violation=violation,
                penalty=state.penalty,
                multiplier_sum=state.multiplier_sum(),
                inner_iterations=inner.iterations,
            )
        )
        logger.debug(
            f"[{phase}] t={state.t} objective={inner.trace[-1]:.6g} utility={utility:.6g}"
            f" max_violation={violation:.3g} alpha={state.penalty:.3g}"
        )

        feasible = violation <= settings.feas_tol
        if feasible and utility > best_utility:
            best_feasible, best_utility = x_new.clone(), utility

        if violation > settings.feas_tol and violation > settings.shrink_factor * previous:
            state.penalty = min(state.penalty * settings.penalty_growth, settings.penalty_cap)

        x_prev, x = x, x_new
        if problem.has_converged(x_prev, x, violation, settings) or (
            feasible and multipliers_stable and inner.converged
        ):
            converged = True
            break

    if not converged:
        last = state.violation_history[-1] if state.violation_history else math.nan
        logger.warning(
            f"[{phase}] no convergence after {settings.max_outer_iters} outer iterations"
            f" (max violation {last:.3g})"
        )
    return AlmResult(
        x=x,
        state=state,
        converged=converged,
        best_feasible=best_feasible,
        best_feasible_utility=best_utility,
    )
