"""The four multiple-access schemes as constrained runs of the joint allocation."""

from __future__ import annotations

import logging
from typing import Iterable

from jtnoma.algorithm import AlgorithmSettings, run_algorithm1
from jtnoma.instance import NetworkInstance
from jtnoma.schemes import Scheme
from jtnoma.solvers import SolveReport

logger = logging.getLogger(__name__)


def run_scheme(
    inst: NetworkInstance,
    scheme: Scheme | str,
    settings: AlgorithmSettings | None = None,
) -> SolveReport:
    """Run the joint allocation restricted to `scheme`.

    Non-JT schemes allow one serving SBS per SUT, OMA schemes one SUT per `(l, n)`.
    Both restrictions go into the scheduling problem, its repair and the oracle.

    Raises:
        InvalidConfigError: If `scheme` names no known scheme.
    """
    scheme = Scheme.from_name(scheme)
    report = run_algorithm1(inst, settings, scheme)
    logger.info(
        f"[{scheme.value}] {report.status.value}: total QoE {report.utility:.4f}"
        f" after {report.iterations} iterations"
    )
    return report


def run_all_schemes(
    inst: NetworkInstance,
    schemes: Iterable[Scheme | str] = tuple(Scheme),
    settings: AlgorithmSettings | None = None,
) -> dict[Scheme, SolveReport]:
    return {Scheme.from_name(s): run_scheme(inst, s, settings) for s in schemes}
