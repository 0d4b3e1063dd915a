"""Seeded parameter sweeps comparing the multiple-access schemes.

A sweep varies one size parameter of a scenario. Every `(value, seed)` cell draws one
instance and runs every scheme on it. Outputs written to `out_dir`:

* `results.csv`: one row per `(value, seed, scheme)`, sorted, free of wall times,
* `timings.csv`: wall time of every run,
* `convergence/<axis>_<value>_seed<seed>_<scheme>.csv`: solver traces,
* `violations/<axis>_<value>_seed<seed>_<scheme>.csv`: feasibility audits,
* `avg_mos.svg` and `summary.yaml`.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np
import pandas as pd

from jtnoma.algorithm import AlgorithmSettings
from jtnoma.baselines import run_scheme
from jtnoma.config import InvalidConfigError, NetworkConfig, ServiceKind
from jtnoma.experiments.plotting import plot_sweep
from jtnoma.experiments.status import aggregate, trend_statistics
from jtnoma.feasibility import Tolerances
from jtnoma.schemes import Scheme
from jtnoma.solvers import SolveReport, SolveStatus
from jtnoma.topology import ChannelModelParams, generate_instance
from jtnoma.utils._locker import CsvAppender
from jtnoma.utils.files import serialize
from jtnoma.utils.run_args import (
    CHANNEL,
    NETWORK,
    SOLVER,
    SWEEP,
    check_keys,
    get_sections_from_yaml,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

RESULT_COLUMNS = [
    "schema_version",
    "axis",
    "value",
    "seed",
    "scheme",
    "status",
    "total_qoe",
    "avg_mos",
    "avg_rate",
    "outer_iterations",
    "feasible",
    "message",
]
TIMING_COLUMNS = ["axis", "value", "seed", "scheme", "runtime"]


class SweepAxis(str, enum.Enum):
    NUM_SUT = "num_sut"
    NUM_PUT = "num_put"
    NUM_SUBCARRIERS = "num_subcarriers"


@dataclass
class ScenarioSpec:
    """One sweep: a base scenario, the varied parameter and the runs per value.

    Attributes:
        service: Service of every SUT, selects the default scenario sizes.
        axis: The `NetworkConfig` field that is varied.
        values: Values taken by `axis`.
        seeds: Instance seeds run for every value.
        schemes: Schemes run on every instance.
        network: Overrides of the default `NetworkConfig` of `service`.
        channel: Channel model of every instance.
        solver: Settings of every solve.
        out_dir: Output directory.
    """

    service: ServiceKind = ServiceKind.WEB
    axis: SweepAxis = SweepAxis.NUM_SUT
    values: list[int] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    schemes: list[Scheme] = field(default_factory=lambda: list(Scheme))
    network: dict[str, Any] = field(default_factory=dict)
    channel: ChannelModelParams = field(default_factory=ChannelModelParams)
    solver: AlgorithmSettings = field(default_factory=AlgorithmSettings)
    out_dir: Path = Path("results")

    def __post_init__(self) -> None:
        self.service = ServiceKind.from_name(self.service)
        try:
            self.axis = SweepAxis(self.axis)
        except ValueError as e:
            choices = ", ".join(a.value for a in SweepAxis)
            raise InvalidConfigError(
                f"Unknown sweep axis '{self.axis}'. Expected one of: {choices}"
            ) from e
        self.schemes = [Scheme.from_name(s) for s in self.schemes]
        self.values = [int(v) for v in self.values]
        self.seeds = [int(s) for s in self.seeds]
        self.out_dir = Path(self.out_dir)

        if not self.values:
            raise InvalidConfigError("A sweep needs at least one axis value")
        if not self.seeds:
            raise InvalidConfigError("A sweep needs at least one seed")
        if not self.schemes:
            raise InvalidConfigError("A sweep needs at least one scheme")
        if self.axis.value in self.network or "rng_seed" in self.network:
            raise InvalidConfigError(
                f"'{self.axis.value}' and 'rng_seed' are set by the sweep,"
                " remove them from the network section"
            )
        check_keys(NETWORK, self.network, NetworkConfig)

    @classmethod
    def from_dict(cls, sections: Mapping[str, Mapping[str, Any]]) -> ScenarioSpec:
        sweep = dict(sections.get(SWEEP, {}))
        check_keys(SWEEP, sweep, cls)
        for nested in ("network", "channel", "solver"):
            if nested in sweep:
                raise InvalidConfigError(
                    f"'{nested}' is a top-level section, not a key of '{SWEEP}'"
                )
        return cls(
            **sweep,
            network=dict(sections.get(NETWORK, {})),
            channel=ChannelModelParams.from_dict(sections.get(CHANNEL, {})),
            solver=AlgorithmSettings.from_dict(sections.get(SOLVER, {})),
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> ScenarioSpec:
        return cls.from_dict(get_sections_from_yaml(path))

    def config_for(self, value: int, seed: int) -> NetworkConfig:
        return NetworkConfig.default(
            self.service, **self.network, **{self.axis.value: value, "rng_seed": seed}
        )

    def cells(self) -> Iterator[tuple[int, int]]:
        for value in self.values:
            for seed in self.seeds:
                yield value, seed


@dataclass
class CellOutcome:
    rows: list[dict[str, Any]]
    timings: list[dict[str, Any]]
    convergence: dict[str, pd.DataFrame]
    audits: dict[str, pd.DataFrame]


@dataclass
class SweepResult:
    results: pd.DataFrame
    out_dir: Path

    @property
    def worst_status(self) -> str:
        """`error`, `infeasible`, `not_converged` or `converged`, in that precedence."""
        statuses = set(self.results["status"])
        for status in ("error", SolveStatus.INFEASIBLE.value, SolveStatus.NOT_CONVERGED.value):
            if status in statuses:
                return status
        return SolveStatus.CONVERGED.value


def run_stem(axis: SweepAxis, value: int, seed: int, scheme: Scheme) -> str:
    return f"{axis.value}_{value}_seed{seed}_{scheme.value}"


def _result_row(
    spec: ScenarioSpec,
    value: int,
    seed: int,
    scheme: Scheme,
    report: SolveReport | None,
    message: str = "",
) -> dict[str, Any]:
    row: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "axis": spec.axis.value,
        "value": value,
        "seed": seed,
        "scheme": scheme.value,
        "status": "error",
        "total_qoe": np.nan,
        "avg_mos": np.nan,
        "avg_rate": np.nan,
        "outer_iterations": 0,
        "feasible": False,
        "message": message,
    }
    if report is None:
        return row
    mos = report.per_user_mos
    rate = report.per_user_rate
    row.update(
        status=report.status.value,
        total_qoe=report.utility,
        avg_mos=float(mos.mean()) if mos.size else np.nan,
        avg_rate=float(rate.mean()) if rate.size else np.nan,
        outer_iterations=report.iterations,
        feasible=report.feasible,
        message=report.message,
    )
    return row


def _convergence_frame(report: SolveReport) -> pd.DataFrame:
    outer = pd.DataFrame(
        {
            "phase": "outer",
            "round": np.arange(len(report.utility_trace)),
            "utility": report.utility_trace,
        }
    )
    return pd.concat([outer, report.trace_frame()], ignore_index=True)


def run_cell(spec: ScenarioSpec, value: int, seed: int) -> CellOutcome:
    """Draw the instance of `(value, seed)` and run every scheme on it.

    Failures are recorded in the rows instead of raised.
    """
    outcome = CellOutcome(rows=[], timings=[], convergence={}, audits={})
    try:
        inst = generate_instance(spec.config_for(value, seed), spec.channel)
    except InvalidConfigError as e:
        logger.warning(f"Skipping {spec.axis.value}={value} seed={seed}: {e}")
        outcome.rows = [_result_row(spec, value, seed, s, None, str(e)) for s in spec.schemes]
        return outcome

    tol = spec.solver.tolerances
    for scheme in spec.schemes:
        stem = run_stem(spec.axis, value, seed, scheme)
        started = time.perf_counter()
        try:
            report = run_scheme(inst, scheme, spec.solver)
        except Exception as e:  # noqa: BLE001
            logger.exception(f"Run {stem} failed")
            outcome.rows.append(_result_row(spec, value, seed, scheme, None, repr(e)))
            continue
        runtime = time.perf_counter() - started

        outcome.rows.append(_result_row(spec, value, seed, scheme, report))
        outcome.timings.append(
            {
                "axis": spec.axis.value,
                "value": value,
                "seed": seed,
                "scheme": scheme.value,
                "runtime": runtime,
            }
        )
        outcome.convergence[stem] = _convergence_frame(report)
        if report.violations is not None:
            outcome.audits[stem] = report.violations.to_frame(tol)
    return outcome


def _write_cell(outcome: CellOutcome, out_dir: Path, appender: CsvAppender) -> None:
    appender.append(outcome.rows)
    for stem, frame in outcome.convergence.items():
        frame.to_csv(out_dir / "convergence" / f"{stem}.csv", index=False)
    for stem, frame in outcome.audits.items():
        frame.to_csv(out_dir / "violations" / f"{stem}.csv", index=False)


def _summary(spec: ScenarioSpec, results: pd.DataFrame, tol: Tolerances) -> dict[str, Any]:
    table = aggregate(results)
    per_scheme: dict[str, Any] = {}
    for scheme, group in table.groupby("scheme", sort=True):
        per_scheme[str(scheme)] = {
            "values": group["value"].tolist(),
            "mean_avg_mos": group["mean"].tolist(),
            "sem_avg_mos": group["sem"].fillna(0.0).tolist(),
            "seeds": group["count"].tolist(),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "service": spec.service.name.lower(),
        "axis": spec.axis.value,
        "runs": int(len(results)),
        "status_counts": {
            str(k): int(v) for k, v in results["status"].value_counts().sort_index().items()
        },
        "schemes": per_scheme,
        "trends": trend_statistics(results),
        "tolerances": dataclasses.asdict(tol),
    }


def run_sweep(spec: ScenarioSpec, workers: int = 1) -> SweepResult:
    """Run every cell of `spec`, up to `workers` at a time, and write the outputs.

    Rows reach `results.partial.csv` as cells finish; the sorted `results.csv` replaces
    it at the end, so identical specs give byte-identical result files.
    """
    out_dir = spec.out_dir
    for sub in ("convergence", "violations"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    partial = CsvAppender(out_dir / "results.partial.csv", RESULT_COLUMNS)
    partial.remove()

    cells = list(spec.cells())
    logger.info(
        f"Sweeping {spec.axis.value} over {spec.values} with {len(spec.seeds)} seeds"
        f" and {len(spec.schemes)} schemes ({len(cells)} cells, {workers} workers)"
    )
    outcomes: list[CellOutcome] = []
    if workers <= 1:
        for value, seed in cells:
            outcome = run_cell(spec, value, seed)
            _write_cell(outcome, out_dir, partial)
            outcomes.append(outcome)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, spec, value, seed) for value, seed in cells]
            for future in futures:
                outcome = future.result()
                _write_cell(outcome, out_dir, partial)
                outcomes.append(outcome)

    results = pd.DataFrame(
        [row for o in outcomes for row in o.rows], columns=RESULT_COLUMNS
    ).sort_values(["value", "seed", "scheme"], kind="stable", ignore_index=True)
    results.to_csv(out_dir / "results.csv", index=False)
    pd.DataFrame(
        [row for o in outcomes for row in o.timings], columns=TIMING_COLUMNS
    ).sort_values(["value", "seed", "scheme"], kind="stable").to_csv(
        out_dir / "timings.csv", index=False
    )
    partial.remove()

    plot_sweep(results, out_dir)
    serialize(_summary(spec, results, spec.solver.tolerances), out_dir / "summary.yaml")
    logger.info(f"Sweep results written to {out_dir}")
    return SweepResult(results=results, out_dir=out_dir)
