"""Command line interface of jtnoma.

Usage:
    jtnoma [-v] generate [--config FILE] [--service S] [--seed N] [--out-dir DIR]
    jtnoma [-v] solve    [--config FILE | --instance FILE] [--scheme S] [--out-dir DIR]
    jtnoma [-v] sweep    SCENARIO [--workers N] [--out-dir DIR]
    jtnoma [-v] oracle   [--config FILE] [--scheme S] [--grid-points N] [--out-dir DIR]
    jtnoma [-v] status   OUT_DIR

SCENARIO is a scenario file or the name of a built-in scenario (web, video, audio).

Exit codes:
    0  success
    1  invalid configuration, or an objective that is not finite at the start
    2  infeasible instance
    3  no convergence (results are still written)
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from jtnoma.alm import NonFiniteObjectiveError
from jtnoma.algorithm import AlgorithmSettings
from jtnoma.baselines import run_scheme
from jtnoma.config import InvalidConfigError, NetworkConfig
from jtnoma.experiments import ScenarioConfigs, ScenarioSpec, run_sweep, summarize_sweep
from jtnoma.instance import NetworkInstance, validate_instance
from jtnoma.oracle import DEFAULT_GRID_POINTS, OracleSizeError, best_joint
from jtnoma.schemes import Scheme
from jtnoma.solvers import SolveReport, SolveStatus
from jtnoma.topology import (
    ChannelModelParams,
    generate_instance,
    load_instance,
    save_instance,
)
from jtnoma.utils.files import serialize
from jtnoma.utils.run_args import (
    CHANNEL,
    NETWORK,
    SOLVER,
    check_keys,
    get_sections_from_yaml,
)

logger = logging.getLogger("jtnoma")

EXIT_OK = 0
EXIT_INVALID_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3

_STATUS_EXIT = {
    SolveStatus.CONVERGED: EXIT_OK,
    SolveStatus.INFEASIBLE: EXIT_INFEASIBLE,
    SolveStatus.NOT_CONVERGED: EXIT_NOT_CONVERGED,
}


def _sections(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    return get_sections_from_yaml(args.config) if args.config else {}


def _network_config(
    args: argparse.Namespace, sections: dict[str, dict[str, Any]]
) -> NetworkConfig:
    network = dict(sections.get(NETWORK, {}))
    check_keys(NETWORK, network, NetworkConfig)
    service = args.service or network.pop("service", "web")
    network.pop("service", None)
    if args.seed is not None:
        network["rng_seed"] = args.seed
    config = NetworkConfig.default(service, **network)
    config.validate()
    return config


def _instance(args: argparse.Namespace, sections: dict[str, dict[str, Any]]) -> NetworkInstance:
    if getattr(args, "instance", None):
        inst = load_instance(args.instance)
        report = validate_instance(inst)
        if not report.ok:
            raise InvalidConfigError(f"Invalid instance {args.instance}:\n{report}")
        return inst
    channel = ChannelModelParams.from_dict(sections.get(CHANNEL, {}))
    return generate_instance(_network_config(args, sections), channel)


def _write_report(report: SolveReport, out_dir: Path, settings: AlgorithmSettings) -> None:
    summary: dict[str, Any] = {
        "scheme": report.scheme,
        "status": report.status.value,
        "message": report.message,
        "utility": report.utility,
        "feasible": report.feasible,
        "verdict": str(report.verdict) if report.verdict is not None else None,
        "iterations": report.iterations,
        "runtime": report.runtime,
        "utility_trace": report.utility_trace,
        "per_user_mos": report.per_user_mos,
        "per_user_rate": report.per_user_rate,
    }
    if report.schedule is not None and report.power is not None:
        summary["schedule"] = {"theta": report.schedule.theta, "eps": report.schedule.eps}
        summary["power"] = {"p": report.power.p, "q": report.power.q}
    serialize(summary, out_dir / f"report_{report.scheme}.yaml")
    report.trace_frame().to_csv(out_dir / f"convergence_{report.scheme}.csv", index=False)
    if report.violations is not None:
        report.violations.to_frame(settings.tolerances).to_csv(
            out_dir / f"violations_{report.scheme}.csv", index=False
        )


def _run_generate(args: argparse.Namespace) -> int:
    inst = _instance(args, _sections(args))
    path = args.out_dir / "instance.yaml"
    save_instance(inst, path)
    print(f"Instance written to {path}")  # noqa: T201
    return EXIT_OK


def _run_solve(args: argparse.Namespace) -> int:
    sections = _sections(args)
    settings = AlgorithmSettings.from_dict(sections.get(SOLVER, {}))
    inst = _instance(args, sections)
    report = run_scheme(inst, args.scheme, settings)
    _write_report(report, args.out_dir, settings)
    print(  # noqa: T201
        f"{report.scheme}: {report.status.value}, total QoE {report.utility:.4f},"
        f" {report.iterations} iterations"
    )
    return _STATUS_EXIT[report.status]


def _run_sweep(args: argparse.Namespace) -> int:
    scenario = args.scenario
    if not Path(scenario).is_file():
        scenario = ScenarioConfigs.get_scenario_path(scenario)
    spec = ScenarioSpec.from_yaml(scenario)
    if args.out_dir is not None:
        spec.out_dir = args.out_dir
    result = run_sweep(spec, workers=args.workers)
    print(f"Sweep results written to {result.out_dir}")  # noqa: T201
    return {
        "error": EXIT_INFEASIBLE,
        SolveStatus.INFEASIBLE.value: EXIT_INFEASIBLE,
        SolveStatus.NOT_CONVERGED.value: EXIT_NOT_CONVERGED,
    }.get(result.worst_status, EXIT_OK)


def _run_oracle(args: argparse.Namespace) -> int:
    sections = _sections(args)
    settings = AlgorithmSettings.from_dict(sections.get(SOLVER, {}))
    inst = _instance(args, sections)
    scheme = Scheme.from_name(args.scheme)
    solution = best_joint(inst, scheme, args.grid_points, tol=settings.tolerances)
    if solution is None:
        print(f"{scheme.value}: no feasible schedule and power grid point")  # noqa: T201
        return EXIT_INFEASIBLE
    serialize(
        {
            "scheme": scheme.value,
            "utility": solution.utility,
            "schedules_evaluated": solution.schedules_evaluated,
            "schedules_skipped": solution.schedules_skipped,
            "schedule": {"theta": solution.schedule.theta, "eps": solution.schedule.eps},
            "power": {"p": solution.power.p, "q": solution.power.q},
        },
        args.out_dir / f"oracle_{scheme.value}.yaml",
    )
    print(f"{scheme.value}: oracle total QoE {solution.utility:.4f}")  # noqa: T201
    return EXIT_OK


def _run_status(args: argparse.Namespace) -> int:
    summarize_sweep(args.out_dir)
    return EXIT_OK


def _add_instance_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", type=Path, help="YAML file with network, channel and solver sections"
    )
    parser.add_argument("--service", choices=["web", "video", "audio"], help="Service of every SUT")
    parser.add_argument("--seed", type=int, help="Instance seed, overrides the config file")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jtnoma",
        description="QoE-driven joint transmission NOMA resource allocation",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Write a random instance snapshot")
    _add_instance_arguments(generate)
    generate.set_defaults(func=_run_generate)

    solve = commands.add_parser("solve", help="Solve one instance with one scheme")
    _add_instance_arguments(solve)
    solve.add_argument("--instance", type=Path, help="Instance snapshot to solve")
    solve.add_argument("--scheme", default=Scheme.JT_NOMA.value, choices=[s.value for s in Scheme])
    solve.set_defaults(func=_run_solve)

    sweep = commands.add_parser("sweep", help="Run a scenario sweep")
    sweep.add_argument("scenario", help="Scenario file or built-in scenario name")
    sweep.add_argument("--workers", type=int, default=1, help="Parallel sweep cells")
    sweep.add_argument(
        "--out-dir", type=Path, default=None, help="Overrides the out_dir of the scenario"
    )
    sweep.set_defaults(func=_run_sweep)

    oracle = commands.add_parser("oracle", help="Exhaustive solve of a micro instance")
    _add_instance_arguments(oracle)
    oracle.add_argument("--scheme", default=Scheme.JT_NOMA.value, choices=[s.value for s in Scheme])
    oracle.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)
    oracle.set_defaults(func=_run_oracle)

    status = commands.add_parser("status", help="Summarize a sweep directory")
    status.add_argument("out_dir", type=Path, help="Output directory of the sweep")
    status.set_defaults(func=_run_status)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARN, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level)
    try:
        return args.func(args)
    except (InvalidConfigError, OracleSizeError, FileNotFoundError, ValueError) as e:
        logger.error(str(e))
        return EXIT_INVALID_CONFIG
    except NonFiniteObjectiveError as e:
        logger.error(f"Objective is not finite, check the noise and gain inputs: {e}")
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
