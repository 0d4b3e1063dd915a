from jtnoma.algorithm import AlgorithmSettings, initial_schedule, run_algorithm1
from jtnoma.baselines import run_all_schemes, run_scheme
from jtnoma.config import (
    InvalidConfigError,
    NetworkConfig,
    ServiceKind,
    ServiceProfile,
    dbm_to_watts,
    watts_to_dbm,
)
from jtnoma.experiments import ScenarioSpec, run_sweep, summarize_sweep
from jtnoma.feasibility import Tolerances, is_feasible, violations
from jtnoma.instance import NetworkInstance, validate_instance
from jtnoma.interference import evaluate_network
from jtnoma.oracle import best_joint, enumerate_schedules, grid_power_search
from jtnoma.qoe import mos, mos_curve, per_user_mos, total_qoe
from jtnoma.schedule import PowerAllocation, Schedule, noma_cluster
from jtnoma.schemes import Scheme
from jtnoma.solvers import SolveReport, SolveStatus, solve_power, solve_schedule
from jtnoma.topology import (
    ChannelModelParams,
    decoding_order,
    generate_instance,
    load_instance,
    save_instance,
)

__all__ = [
    "AlgorithmSettings",
    "ChannelModelParams",
    "InvalidConfigError",
    "NetworkConfig",
    "NetworkInstance",
    "PowerAllocation",
    "ScenarioSpec",
    "Schedule",
    "Scheme",
    "ServiceKind",
    "ServiceProfile",
    "SolveReport",
    "SolveStatus",
    "Tolerances",
    "best_joint",
    "dbm_to_watts",
    "decoding_order",
    "enumerate_schedules",
    "evaluate_network",
    "generate_instance",
    "grid_power_search",
    "initial_schedule",
    "is_feasible",
    "load_instance",
    "mos",
    "mos_curve",
    "noma_cluster",
    "per_user_mos",
    "run_algorithm1",
    "run_all_schemes",
    "run_scheme",
    "run_sweep",
    "save_instance",
    "solve_power",
    "solve_schedule",
    "summarize_sweep",
    "total_qoe",
    "validate_instance",
    "violations",
    "watts_to_dbm",
]
