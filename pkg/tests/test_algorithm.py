from __future__ import annotations

import numpy as np
import pytest

from jtnoma import (
    AlgorithmSettings,
    InvalidConfigError,
    NetworkConfig,
    PowerAllocation,
    Scheme,
    SolveStatus,
    best_joint,
    generate_instance,
    initial_schedule,
    is_feasible,
    mos,
    mos_curve,
    run_algorithm1,
    violations,
)
from jtnoma.solvers import structurally_feasible
from jtnoma.solvers.report import TRACE_COLUMNS
from tests.instances import build_instance
from tests.settings import (
    ACCEPTANCE_SEEDS,
    MICRO,
    ORACLE_MICRO,
    ORACLE_RATIO,
    ORACLE_SLACK,
    fast_settings,
)


@pytest.mark.core
def test_settings_from_dict():
    settings = AlgorithmSettings.from_dict(
        {
            "max_outer_iters": 4,
            "power": {"lambda_policy": "fixed"},
            "schedule": {"threshold": 0.6},
            "tolerances": {"rate": 1e-3},
        }
    )
    assert settings.max_outer_iters == 4
    assert settings.power.lambda_policy.value == "fixed"
    assert settings.schedule.threshold == 0.6
    assert settings.tolerances.rate == 1e-3
    with pytest.raises(InvalidConfigError, match="section 'solver'"):
        AlgorithmSettings.from_dict({"iterations": 4})


@pytest.mark.core
def test_initial_schedule_is_reproducible_and_feasible():
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=6))
    pw = PowerAllocation.uniform(inst)
    first = initial_schedule(inst, pw)
    assert first == initial_schedule(inst, pw)
    assert structurally_feasible(inst, first.theta, first.eps, Scheme.JT_NOMA)


@pytest.mark.core
def test_lone_link_converges_quickly():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=0.1, put_rate_min=0.0)
    report = run_algorithm1(inst, fast_settings())
    assert report.status is SolveStatus.CONVERGED
    assert report.iterations <= 3
    p_max = inst.config.p_max_array[0]
    expected = mos(mos_curve("web"), np.log2(1.0 + p_max / 0.1))
    assert report.utility == pytest.approx(expected, rel=1e-3)


@pytest.mark.core
def test_report_of_a_micro_run():
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=8))
    report = run_algorithm1(inst, fast_settings(max_outer_iters=3))
    assert report.status in set(SolveStatus)
    assert 1 <= report.iterations <= 3
    assert len(report.utility_trace) <= report.iterations + 1
    assert report.per_user_mos.shape == (inst.num_sut,)
    frame = report.trace_frame()
    assert list(frame.columns) == TRACE_COLUMNS
    assert set(frame.phase) <= {"power", "schedule"}
    assert set(frame["round"]) <= set(range(1, report.iterations + 1))
    assert report.runtime > 0


@pytest.mark.core
def test_converged_runs_pass_the_audit():
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=9))
    settings = fast_settings()
    report = run_algorithm1(inst, settings)
    if report.status is SolveStatus.CONVERGED:
        assert is_feasible(violations(inst, report.schedule, report.power), settings.tolerances)
        assert abs(report.utility_trace[-1] - report.utility_trace[-2]) < settings.err_tol
    elif report.status is SolveStatus.INFEASIBLE:
        assert report.message


@pytest.mark.core
@pytest.mark.parametrize("seed", range(8, 13))
def test_report_points_at_the_returned_iterate(seed):
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=seed))
    report = run_algorithm1(inst, fast_settings(max_outer_iters=2))
    if report.schedule is None:
        return
    assert 0 <= report.best_iteration < len(report.utility_trace)
    assert report.utility == pytest.approx(report.utility_trace[report.best_iteration])
    if report.status is SolveStatus.NOT_CONVERGED:
        assert report.utility_trace[report.best_iteration] == max(report.utility_trace)
    elif report.status is SolveStatus.CONVERGED:
        assert report.best_iteration == len(report.utility_trace) - 1


@pytest.mark.core
def test_caps_without_room_are_infeasible():
    inst = build_instance(np.ones((1, 2, 1)), load_cap=1)
    report = run_algorithm1(inst, fast_settings())
    assert report.status is SolveStatus.INFEASIBLE
    assert report.schedule is None
    assert "load cap" in report.message


@pytest.mark.core
def test_same_seed_same_result():
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=10))
    first = run_algorithm1(inst, fast_settings(max_outer_iters=2))
    second = run_algorithm1(inst, fast_settings(max_outer_iters=2))
    assert first.utility == second.utility
    assert first.schedule == second.schedule
    assert first.power == second.power


@pytest.mark.acceptance
def test_close_to_the_oracle_on_micro_instances():
    hits = 0
    for seed in ACCEPTANCE_SEEDS:
        inst = generate_instance(NetworkConfig(**ORACLE_MICRO, rng_seed=seed))
        oracle = best_joint(inst)
        assert oracle is not None, f"seed {seed} has no feasible joint solution"
        assert oracle.schedules_skipped == 0
        report = run_algorithm1(inst)
        if report.feasible:
            assert oracle.utility >= report.utility - ORACLE_SLACK
        if report.utility >= ORACLE_RATIO * oracle.utility:
            hits += 1
    assert hits >= 45
