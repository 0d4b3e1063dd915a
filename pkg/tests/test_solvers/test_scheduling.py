from __future__ import annotations

import numpy as np
import pytest

from jtnoma import (
    NetworkConfig,
    PowerAllocation,
    Schedule,
    Scheme,
    best_joint,
    enumerate_schedules,
    generate_instance,
    solve_schedule,
    total_qoe,
)
from jtnoma.solvers import (
    InfeasibleScheduleError,
    ScheduleSolveConfig,
    binary_forcing_residuals,
    improve_schedule,
    linearization_residuals,
    round_and_repair,
    structurally_feasible,
)
from tests.instances import build_instance, schedule_of
from tests.settings import GRID_POINTS, MICRO, fast_alm


def schedule_config(**overrides) -> ScheduleSolveConfig:
    return ScheduleSolveConfig(alm=fast_alm(), **overrides)


def relaxed(theta, eps, chi) -> Schedule:
    return Schedule.from_relaxed(
        np.full((1, 1), theta), np.full((1, 1, 1), eps), np.full((1, 1, 1), chi)
    )


@pytest.mark.core
@pytest.mark.parametrize(
    ("point", "expected"),
    [
        ((1.0, 1.0, 1.0), (0.0, 0.0, 0.0)),
        ((1.0, 1.0, 0.0), (-1.0, -1.0, 1.0)),
        ((0.5, 0.5, 0.25), (-0.25, -0.25, -0.25)),
        ((0.0, 0.0, 0.0), (0.0, 0.0, -1.0)),
    ],
)
def test_linearization_residuals(point, expected):
    residuals = linearization_residuals(relaxed(*point))
    assert [float(r.item()) for r in residuals] == pytest.approx(list(expected))


@pytest.mark.core
def test_binary_forcing_residuals():
    assert binary_forcing_residuals(relaxed(0.5, 0.5, 0.25)) == pytest.approx(
        (0.25, 0.25, 0.1875)
    )
    assert binary_forcing_residuals(relaxed(1.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)


@pytest.mark.core
def test_config_is_checked():
    with pytest.raises(ValueError, match="threshold"):
        ScheduleSolveConfig(threshold=1.0)
    with pytest.raises(ValueError, match="start_weight"):
        ScheduleSolveConfig(start_weight=1.5)


@pytest.mark.core
def test_scheme_restrictions_are_structural():
    inst = build_instance(np.ones((2, 2, 1)))
    theta = np.ones((2, 2))
    eps = np.ones((2, 2, 1))
    assert structurally_feasible(inst, theta, eps, Scheme.JT_NOMA)
    assert not structurally_feasible(inst, theta, eps, Scheme.NON_JT_NOMA)
    assert not structurally_feasible(inst, theta, eps, Scheme.JT_OMA)
    diagonal = np.eye(2)
    assert structurally_feasible(inst, diagonal, diagonal[:, :, None], Scheme.NON_JT_OMA)


@pytest.mark.core
def test_repair_keeps_a_feasible_schedule():
    inst = build_instance(np.ones((2, 2, 2)))
    chi = np.zeros((2, 2, 2))
    chi[0, 0, 0] = chi[1, 1, 1] = 1
    sched = schedule_of(chi)
    assert round_and_repair(sched, inst, PowerAllocation.uniform(inst)) == sched


@pytest.mark.core
@pytest.mark.parametrize("scheme", list(Scheme))
def test_repair_of_an_undecided_schedule(scheme):
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=1))
    L, G, N = inst.shape
    undecided = Schedule.from_relaxed(
        np.full((L, G), 0.4), np.full((L, G, N), 0.4), np.full((L, G, N), 0.4)
    )
    repaired = round_and_repair(undecided, inst, PowerAllocation.uniform(inst), scheme)
    assert repaired.check() == []
    assert structurally_feasible(inst, repaired.theta, repaired.eps, scheme)


@pytest.mark.core
def test_repair_of_an_oversubscribed_subcarrier():
    inst = build_instance(np.ones((1, 2, 2)), sic_cap=1)
    repaired = round_and_repair(
        schedule_of(np.ones((1, 2, 2))), inst, PowerAllocation.uniform(inst)
    )
    assert repaired.eps.sum(axis=(0, 1)).tolist() == [1.0, 1.0]
    assert repaired in list(enumerate_schedules(inst))


@pytest.mark.core
def test_repair_reports_an_impossible_load():
    inst = build_instance(np.ones((1, 2, 1)), load_cap=1)
    with pytest.raises(InfeasibleScheduleError, match="load cap"):
        round_and_repair(schedule_of(np.ones((1, 2, 1))), inst, PowerAllocation.uniform(inst))


@pytest.mark.core
def test_single_choice_schedule():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=1.0)
    pw = PowerAllocation.uniform(inst)
    assert round_and_repair(Schedule.empty(1, 1, 1), inst, pw) == schedule_of(
        np.ones((1, 1, 1))
    )
    sched, report = solve_schedule(inst, pw, Schedule.empty(1, 1, 1), schedule_config())
    assert sched == schedule_of(np.ones((1, 1, 1)))
    assert report.feasible


@pytest.mark.core
def test_users_go_to_their_strong_sbs():
    gains = np.array([[[1.0], [1e-3]], [[1e-3], [1.0]]])
    inst = build_instance(gains, load_cap=1, noise_power=1.0, put_rate_min=0.0)
    pw = PowerAllocation.uniform(inst)
    sched, report = solve_schedule(inst, pw, Schedule.empty(2, 2, 1), schedule_config())
    assert sched.theta.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert report.scheme == "jt_noma"
    assert set(report.trace_frame().phase) == {"schedule"}


@pytest.mark.core
def test_lone_user_is_served_jointly():
    inst = build_instance(np.ones((2, 1, 1)), noise_power=0.1, put_rate_min=0.0)
    pw = PowerAllocation.uniform(inst)
    start = schedule_of(np.array([[[1.0]], [[0.0]]]))
    sched, report = solve_schedule(inst, pw, start, schedule_config())
    assert sched.theta[:, 0].sum() == 2
    assert sched.is_jt(0, 0)
    single_sbs = best_joint(inst, Scheme.NON_JT_NOMA, GRID_POINTS)
    assert report.utility >= single_sbs.utility


@pytest.mark.core
@pytest.mark.parametrize("seed", range(2))
@pytest.mark.parametrize("scheme", list(Scheme))
def test_solved_schedules_are_structurally_feasible(seed, scheme):
    rng = np.random.default_rng(seed)
    inst = generate_instance(NetworkConfig(**MICRO, rng_seed=seed))
    pw = PowerAllocation.uniform(inst)
    start = round_and_repair(
        Schedule.from_grants(rng.uniform(size=inst.shape) < 0.5), inst, pw, scheme
    )
    sched, report = solve_schedule(inst, pw, start, schedule_config(), scheme)
    assert sched.check() == []
    assert structurally_feasible(inst, sched.theta, sched.eps, scheme)
    assert report.schedule is sched


@pytest.mark.core
@pytest.mark.parametrize("seed", range(5))
def test_local_search_never_loses_utility(seed):
    inst = generate_instance(
        NetworkConfig(num_sbs=2, num_sut=3, num_put=1, num_subcarriers=3, rng_seed=seed)
    )
    pw = PowerAllocation.uniform(inst)
    rng = np.random.default_rng(seed)
    start = round_and_repair(Schedule.from_grants(rng.uniform(size=inst.shape) < 0.3), inst, pw)
    improved = improve_schedule(inst, pw, start)
    assert structurally_feasible(inst, improved.theta, improved.eps, Scheme.JT_NOMA)
    assert total_qoe(inst, improved, pw) >= total_qoe(inst, start, pw) - 1e-12
