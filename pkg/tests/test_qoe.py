from __future__ import annotations

import math

import numpy as np
import pytest
import torch

from jtnoma import (
    NetworkConfig,
    Schedule,
    evaluate_network,
    generate_instance,
    mos,
    mos_curve,
    total_qoe,
)
from jtnoma.qoe import RATE_FLOOR, mos_gradient_wrt_power, per_user_mos
from tests.instances import build_instance, powers, random_binary_schedule, schedule_of
from tests.settings import MICRO


@pytest.mark.core
@pytest.mark.parametrize(
    ("service", "rate", "expected"),
    [
        ("web", 2.0, 1.0),
        ("web", 7.0, 5.0),
        ("video", 7.0, 4.5),
        ("audio", 7.0, 4.5),
        ("web", math.sqrt(14.0), 3.0),
        ("video", math.sqrt(14.0), 2.75),
    ],
)
def test_mos_at_the_anchors(service, rate, expected):
    assert mos(mos_curve(service), rate) == pytest.approx(expected)


@pytest.mark.core
@pytest.mark.parametrize("rate", [0.0, RATE_FLOOR / 2, 1.0, 1.99])
def test_mos_is_clamped_below(rate):
    assert mos(mos_curve("web"), rate) == 1.0


@pytest.mark.core
@pytest.mark.parametrize("rate", [7.0, 50.0, 1e9])
def test_mos_saturates(rate):
    assert mos(mos_curve("video"), rate) == pytest.approx(4.5)


@pytest.mark.core
def test_mos_is_non_decreasing():
    curve = mos_curve("audio")
    values = [mos(curve, r) for r in np.geomspace(1e-3, 100.0, 200)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.mark.core
@pytest.mark.parametrize("service", ["web", "video", "audio"])
def test_floor_slope_only_changes_the_floor(service):
    curve = mos_curve(service)
    rates = torch.tensor([0.0, 0.5, 1.0, 1.99, 2.5, 4.0, 7.0, 50.0], dtype=torch.float64)
    exact = curve(rates)
    assert torch.equal(curve.with_floor_slope(rates, 0.0), exact)
    sloped = curve.with_floor_slope(rates, 0.05)
    above = exact > 1.0
    assert torch.allclose(sloped[above], exact[above])
    assert torch.all(sloped[~above] < 1.0)


@pytest.mark.core
def test_floor_slope_gives_an_ascent_direction():
    curve = mos_curve("web")
    rate = torch.tensor([0.5, 1.0, 1.5], dtype=torch.float64, requires_grad=True)
    curve.with_floor_slope(rate, 0.05).sum().backward()
    assert torch.all(rate.grad > 0)
    expected = 0.05 * curve.slope / ((rate.detach() + RATE_FLOOR) * math.log(2.0))
    assert torch.allclose(rate.grad, expected)


@pytest.mark.core
@pytest.mark.parametrize("service", ["web", "video", "audio"])
def test_rate_for_inverts_the_curve(service):
    curve = mos_curve(service)
    assert curve.rate_for(1.0) == 0.0
    assert curve.rate_for(curve.mos_max) == pytest.approx(7.0)
    assert mos(curve, curve.rate_for(2.5)) == pytest.approx(2.5)


@pytest.mark.core
def test_silent_network_scores_one_per_user():
    inst = generate_instance(NetworkConfig(**MICRO))
    sched = schedule_of(np.ones(inst.shape))
    assert total_qoe(inst, sched, powers(inst, 0.0)) == pytest.approx(inst.num_sut)
    assert total_qoe(inst, Schedule.empty(*inst.shape), powers(inst, 1.0)) == pytest.approx(
        inst.num_sut
    )


@pytest.mark.core
def test_single_link_reaches_the_top_of_the_curve():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=1.0)
    sched = schedule_of(np.ones((1, 1, 1)))
    # SINR 127 is a rate of 7 bits/s/Hz.
    assert total_qoe(inst, sched, powers(inst, 127.0)) == pytest.approx(5.0)


@pytest.mark.core
@pytest.mark.parametrize("seed", range(5))
def test_per_user_mos_stays_in_range(seed):
    rng = np.random.default_rng(seed)
    inst = generate_instance(NetworkConfig.default("video", **MICRO, rng_seed=seed))
    sched = random_binary_schedule(inst, rng)
    scores = per_user_mos(inst, sched, powers(inst, rng.uniform(0.0, 5.0, size=inst.shape)))
    assert scores.shape == (inst.num_sut,)
    assert np.all((scores >= 1.0) & (scores <= 4.5))


@pytest.mark.core
def test_gradient_points_to_more_power():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=1.0)
    sched = schedule_of(np.ones((1, 1, 1)))
    # Rate 3 lies strictly between the clamps.
    dp, dq = mos_gradient_wrt_power(inst, sched, powers(inst, 7.0))
    assert dp[0, 0, 0] > 0
    assert dq.shape == (1, 1)


@pytest.mark.core
def test_gradient_vanishes_at_saturation():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=1.0)
    sched = schedule_of(np.ones((1, 1, 1)))
    dp, _ = mos_gradient_wrt_power(inst, sched, powers(inst, 1000.0))
    assert dp[0, 0, 0] == 0.0


def central_difference(inst, sched, p, q, index, h=1e-6):
    up, down = p.copy(), p.copy()
    up[index] += h
    down[index] -= h
    upper = total_qoe(inst, sched, powers(inst, up, q))
    lower = total_qoe(inst, sched, powers(inst, down, q))
    return (upper - lower) / (2 * h)


@pytest.mark.core
def test_single_link_gradient_in_closed_form():
    inst = build_instance(np.ones((1, 1, 1)), noise_power=1.0)
    sched = schedule_of(np.ones((1, 1, 1)))
    curve = mos_curve("web")
    dp, _ = mos_gradient_wrt_power(inst, sched, powers(inst, 7.0))
    # d/dp of slope * log2(log2(1 + p)).
    expected = curve.slope / (math.log(2) * 8.0 * math.log2(8.0) * math.log(2))
    assert dp[0, 0, 0] == pytest.approx(expected, rel=1e-9)
    p = np.full((1, 1, 1), 7.0)
    assert dp[0, 0, 0] == pytest.approx(
        central_difference(inst, sched, p, 0.0, (0, 0, 0)), rel=1e-4
    )


@pytest.mark.core
@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    inst = generate_instance(NetworkConfig(**MICRO, noise_power=1e-9, rng_seed=seed))
    sched = schedule_of(np.ones(inst.shape))
    p = rng.uniform(0.5, 5.0, size=inst.shape)
    q = np.full((inst.num_put, inst.num_subcarriers), 1.0)
    dp, _ = mos_gradient_wrt_power(inst, sched, powers(inst, p, q))
    rates = evaluate_network(inst, sched, powers(inst, p, q)).sut_rate
    if np.any(np.abs(rates - 2.0) < 1e-3) or np.any(np.abs(rates - 7.0) < 1e-3):
        pytest.skip("a user sits on a kink of the MOS curve")
    for index in np.ndindex(inst.shape):
        fd = central_difference(inst, sched, p, q, index)
        assert dp[index] == pytest.approx(fd, rel=1e-4, abs=1e-8)


@pytest.mark.acceptance
def test_gradient_at_many_smooth_points():
    checked = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        inst = generate_instance(NetworkConfig(**MICRO, noise_power=1e-9, rng_seed=seed))
        sched = schedule_of(np.ones(inst.shape))
        p = rng.uniform(0.5, 5.0, size=inst.shape)
        q = np.full((inst.num_put, inst.num_subcarriers), 1.0)
        rates = evaluate_network(inst, sched, powers(inst, p, q)).sut_rate
        if np.any(np.abs(rates - 2.0) < 1e-3) or np.any(np.abs(rates - 7.0) < 1e-3):
            continue
        dp, _ = mos_gradient_wrt_power(inst, sched, powers(inst, p, q))
        for index in np.ndindex(inst.shape):
            fd = central_difference(inst, sched, p, q, index)
            assert dp[index] == pytest.approx(fd, rel=1e-4, abs=1e-8)
        checked += 1
        if checked == 100:
            break
    assert checked == 100
