from __future__ import annotations

import numpy as np
import pytest

from jtnoma import (
    ChannelModelParams,
    InvalidConfigError,
    NetworkConfig,
    decoding_order,
    generate_instance,
    load_instance,
    save_instance,
)
from jtnoma.topology import draw_fading, pathloss_gain, precedence_tensor
from tests.instances import build_instance, random_binary_schedule, schedule_of

GAIN_FIELDS = ("sbs_sut_gain", "mbs_sut_gain", "sbs_put_gain", "mbs_put_gain")


def assert_same_instance(a, b):
    assert a.config == b.config
    for name in (*GAIN_FIELDS, "primary_alloc"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    for name in ("mbs", "sbs", "sut", "put"):
        assert np.array_equal(getattr(a.positions, name), getattr(b.positions, name)), name


@pytest.mark.core
def test_same_seed_gives_identical_instances():
    cfg = NetworkConfig.default("video", rng_seed=11)
    assert_same_instance(generate_instance(cfg), generate_instance(cfg))


@pytest.mark.core
def test_different_seeds_give_different_gains():
    a = generate_instance(NetworkConfig.default("web", rng_seed=1))
    b = generate_instance(NetworkConfig.default("web", rng_seed=2))
    assert not np.array_equal(a.sbs_sut_gain, b.sbs_sut_gain)


@pytest.mark.core
def test_round_robin_primary_allocation():
    inst = generate_instance(NetworkConfig.default("web", num_put=6, num_subcarriers=32))
    per_put = inst.primary_alloc.sum(axis=1)
    assert set(per_put.tolist()) <= {32 // 6, -(-32 // 6)}
    assert inst.primary_alloc.sum(axis=0).tolist() == [1] * 32


@pytest.mark.core
def test_nodes_lie_in_the_mbs_disc():
    inst = generate_instance(NetworkConfig.default("audio", rng_seed=5))
    assert np.array_equal(inst.positions.mbs, [0.0, 0.0])
    for nodes in (inst.positions.sbs, inst.positions.sut, inst.positions.put):
        assert np.all(np.linalg.norm(nodes, axis=-1) <= inst.config.mbs_radius)


@pytest.mark.core
def test_invalid_config_is_rejected():
    with pytest.raises(InvalidConfigError):
        generate_instance(NetworkConfig(num_subcarriers=0))


@pytest.mark.core
def test_channel_parameters_are_checked():
    with pytest.raises(InvalidConfigError, match=r"must lie in \[2, 6\]"):
        ChannelModelParams(pathloss_exponent_mbs=1.5)
    with pytest.raises(InvalidConfigError, match="strictly positive"):
        ChannelModelParams(rayleigh_scale=0.0)
    with pytest.raises(InvalidConfigError, match="are not valid"):
        ChannelModelParams.from_dict({"shadowing_db": 8.0})


@pytest.mark.core
def test_doubling_distance_scales_path_loss():
    near, far = pathloss_gain(np.array([40.0, 80.0]), 3.76, 38.0)
    assert far / near == pytest.approx(2.0**-3.76, rel=1e-12)


@pytest.mark.core
def test_doubling_distance_scales_mean_gain():
    rng = np.random.default_rng(0)
    fading = draw_fading(rng, (2, 10**5))
    near, far = pathloss_gain(np.array([40.0, 80.0]), 3.76, 38.0)
    ratio = (far * fading[1]).mean() / (near * fading[0]).mean()
    assert ratio == pytest.approx(2.0**-3.76, rel=0.02)


@pytest.mark.core
def test_fading_has_unit_mean():
    fading = draw_fading(np.random.default_rng(1), (10**6,))
    assert np.all(fading > 0)
    assert fading.mean() == pytest.approx(1.0, rel=0.01)


@pytest.mark.core
def test_non_jt_users_by_ascending_gain():
    gains = np.array([[[0.9], [0.2]]])
    inst = build_instance(gains)
    assert decoding_order(inst, schedule_of(np.ones((1, 2, 1))), 0, 0) == [1, 0]


@pytest.mark.core
def test_ties_go_to_the_lower_index():
    inst = build_instance(np.full((1, 3, 1), 0.5))
    assert decoding_order(inst, schedule_of(np.ones((1, 3, 1))), 0, 0) == [0, 1, 2]


@pytest.mark.core
def test_jt_users_decode_first():
    # SUT 0 is served by both SBSs, SUT 1 only by SBS 0, and has the weaker gain.
    gains = np.array([[[0.9], [0.1]], [[0.9], [0.1]]])
    inst = build_instance(gains)
    chi = np.zeros((2, 2, 1))
    chi[:, 0, 0] = 1
    chi[0, 1, 0] = 1
    assert decoding_order(inst, schedule_of(chi), 0, 0) == [0, 1]


@pytest.mark.core
def test_jt_users_by_descending_distance():
    sbs = np.array([[-10.0, 0.0], [10.0, 0.0]])
    # Mean distance to the serving SBSs: about 31.6 m for SUT 0 and 80.6 m for SUT 1.
    sut = np.array([[0.0, 30.0], [0.0, 80.0]])
    inst = build_instance(np.ones((2, 2, 1)), sbs=sbs, sut=sut)
    assert decoding_order(inst, schedule_of(np.ones((2, 2, 1))), 0, 0) == [1, 0]


@pytest.mark.core
@pytest.mark.parametrize("seed", range(5))
def test_precedence_is_a_strict_total_order(seed):
    rng = np.random.default_rng(seed)
    inst = generate_instance(
        NetworkConfig(num_sbs=3, num_sut=4, num_put=2, num_subcarriers=3, rng_seed=seed)
    )
    sched = random_binary_schedule(inst, rng)
    prec = precedence_tensor(inst, sched)
    L, G, N = inst.shape
    for l in range(L):
        for n in range(N):
            order = prec[l, :, :, n]
            assert np.all(np.diag(order) == 0)
            off_diagonal = ~np.eye(G, dtype=bool)
            assert np.all((order + order.T)[off_diagonal] == 1)
            # A total order has exactly one element with k successors for every k.
            assert sorted(order.sum(axis=1).tolist()) == list(range(G))
            members = decoding_order(inst, sched, l, n)
            assert sorted(members) == np.flatnonzero(sched.chi[l, :, n]).tolist()
            for first, second in zip(members, members[1:]):
                assert order[first, second] == 1


@pytest.mark.core
def test_snapshot_replays_the_instance(tmp_path):
    inst = generate_instance(
        NetworkConfig.default("video", num_sut=3, rng_seed=4),
        ChannelModelParams(pathloss_exponent_sbs=4.0),
    )
    path = tmp_path / "instance.yaml"
    save_instance(inst, path)
    loaded = load_instance(path)
    assert_same_instance(inst, loaded)
    assert loaded.channel == inst.channel


@pytest.mark.core
def test_snapshot_with_unknown_schema(tmp_path):
    path = tmp_path / "instance.yaml"
    path.write_text("schema: other/v2\n")
    with pytest.raises(InvalidConfigError, match="expected 'jtnoma.instance/v1'"):
        load_instance(path)


@pytest.mark.core
def test_snapshot_with_missing_key(tmp_path):
    inst = generate_instance(NetworkConfig(num_sbs=1, num_sut=1, num_put=1, num_subcarriers=1))
    path = tmp_path / "instance.yaml"
    save_instance(inst, path)
    text = path.read_text().replace("primary_alloc:", "primary_allocation:")
    path.write_text(text)
    with pytest.raises(InvalidConfigError, match="missing the key 'primary_alloc'"):
        load_instance(path)
