"""Seeded random network instances and SIC decoding orders."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np

from jtnoma.config import InvalidConfigError, NetworkConfig
from jtnoma.instance import NetworkInstance, Positions
from jtnoma.utils.files import deserialize, serialize
from jtnoma.utils.run_args import CHANNEL, check_keys

if TYPE_CHECKING:
    from jtnoma.schedule import Schedule

logger = logging.getLogger(__name__)

SNAPSHOT_SCHEMA = "jtnoma.instance/v1"

# Decoding groups, decoded in ascending order.
_JT_GROUP = 0
_NON_JT_GROUP = 1


@dataclass(frozen=True)
class ChannelModelParams:
    """Log-distance path loss with i.i.d. Rayleigh fading.

    `PL(dB) = reference_loss_db + 10 * exponent * log10(d / 1 m)`, the fading power gain
    is exponential with mean `rayleigh_scale`.
    """

    pathloss_exponent_mbs: float = 3.76
    pathloss_exponent_sbs: float = 3.67
    reference_loss_db: float = 38.0
    rayleigh_scale: float = 1.0

    def __post_init__(self) -> None:
        for name in ("pathloss_exponent_mbs", "pathloss_exponent_sbs"):
            value = getattr(self, name)
            if not 2.0 <= value <= 6.0:
                raise InvalidConfigError(f"{name}={value} must lie in [2, 6]")
        if not self.rayleigh_scale > 0:
            raise InvalidConfigError(
                f"rayleigh_scale={self.rayleigh_scale} must be strictly positive"
            )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ChannelModelParams:
        check_keys(CHANNEL, data, cls)
        return cls(**data)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def pathloss_gain(
    distance: np.ndarray | float, exponent: float, reference_loss_db: float
) -> np.ndarray:
    """Linear large-scale power gain at `distance` meters, clamped at the 1 m reference."""
    d = np.maximum(np.asarray(distance, dtype=np.float64), 1.0)
    loss_db = reference_loss_db + 10.0 * exponent * np.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def draw_fading(rng: np.random.Generator, size: tuple[int, ...], scale: float = 1.0) -> np.ndarray:
    """Rayleigh fading power gains, i.e. exponential draws with mean `scale`."""
    draws = rng.exponential(scale=scale, size=size)
    return np.maximum(draws, np.finfo(np.float64).tiny)


def uniform_disc(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """`count` points uniformly distributed in a disc around the origin."""
    r = radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def round_robin_allocation(num_put: int, num_subcarriers: int) -> np.ndarray:
    """`[M, N]` OFDMA map giving subcarrier `n` to PUT `n mod M`."""
    pi = np.zeros((num_put, num_subcarriers), dtype=np.int64)
    pi[np.arange(num_subcarriers) % num_put, np.arange(num_subcarriers)] = 1
    return pi


def _distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def generate_instance(
    cfg: NetworkConfig,
    ch: ChannelModelParams | None = None,
) -> NetworkInstance:
    """Draw a random instance, deterministic in `cfg.rng_seed`.

    The MBS sits at the origin, SBSs and all users are uniform in the MBS disc.

    Raises:
        InvalidConfigError: If `cfg` is not a valid configuration.
    """
    cfg.validate()
    ch = ch or ChannelModelParams()
    L, G, M, N = cfg.num_sbs, cfg.num_sut, cfg.num_put, cfg.num_subcarriers

    placement_seed, fading_seed = np.random.SeedSequence(cfg.rng_seed).spawn(2)
    placement = np.random.default_rng(placement_seed)
    fading = np.random.default_rng(fading_seed)

    mbs = np.zeros((1, 2))
    sbs = uniform_disc(placement, L, cfg.mbs_radius)
    sut = uniform_disc(placement, G, cfg.mbs_radius)
    put = uniform_disc(placement, M, cfg.mbs_radius)

    def gains(tx: np.ndarray, rx: np.ndarray, exponent: float) -> np.ndarray:
        large_scale = pathloss_gain(_distances(tx, rx), exponent, ch.reference_loss_db)
        small_scale = draw_fading(fading, (*large_scale.shape, N), ch.rayleigh_scale)
        return large_scale[..., None] * small_scale

    inst = NetworkInstance(
        config=cfg,
        positions=Positions(mbs=mbs[0], sbs=sbs, sut=sut, put=put),
        sbs_sut_gain=gains(sbs, sut, ch.pathloss_exponent_sbs),
        mbs_sut_gain=gains(mbs, sut, ch.pathloss_exponent_mbs)[0],
        sbs_put_gain=gains(sbs, put, ch.pathloss_exponent_sbs),
        mbs_put_gain=gains(mbs, put, ch.pathloss_exponent_mbs)[0],
        primary_alloc=round_robin_allocation(M, N),
        channel=ch,
    )
    logger.debug(f"Generated instance L={L} G={G} M={M} N={N} seed={cfg.rng_seed}")
    return inst


def _binary_chi(sched: Schedule) -> np.ndarray:
    # Relaxed schedules are read at the 0.5 threshold.
    return np.asarray(sched.chi) >= 0.5


def _decoding_ranks(inst: NetworkInstance, chi: np.ndarray, l: int, n: int) -> np.ndarray:
    """Decoding position of every SUT on `(l, n)`; lower decodes first."""
    G = inst.num_sut
    serving = chi[:, :, n]  # [L, G]
    num_serving = serving.sum(axis=0)
    is_jt = num_serving >= 2

    dist = inst.sbs_sut_distance  # [L, G]
    with np.errstate(invalid="ignore", divide="ignore"):
        avg_dist = np.where(
            is_jt, (dist * serving).sum(axis=0) / np.maximum(num_serving, 1), 0.0
        )

    group = np.where(is_jt, _JT_GROUP, _NON_JT_GROUP)
    secondary = np.where(is_jt, -avg_dist, inst.sbs_sut_gain[l, :, n])
    order = np.lexsort((np.arange(G), secondary, group))
    ranks = np.empty(G, dtype=np.int64)
    ranks[order] = np.arange(G)
    return ranks


def decoding_order(inst: NetworkInstance, sched: Schedule, l: int, n: int) -> list[int]:
    """SIC decoding order of the NOMA cluster of SBS `l` on subcarrier `n`.

    JT users (served by at least two SBSs on `n`) decode before non-JT users. JT users
    are ordered by descending average distance to their serving SBSs, non-JT users by
    ascending gain from `l`. Ties go to the lower SUT index.
    """
    chi = _binary_chi(sched)
    members = np.flatnonzero(chi[l, :, n])
    ranks = _decoding_ranks(inst, chi, l, n)
    return [int(g) for g in members[np.argsort(ranks[members], kind="stable")]]


def precedence_tensor(inst: NetworkInstance, sched: Schedule) -> np.ndarray:
    """`[L, G, G, N]` tensor, 1 where the second SUT is decoded after the first on `(l, n)`.

    The order is total over all SUTs, members or not, so relaxed activations get a
    well-defined NOMA term.
    """
    L, G, N = inst.shape
    chi = _binary_chi(sched)
    prec = np.zeros((L, G, G, N), dtype=np.float64)
    for l in range(L):
        for n in range(N):
            ranks = _decoding_ranks(inst, chi, l, n)
            prec[l, :, :, n] = ranks[None, :] > ranks[:, None]
    return prec


def save_instance(inst: NetworkInstance, path: Path | str) -> None:
    """Write a replayable YAML snapshot of `inst`."""
    data = {
        "schema": SNAPSHOT_SCHEMA,
        "config": inst.config.to_dict(),
        "channel": None if inst.channel is None else inst.channel.to_dict(),
        "positions": {
            "mbs": inst.positions.mbs,
            "sbs": inst.positions.sbs,
            "sut": inst.positions.sut,
            "put": inst.positions.put,
        },
        "gains": {
            "sbs_sut": inst.sbs_sut_gain,
            "mbs_sut": inst.mbs_sut_gain,
            "sbs_put": inst.sbs_put_gain,
            "mbs_put": inst.mbs_put_gain,
        },
        "primary_alloc": inst.primary_alloc,
    }
    serialize(data, path)


def load_instance(path: Path | str) -> NetworkInstance:
    """Read a snapshot written by `save_instance`.

    Raises:
        InvalidConfigError: If the file is not a snapshot of a known schema.
    """
    data = deserialize(path)
    schema = data.get("schema")
    if schema != SNAPSHOT_SCHEMA:
        raise InvalidConfigError(
            f"{path} has schema {schema!r}, expected {SNAPSHOT_SCHEMA!r}"
        )
    try:
        channel = data.get("channel")
        positions = data["positions"]
        gains = data["gains"]
        return NetworkInstance(
            config=NetworkConfig.from_dict(data["config"]),
            positions=Positions(
                mbs=np.asarray(positions["mbs"], dtype=np.float64),
                sbs=np.asarray(positions["sbs"], dtype=np.float64),
                sut=np.asarray(positions["sut"], dtype=np.float64),
                put=np.asarray(positions["put"], dtype=np.float64),
            ),
            sbs_sut_gain=np.asarray(gains["sbs_sut"], dtype=np.float64),
            mbs_sut_gain=np.asarray(gains["mbs_sut"], dtype=np.float64),
            sbs_put_gain=np.asarray(gains["sbs_put"], dtype=np.float64),
            mbs_put_gain=np.asarray(gains["mbs_put"], dtype=np.float64),
            primary_alloc=np.asarray(data["primary_alloc"], dtype=np.int64),
            channel=None if channel is None else ChannelModelParams.from_dict(channel),
        )
    except KeyError as e:
        raise InvalidConfigError(f"Snapshot {path} is missing the key {e}") from e
