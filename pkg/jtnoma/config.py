"""Network configuration, service profiles and unit helpers.

Index conventions used throughout the package:

* SBS index `l` in `range(num_sbs)`; the MBS is never part of that range.
* SUT index `g` in `range(num_sut)`, PUT index `m` in `range(num_put)`.
* Subcarrier index `n` in `range(num_subcarriers)`.
* Secondary-tier tensors are laid out `[l][g][n]`, primary-tier tensors `[m][n]`.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any, ClassVar, Mapping, Sequence

import numpy as np
from typing_extensions import Self

from jtnoma.utils.types import PerEntity


class InvalidConfigError(ValueError):
    """Raised when a configuration or scenario file does not describe a valid setup."""


def dbm_to_watts(dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    """Convert a power level in watts to dBm."""
    return 10.0 * math.log10(watts) + 30.0


class ServiceKind(enum.IntEnum):
    """Multimedia service run by every SUT of a scenario."""

    WEB = 1
    VIDEO = 2
    AUDIO = 3

    @classmethod
    def from_name(cls, name: str | int | ServiceKind) -> ServiceKind:
        if isinstance(name, ServiceKind):
            return name
        if isinstance(name, int):
            return cls(name)
        try:
            return cls[name.strip().upper()]
        except KeyError as e:
            choices = ", ".join(k.name.lower() for k in cls)
            raise InvalidConfigError(
                f"Unknown service '{name}'. Expected one of: {choices}"
            ) from e


@dataclass(frozen=True)
class ServiceProfile:
    """Rate anchors of the MOS curve of one service.

    The rate `rate_anchor_min` maps to MOS 1 and `rate_anchor_max` maps to `mos_max`.
    """

    kind: ServiceKind
    mos_max: float
    rate_anchor_min: float = 2.0
    rate_anchor_max: float = 7.0

    MOS_MAX: ClassVar[Mapping[ServiceKind, float]] = {
        ServiceKind.WEB: 5.0,
        ServiceKind.VIDEO: 4.5,
        ServiceKind.AUDIO: 4.5,
    }

    def __post_init__(self) -> None:
        if not self.rate_anchor_min < self.rate_anchor_max:
            raise InvalidConfigError(
                f"rate_anchor_min={self.rate_anchor_min} must be below"
                f" rate_anchor_max={self.rate_anchor_max}"
            )
        if not self.mos_max > 1.0:
            raise InvalidConfigError(f"mos_max={self.mos_max} must exceed 1")

    @classmethod
    def for_service(cls, kind: ServiceKind | str | int) -> ServiceProfile:
        kind = ServiceKind.from_name(kind)
        return cls(kind=kind, mos_max=cls.MOS_MAX[kind])


def _broadcast(value: PerEntity, size: int, *, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if arr.shape != (size,):
        raise InvalidConfigError(
            f"'{name}' has {arr.size} entries but {size} are required"
        )
    return arr.copy()


def _freeze(value: Any) -> Any:
    # Lists coming from yaml become tuples so the config stays hashable and immutable.
    if isinstance(value, (list, np.ndarray)):
        return tuple(float(v) for v in np.asarray(value, dtype=np.float64).ravel())
    return value


@dataclass(frozen=True)
class NetworkConfig:
    """All size and limit parameters of one scenario.

    Per-entity limits accept a scalar, applied to every entity, or one value per entity.
    Use the `*_array` accessors to obtain the broadcast numpy arrays.

    Attributes:
        num_sbs: Number of small base stations `L`.
        num_sut: Number of secondary users `G`.
        num_put: Number of primary users `M`.
        num_subcarriers: Number of subcarriers `N`.
        mbs_radius: Coverage radius of the MBS in meters.
        sbs_radius: Coverage radius of each SBS in meters.
        subcarrier_bandwidth: Bandwidth of one subcarrier in hertz.
        q_max: MBS transmit power budget in watts.
        p_max: Per-SBS transmit power budget in watts.
        backhaul_cap: Per-SBS backhaul capacity in bits/s.
        load_cap: Per-SBS maximum number of associated SUTs.
        sic_cap: Per-subcarrier maximum number of multiplexed SUTs.
        put_rate_min: Per-PUT minimum rate in bits/s/Hz.
        mos_min: Per-SUT minimum MOS.
        noise_power: Per-SUT noise power in watts.
        put_noise_power: Noise power at the PUT receivers in watts.
        service: Service run by every SUT.
        rng_seed: Seed of the instance generator.
    """

    num_sbs: int = 10
    num_sut: int = 8
    num_put: int = 6
    num_subcarriers: int = 32
    mbs_radius: float = 500.0
    sbs_radius: float = 50.0
    subcarrier_bandwidth: float = 15e3
    q_max: float = field(default_factory=lambda: dbm_to_watts(42.0))
    p_max: PerEntity = field(default_factory=lambda: dbm_to_watts(37.0))
    backhaul_cap: PerEntity = 11.183e6
    load_cap: PerEntity = 3
    sic_cap: PerEntity = 2
    put_rate_min: PerEntity = 2.0
    mos_min: PerEntity = 1.0
    noise_power: PerEntity = field(default_factory=lambda: dbm_to_watts(-117.0))
    put_noise_power: float = field(default_factory=lambda: dbm_to_watts(-117.0))
    service: ServiceKind = ServiceKind.WEB
    rng_seed: int = 0

    PER_SBS: ClassVar[tuple[str, ...]] = ("p_max", "backhaul_cap", "load_cap")
    PER_SUBCARRIER: ClassVar[tuple[str, ...]] = ("sic_cap",)
    PER_PUT: ClassVar[tuple[str, ...]] = ("put_rate_min",)
    PER_SUT: ClassVar[tuple[str, ...]] = ("mos_min", "noise_power")

    def __post_init__(self) -> None:
        object.__setattr__(self, "service", ServiceKind.from_name(self.service))
        for name in (*self.PER_SBS, *self.PER_SUBCARRIER, *self.PER_PUT, *self.PER_SUT):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    @classmethod
    def default(cls, service: ServiceKind | str = ServiceKind.WEB, **overrides: Any) -> Self:
        """The simulation parameter set of the web/video/audio scenarios.

        Web runs L=10, N=32, M=6; video L=10, N=16, G=10; audio L=10, G=8, M=4.
        """
        kind = ServiceKind.from_name(service)
        sizes: dict[str, Any] = {
            ServiceKind.WEB: {"num_sbs": 10, "num_subcarriers": 32, "num_put": 6},
            ServiceKind.VIDEO: {"num_sbs": 10, "num_subcarriers": 16, "num_sut": 10},
            ServiceKind.AUDIO: {"num_sbs": 10, "num_sut": 8, "num_put": 4},
        }[kind]
        return cls(**{**sizes, "service": kind, **overrides})

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        """Build a config from a mapping whose keys mirror the field names."""
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidConfigError(
                f"Unknown network config key(s) {sorted(unknown)}."
                f" Valid keys are: {', '.join(sorted(allowed))}"
            )
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["service"] = self.service.name.lower()
        return out

    def replace(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)

    @property
    def profile(self) -> ServiceProfile:
        return ServiceProfile.for_service(self.service)

    # Broadcast accessors.
    @property
    def p_max_array(self) -> np.ndarray:
        return _broadcast(self.p_max, self.num_sbs, name="p_max")

    @property
    def backhaul_cap_array(self) -> np.ndarray:
        return _broadcast(self.backhaul_cap, self.num_sbs, name="backhaul_cap")

    @property
    def load_cap_array(self) -> np.ndarray:
        return _broadcast(self.load_cap, self.num_sbs, name="load_cap")

    @property
    def sic_cap_array(self) -> np.ndarray:
        return _broadcast(self.sic_cap, self.num_subcarriers, name="sic_cap")

    @property
    def put_rate_min_array(self) -> np.ndarray:
        return _broadcast(self.put_rate_min, self.num_put, name="put_rate_min")

    @property
    def mos_min_array(self) -> np.ndarray:
        return _broadcast(self.mos_min, self.num_sut, name="mos_min")

    @property
    def noise_power_array(self) -> np.ndarray:
        return _broadcast(self.noise_power, self.num_sut, name="noise_power")

    def check(self) -> list[str]:
        """List every broken invariant. Empty iff the config is valid."""
        problems: list[str] = []
        for name in ("num_sbs", "num_sut", "num_put", "num_subcarriers"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                problems.append(f"{name}={value} must be an integer >= 1")
        if problems:
            return problems

        if self.num_put > self.num_subcarriers:
            problems.append(
                f"num_put={self.num_put} exceeds num_subcarriers={self.num_subcarriers};"
                " every PUT must hold a subcarrier"
            )
        for name in (
            "mbs_radius",
            "sbs_radius",
            "subcarrier_bandwidth",
            "q_max",
            "put_noise_power",
        ):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                problems.append(f"{name}={value} must be strictly positive")

        accessors = {
            "p_max": lambda: self.p_max_array,
            "backhaul_cap": lambda: self.backhaul_cap_array,
            "load_cap": lambda: self.load_cap_array,
            "sic_cap": lambda: self.sic_cap_array,
            "put_rate_min": lambda: self.put_rate_min_array,
            "mos_min": lambda: self.mos_min_array,
            "noise_power": lambda: self.noise_power_array,
        }
        arrays: dict[str, np.ndarray] = {}
        for name, get in accessors.items():
            try:
                arrays[name] = get()
            except InvalidConfigError as e:
                problems.append(str(e))

        for name in ("p_max", "backhaul_cap", "noise_power", "put_rate_min"):
            arr = arrays.get(name)
            if arr is not None and not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
                problems.append(f"{name} entries must be strictly positive")
        for name in ("load_cap", "sic_cap"):
            arr = arrays.get(name)
            if arr is not None and not np.all(arr >= 1):
                problems.append(f"{name} entries must be >= 1")

        mos = arrays.get("mos_min")
        mos_max = self.profile.mos_max
        if mos is not None and not np.all((mos >= 1.0) & (mos <= mos_max)):
            problems.append(f"mos_min entries must lie in [1, {mos_max}]")
        return problems

    def validate(self) -> None:
        """Raise `InvalidConfigError` listing every broken invariant."""
        problems = self.check()
        if problems:
            raise InvalidConfigError("Invalid network config: " + "; ".join(problems))


__all__: Sequence[str] = (
    "InvalidConfigError",
    "NetworkConfig",
    "ServiceKind",
    "ServiceProfile",
    "dbm_to_watts",
    "watts_to_dbm",
)
