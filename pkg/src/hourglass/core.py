"""Shared vocabulary: criticality, coherence states, bus messages and run configuration."""
from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Optional


class ConfigError(ValueError):
    pass


class ProtocolViolation(RuntimeError):
    """Raised when a controller hits a cell that can never legally occur."""


class Criticality(enum.Enum):
    CR = "cr"
    NCR = "ncr"


class State(enum.Enum):
    I = "I"
    IS_AD = "IS_AD"
    IS_D = "IS_D"
    IS_DI = "IS_DI"
    S = "S"
    S_T_I = "S_T_I"
    SI_A = "SI_A"
    SI = "SI"
    S_T_M = "S_T_M"
    SM_A = "SM_A"
    IM_AD = "IM_AD"
    IM_D = "IM_D"
    IM_DI = "IM_DI"
    M = "M"
    M_T_I = "M_T_I"
    MI_R = "MI_R"
    MI_A = "MI_A"


STABLE_STATES = frozenset({State.I, State.S, State.M, State.SI})
WRITER_STATES = frozenset({State.M, State.M_T_I, State.MI_R, State.MI_A})
READER_STATES = frozenset({State.S, State.S_T_I, State.S_T_M, State.SI_A, State.SM_A, State.SI})
# states in which the private copy carries running timers
TIMED_STATES = frozenset({State.S, State.S_T_I, State.S_T_M, State.M, State.M_T_I})


class MessageKind(enum.Enum):
    GET_S = "GetS"
    GET_M = "GetM"
    PUT_M = "PutM"
    SELF_INV = "SelfInv"
    SEND_DATA = "SendData"
    ALL_INV = "AllInv"
    DATA = "Data"


MEMORY = -1  # origin/destination id used for the shared memory


@dataclass(frozen=True)
class BusMessage:
    kind: MessageKind
    address: int
    origin: int
    origin_criticality: Optional[Criticality]
    destination: Optional[int] = None
    issue_cycle: int = 0


@dataclass(frozen=True)
class TimerConfig:
    """Initial timeout values, in whole TDM periods unless ``in_cycles`` is set.

    ``v_x_y`` is the hold time of a line cached by an ``x`` core when a ``y``
    core requests it.
    """

    v_cr_cr: float = 2
    v_cr_ncr: float = 4
    v_ncr_cr: float = 1
    v_ncr_ncr: float = 2
    in_cycles: bool = False

    def __post_init__(self):
        for name in ("v_cr_cr", "v_cr_ncr", "v_ncr_cr", "v_ncr_ncr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def cycles(self, period: int) -> "TimerCycles":
        scale = 1 if self.in_cycles else period
        return TimerCycles(
            int(round(self.v_cr_cr * scale)),
            int(round(self.v_cr_ncr * scale)),
            int(round(self.v_ncr_cr * scale)),
            int(round(self.v_ncr_ncr * scale)),
        )


@dataclass(frozen=True)
class TimerCycles:
    cr_cr: int
    cr_ncr: int
    ncr_cr: int
    ncr_ncr: int

    def max(self) -> int:
        return max(self.cr_cr, self.cr_ncr, self.ncr_cr, self.ncr_ncr)


@dataclass(frozen=True)
class CacheGeometry:
    line_bytes: int = 64
    sets: int = 256
    ways: int = 1

    def __post_init__(self):
        if self.line_bytes <= 0 or self.line_bytes & (self.line_bytes - 1):
            raise ConfigError("line_bytes must be a positive power of two")
        if self.sets <= 0 or self.ways <= 0:
            raise ConfigError("sets and ways must be positive")


@dataclass(frozen=True)
class SimConfig:
    n_cr: int = 2
    n_ncr: int = 2
    slot_width_cycles: int = 50
    timer_config: TimerConfig = field(default_factory=TimerConfig)
    cache_geometry: CacheGeometry = field(default_factory=CacheGeometry)
    access_latency: Optional[int] = None
    hit_latency: int = 3
    seed: int = 0
    max_cycles: int = 10_000_000

    def __post_init__(self):
        if self.n_cr < 1:
            raise ConfigError("at least one critical core is required")
        if self.n_ncr < 0:
            raise ConfigError("n_ncr must be non-negative")
        if self.slot_width_cycles < 1:
            raise ConfigError("slot width must be positive")
        if self.access_latency is None:
            object.__setattr__(self, "access_latency", self.slot_width_cycles)
        if not 1 <= self.access_latency <= self.slot_width_cycles:
            raise ConfigError("access latency must fit inside one slot (1 <= L_acc <= SW)")
        if self.hit_latency < 0:
            raise ConfigError("hit latency must be non-negative")

    @property
    def n_cores(self) -> int:
        return self.n_cr + self.n_ncr

    @property
    def period(self) -> int:
        return tdm_period(self)

    @property
    def timers(self) -> TimerCycles:
        return self.timer_config.cycles(self.period)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        doc = dict(doc)
        _reject_unknown(cls, doc)
        if "timer_config" in doc:
            _reject_unknown(TimerConfig, doc["timer_config"])
            doc["timer_config"] = TimerConfig(**doc["timer_config"])
        if "cache_geometry" in doc:
            _reject_unknown(CacheGeometry, doc["cache_geometry"])
            doc["cache_geometry"] = CacheGeometry(**doc["cache_geometry"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def replace(self, **changes) -> "SimConfig":
        doc = {f: getattr(self, f) for f in self.__dataclass_fields__}
        doc.update(changes)
        if "access_latency" not in changes and self.access_latency == self.slot_width_cycles:
            doc["access_latency"] = None
        return SimConfig(**doc)


def _reject_unknown(cls, doc: dict) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{cls.__name__} must be a JSON object")
    unknown = set(doc) - set(cls.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")


def criticality_of(core: int, config: SimConfig) -> Criticality:
    """Critical cores occupy ids ``[0, n_cr)``; the rest are non-critical."""
    if not 0 <= core < config.n_cores:
        raise ConfigError(f"core {core} out of range for {config.n_cores} cores")
    return Criticality.CR if core < config.n_cr else Criticality.NCR


def tdm_period(config: SimConfig) -> int:
    return config.n_cr * config.slot_width_cycles


def timer_initial_values(holder: Criticality, timers, period: Optional[int] = None) -> tuple[int, int]:
    """Return ``(cr_timer, ncr_timer)`` initial cycles for a line held by ``holder``.

    ``timers`` is either already converted (:class:`TimerCycles`) or a
    :class:`TimerConfig`, in which case ``period`` is required.
    """
    if isinstance(timers, TimerConfig):
        if period is None and not timers.in_cycles:
            raise ConfigError("period is required to convert timer periods to cycles")
        timers = timers.cycles(period or 1)
    if holder is Criticality.CR:
        return timers.cr_cr, timers.cr_ncr
    return timers.ncr_cr, timers.ncr_ncr
