"""Domain types and scenario configuration.

All energies are joules, lengths meters, packet sizes bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union


class Protocol(str, enum.Enum):
    LEACH = "leach"
    RLEACH = "rleach"


class KoptMode(str, enum.Enum):
    LITERAL_CLAMP = "literal_clamp"
    NORMALIZED = "normalized"
    OFF = "off"


class Fallback(str, enum.Enum):
    DIRECT_TO_BS = "direct_to_bs"
    IDLE = "idle"


class Role(enum.IntEnum):
    NONE = 0
    CH = 1
    MEMBER = 2
    DIRECT = 3


CENTER = "center"

NJ = 1e-9
PJ = 1e-12


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class RadioParams:
    e_elec: float = 50 * NJ  # J/bit, tx and rx electronics
    e_fs: float = 10 * PJ  # J/bit/m^2
    e_mp: float = 0.0013 * PJ  # J/bit/m^4
    e_da: float = 5 * NJ  # J/bit per aggregated signal


@dataclass(frozen=True)
class ProtocolParams:
    protocol: Protocol = Protocol.RLEACH
    p_ch: float = 0.05
    kopt_mode: KoptMode = KoptMode.LITERAL_CLAMP
    kopt_override: Optional[float] = None


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 1
    n_nodes: int = 100
    field_m: float = 100.0
    bs_position: Union[str, Position] = CENTER
    packet_bits: int = 4000
    e0_joules: float = 0.5
    radio: RadioParams = field(default_factory=RadioParams)
    proto: ProtocolParams = field(default_factory=ProtocolParams)
    max_rounds: int = 20000
    no_ch_fallback: Fallback = Fallback.DIRECT_TO_BS

    @property
    def bs(self) -> Position:
        if isinstance(self.bs_position, Position):
            return self.bs_position
        return Position(self.field_m / 2, self.field_m / 2)

    def with_protocol(self, protocol: Protocol, **proto_changes) -> "ScenarioConfig":
        return replace(self, proto=replace(self.proto, protocol=protocol, **proto_changes))


@dataclass
class Node:
    id: int
    pos: Position
    energy: float
    alive: bool = True
    role_this_round: Role = Role.NONE
    ch_eligible: bool = True


class ConfigError(ValueError):
    """Raised with every violated invariant, not just the first."""

    def __init__(self, errors: list[tuple[str, object, str]]):
        self.errors = errors
        msg = "; ".join(f"{name}={value!r}: {why}" for name, value, why in errors)
        super().__init__(msg)


def _positive_finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) and x > 0


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every config invariant and resolve a CENTER base station.

    Raises ConfigError listing all violations together. Idempotent.
    """
    errors: list[tuple[str, object, str]] = []

    def check(ok: bool, name: str, value, why: str):
        if not ok:
            errors.append((name, value, why))

    check(_is_int(cfg.seed) and 0 <= cfg.seed < 2**64, "seed", cfg.seed, "must be a 64-bit unsigned integer")
    check(_is_int(cfg.n_nodes) and cfg.n_nodes >= 1, "n_nodes", cfg.n_nodes, "must be an integer >= 1")
    check(_positive_finite(cfg.field_m), "field_m", cfg.field_m, "must be > 0")
    check(_is_int(cfg.packet_bits) and cfg.packet_bits >= 1, "packet_bits", cfg.packet_bits, "must be an integer >= 1")
    check(_positive_finite(cfg.e0_joules), "e0_joules", cfg.e0_joules, "must be > 0")
    check(_is_int(cfg.max_rounds) and cfg.max_rounds >= 1, "max_rounds", cfg.max_rounds, "must be an integer >= 1")
    check(isinstance(cfg.no_ch_fallback, Fallback), "no_ch_fallback", cfg.no_ch_fallback, "unknown fallback")

    for name in ("e_elec", "e_fs", "e_mp", "e_da"):
        value = getattr(cfg.radio, name)
        check(_positive_finite(value), f"radio.{name}", value, "must be > 0")

    p = cfg.proto
    check(isinstance(p.protocol, Protocol), "proto.protocol", p.protocol, "unknown protocol")
    check(isinstance(p.kopt_mode, KoptMode), "proto.kopt_mode", p.kopt_mode, "unknown kopt mode")
    check(
        isinstance(p.p_ch, (int, float)) and not isinstance(p.p_ch, bool) and 0 < p.p_ch <= 1,
        "proto.p_ch", p.p_ch, "must lie in (0, 1]",
    )
    if p.kopt_override is not None:
        check(_positive_finite(p.kopt_override), "proto.kopt_override", p.kopt_override, "must be > 0")

    bs = cfg.bs_position
    if isinstance(bs, Position):
        check(
            all(isinstance(v, (int, float)) and math.isfinite(v) for v in (bs.x, bs.y)),
            "bs_position", bs, "coordinates must be finite",
        )
    else:
        check(bs == CENTER, "bs_position", bs, "must be 'center' or a Position")

    if errors:
        raise ConfigError(errors)
    if isinstance(bs, Position):
        return cfg
    return replace(cfg, bs_position=cfg.bs)
