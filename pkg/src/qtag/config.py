"""
Configuration models for tagging runs.

All models are frozen pydantic models. Environment defaults come from
``QTAG_*`` variables, optionally loaded from a ``.env`` file.
"""

import hashlib
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


class ConfigError(Exception):
    """Raised for invalid run configuration (flags or files)"""
    pass


class SchemeId(str, Enum):
    """Tagging schemes"""
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"


class AdversaryKind(str, Enum):
    """Eve strategies"""
    NONE = "none"
    TAG_OFF_SILENT = "tag_off_silent"
    RECORD_REPLAY = "record_replay"
    STORE_AND_WAIT = "store_and_wait"
    GUESS_MEASURE = "guess_measure"
    TELEPORT_I_II = "teleport_I_II"
    TELEPORT_III_STYLE = "teleport_III_style"


class TagPower(str, Enum):
    ON = "on"
    OFF = "off"


# Input/output typing of each scheme (Q = quantum, C = classical).
SCHEME_TYPING: Dict[SchemeId, str] = {
    SchemeId.I: "QQ",
    SchemeId.II: "QQ",
    SchemeId.III: "QC",
    SchemeId.IV: "QC",
    SchemeId.V: "QC",
    SchemeId.VI: "QQ/QC",
}

Axis = Tuple[float, float, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Geometry(_Frozen):
    """Station and tag positions on the line (light-seconds, c = 1)"""
    a0: float
    t_plus: float
    a1: float
    t0: Optional[float] = None
    t1: Optional[float] = None

    @model_validator(mode="after")
    def _check_order(self) -> "Geometry":
        for name in ("a0", "t_plus", "a1"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.a0 < self.t_plus:
            raise ValueError("a0 < t required")
        if not self.t_plus < self.a1:
            raise ValueError("t < a1 required")
        if self.t0 is not None and self.t1 is not None and not self.t0 <= self.t_plus <= self.t1:
            raise ValueError("t0 <= t <= t1 required")
        return self

    @property
    def d0(self) -> float:
        """Distance from A0 to the tag"""
        return self.t_plus - self.a0

    @property
    def d1(self) -> float:
        """Distance from the tag to A1"""
        return self.a1 - self.t_plus

    def station_position(self, station: int) -> float:
        return self.a0 if station == 0 else self.a1

    def distance_to_station(self, station: int) -> float:
        return self.d0 if station == 0 else self.d1


def default_f_table(m: int, n: int) -> Tuple[Tuple[int, ...], ...]:
    """Parity XOR routing table: f(a, b) = (a mod 2) xor (b mod 2)."""
    return tuple(tuple((a % 2) ^ (b % 2) for b in range(1, n + 1)) for a in range(1, m + 1))


class SchemeConfig(_Frozen):
    """Scheme selection, geometry and round pacing"""
    scheme_id: SchemeId
    geometry: Geometry
    rounds: int = Field(100, ge=1)
    round_period: Optional[float] = Field(None, gt=0)
    session_window: Optional[float] = Field(None, gt=0)
    m: int = Field(2, ge=1)
    n: int = Field(2, ge=1)
    f_table: Optional[Tuple[Tuple[int, ...], ...]] = None
    states: Optional[Tuple[Axis, ...]] = None
    bases: Optional[Tuple[Axis, ...]] = None
    epsilon_t: float = Field(1e-9, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "SchemeConfig":
        geometry = self.geometry
        if self.round_period is not None and self.round_period <= 2 * (geometry.a1 - geometry.a0):
            raise ValueError("round_period must exceed 2 * (a1 - a0)")
        if self.session_window is not None and self.rounds * self.tau > self.session_window * (1 + 1e-12):
            raise ValueError("rounds * round_period must not exceed session_window")
        if self.f_table is not None:
            if len(self.f_table) != self.m or any(len(row) != self.n for row in self.f_table):
                raise ValueError(f"f_table must be {self.m}x{self.n}")
            if any(bit not in (0, 1) for row in self.f_table for bit in row):
                raise ValueError("f_table entries must be 0 or 1")
        if self.bases is not None and len(self.bases) != 3:
            raise ValueError("bases must list exactly three axes")
        if self.states is not None and not self.states:
            raise ValueError("states must not be empty")
        return self

    @property
    def tau(self) -> float:
        if self.round_period is not None:
            return self.round_period
        return 4 * (self.geometry.a1 - self.geometry.a0)

    @property
    def delta_t(self) -> float:
        if self.session_window is not None:
            return self.session_window
        return self.rounds * self.tau

    @property
    def first_arrival(self) -> float:
        """Arrival time at the tag of the first round's inputs"""
        return max(self.geometry.d0, self.geometry.d1)

    def arrival_time(self, round_index: int) -> float:
        return self.first_arrival + round_index * self.tau

    @property
    def routing_table(self) -> Tuple[Tuple[int, ...], ...]:
        if self.f_table is not None:
            return self.f_table
        return default_f_table(self.m, self.n)

    def route(self, a: int, b: int) -> int:
        """f(a, b) with 1-based a and b"""
        return self.routing_table[a - 1][b - 1]


class AdversaryConfig(_Frozen):
    """Eve strategy and site placement"""
    kind: AdversaryKind = AdversaryKind.NONE
    e0: Optional[float] = None
    e1: Optional[float] = None
    singlets_per_round: Optional[int] = Field(None, ge=0)
    replay_delay: float = Field(1.0, gt=0)

    def sites(self, geometry: Geometry) -> Tuple[float, float]:
        """Resolve (e0, e1), defaulting to the midpoints either side of the tag.

        Raises:
            ValueError: If the ordering a0 < e0 < t < e1 < a1 is violated
        """
        e0 = self.e0 if self.e0 is not None else (geometry.a0 + geometry.t_plus) / 2
        e1 = self.e1 if self.e1 is not None else (geometry.t_plus + geometry.a1) / 2
        if not geometry.a0 < e0 < geometry.t_plus:
            raise ValueError("a0 < e0 < t required")
        if not geometry.t_plus < e1 < geometry.a1:
            raise ValueError("t < e1 < a1 required")
        return e0, e1


class StatTestConfig(_Frozen):
    alpha: float = Field(0.001, gt=0, lt=1)
    bins: int = Field(10, ge=1, le=10)
    deterministic_tolerance: float = Field(1e-9, ge=0)


class VerifierConfig(_Frozen):
    stats: StatTestConfig = Field(default_factory=StatTestConfig)
    timing_checks: bool = True
    assignment_window: Optional[float] = Field(None, gt=0)


class RunSpec(_Frozen):
    """One (scheme, adversary) row with its trial count and seed"""
    scheme: SchemeConfig
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    verifier: VerifierConfig = Field(default_factory=VerifierConfig)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    trials: int = Field(1, ge=1)
    tag: Optional[TagPower] = None
    transcript_rounds: int = Field(3, ge=0)

    @model_validator(mode="after")
    def _check_sites(self) -> "RunSpec":
        if self.adversary.kind != AdversaryKind.NONE or self.adversary.e0 is not None or self.adversary.e1 is not None:
            self.adversary.sites(self.scheme.geometry)
        return self

    @property
    def tag_power(self) -> TagPower:
        """Tag on for honest rows, off for attacks unless overridden"""
        if self.tag is not None:
            return self.tag
        return TagPower.ON if self.adversary.kind == AdversaryKind.NONE else TagPower.OFF

    @property
    def row_key(self) -> Tuple[int, int]:
        return (
            list(SchemeId).index(self.scheme.scheme_id),
            list(AdversaryKind).index(self.adversary.kind),
        )


class MatrixSpec(_Frozen):
    """Cross product of schemes and adversaries sharing one base run"""
    schemes: Tuple[SchemeId, ...]
    adversaries: Tuple[AdversaryKind, ...]
    base: RunSpec

    def rows(self) -> List[Tuple[SchemeId, AdversaryKind]]:
        return [(s, a) for s in self.schemes for a in self.adversaries]


class Settings(BaseModel):
    """Process-level defaults read from the environment"""
    seed: int = 0
    debug: bool = False
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        load_dotenv()
        try:
            return cls(
                seed=int(os.getenv("QTAG_SEED", "0")),
                debug=os.getenv("QTAG_DEBUG", "").lower() in ("1", "true", "yes", "on"),
                log_level=os.getenv("QTAG_LOG_LEVEL", "WARNING").upper(),
            )
        except ValueError as e:
            raise ConfigError(f"Invalid QTAG_* environment variable: {e}") from e


def derive_seed(master: int, *tags: Any) -> int:
    """Split a master seed into an independent stream seed for a component tag."""
    label = "/".join(str(tag) for tag in tags)
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(master: int, *tags: Any) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *tags))


def load_yaml(path: str) -> Dict[str, Any]:
    """Read a YAML run or matrix file into a dict."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"Malformed YAML in {path}{where}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a mapping at top level")
    return data


def describe_validation_error(error: ValidationError, field_names: Optional[Dict[str, str]] = None) -> str:
    """Render pydantic errors as 'location: message' lines, mapping fields to flag names."""
    field_names = field_names or {}
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"])
        label = field_names.get(loc, loc) or "config"
        message = item["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        lines.append(f"{label}: {message}")
    return "; ".join(lines)
