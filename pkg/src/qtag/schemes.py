"""
Tagging Schemes I-VI.

Each scheme defines what Alice's stations send per round (timed to meet at
the tag), what the honest tag does with the pair of inputs, and what the
stations expect to receive back.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .config import SchemeConfig, SchemeId, TagPower
from .qstate import (
    PAULI_BASES,
    PAULI_STATE_AXES,
    PRIMED_BASES,
    PRIMED_STATE_AXES,
    MeasBasis,
    PureRegister,
    canonical_hemisphere,
    outcome_probability,
    sample_uniform_axis,
    sample_uniform_bloch,
    state_from_bloch,
)
from .worldline import (
    Agent,
    ClassicalPayload,
    Delivery,
    Direction,
    PayloadKind,
    QuantumHandle,
    Scheduler,
    SignalEvent,
)

logger = logging.getLogger(__name__)

STATION_IDS = ("A0", "A1")
TAG_ID = "T"

# Inputs the tag pairs per round, by scheme.
REQUIRED_INPUTS: Dict[SchemeId, FrozenSet[PayloadKind]] = {
    SchemeId.I: frozenset({PayloadKind.QUBIT, PayloadKind.ROUTE}),
    SchemeId.II: frozenset({PayloadKind.QUBIT, PayloadKind.LABEL, PayloadKind.SELECTOR}),
    SchemeId.III: frozenset({PayloadKind.QUBIT, PayloadKind.BASIS_INDEX}),
    SchemeId.IV: frozenset({PayloadKind.QUBIT, PayloadKind.BASIS_AXIS}),
    SchemeId.V: frozenset({PayloadKind.QUBIT, PayloadKind.BASIS_INDEX}),
    SchemeId.VI: frozenset({PayloadKind.QUBIT, PayloadKind.BRANCH}),
}

# Command kinds sent by A1 that tell the tag what to do with the qubit.
COMMAND_KINDS: FrozenSet[PayloadKind] = frozenset({
    PayloadKind.ROUTE,
    PayloadKind.SELECTOR,
    PayloadKind.BASIS_INDEX,
    PayloadKind.BASIS_AXIS,
    PayloadKind.BRANCH,
})


class Modality(str, Enum):
    QUBIT = "qubit"
    OUTCOME = "outcome"


def station_id(station: int) -> str:
    return STATION_IDS[station]


def direction_to_station(station: int) -> Direction:
    return Direction.LEFT if station == 0 else Direction.RIGHT


def scheme_bases(cfg: SchemeConfig) -> Tuple[MeasBasis, ...]:
    """The three coded bases of Schemes III and V."""
    if cfg.bases is not None:
        return tuple(MeasBasis.from_vector(axis) for axis in cfg.bases)
    return PRIMED_BASES if cfg.scheme_id == SchemeId.V else PAULI_BASES


def scheme_state_axes(cfg: SchemeConfig) -> Tuple[Tuple[float, float, float], ...]:
    if cfg.states is not None:
        return cfg.states
    return PRIMED_STATE_AXES if cfg.scheme_id == SchemeId.V else PAULI_STATE_AXES


def command_basis(cfg: SchemeConfig, kind: PayloadKind, values: Dict[str, Any]) -> Optional[MeasBasis]:
    """Basis a command asks the tag to measure in, or None for a routing command."""
    if kind == PayloadKind.BASIS_INDEX:
        return scheme_bases(cfg)[int(values["c"])]
    if kind == PayloadKind.BASIS_AXIS:
        return MeasBasis.from_vector(values["axis"])
    if kind == PayloadKind.BRANCH and int(values["b"]) == 0:
        return MeasBasis.from_vector(values["axis"])
    return None


@dataclass(frozen=True)
class StationEmission:
    station: int
    time: float
    classical: Tuple[ClassicalPayload, ...] = ()
    qubit: Optional[np.ndarray] = field(default=None, compare=False)


@dataclass(frozen=True)
class RoundPlan:
    """Both stations' emissions for one round"""
    round_index: int
    arrival_time: float
    a0: StationEmission
    a1: StationEmission
    choices: Dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class StationCheck:
    station: int
    time: float
    modality: Modality

    @property
    def station_id(self) -> str:
        return station_id(self.station)


@dataclass(frozen=True, eq=False)
class ExpectedRecord:
    """
    What Alice expects back for one round.

    Qubit expectations carry the target amplitudes for the projective test;
    outcome expectations carry the Born probability of outcome 0.
    """
    round_index: int
    arrival_time: float
    checks: Tuple[StationCheck, ...]
    target: Optional[np.ndarray] = None
    basis: Optional[MeasBasis] = None
    outcome_p0: Optional[float] = None

    @property
    def modality(self) -> Modality:
        return self.checks[0].modality

    def deterministic_outcome(self, tolerance: float = 1e-9) -> Optional[int]:
        if self.outcome_p0 is None:
            return None
        if self.outcome_p0 >= 1 - tolerance:
            return 0
        if self.outcome_p0 <= tolerance:
            return 1
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "round": self.round_index,
            "arrival_time": self.arrival_time,
            "checks": [
                {"station": c.station_id, "time": c.time, "modality": c.modality.value}
                for c in self.checks
            ],
            "outcome_p0": self.outcome_p0,
        }


def _qubit_expectation(cfg: SchemeConfig, index: int, t_star: float, station: int, psi: np.ndarray) -> ExpectedRecord:
    time = t_star + cfg.geometry.distance_to_station(station)
    return ExpectedRecord(
        round_index=index,
        arrival_time=t_star,
        checks=(StationCheck(station, time, Modality.QUBIT),),
        target=psi,
    )


def _outcome_expectation(cfg: SchemeConfig, index: int, t_star: float, psi: np.ndarray, basis: MeasBasis) -> ExpectedRecord:
    geometry = cfg.geometry
    return ExpectedRecord(
        round_index=index,
        arrival_time=t_star,
        checks=(
            StationCheck(0, t_star + geometry.d0, Modality.OUTCOME),
            StationCheck(1, t_star + geometry.d1, Modality.OUTCOME),
        ),
        target=psi,
        basis=basis,
        outcome_p0=outcome_probability(PureRegister(psi), basis),
    )


def plan_rounds(cfg: SchemeConfig, rng: np.random.Generator) -> Tuple[List[RoundPlan], List[ExpectedRecord]]:
    """
    Draw every round's random choices and derive emissions and expectations.

    Args:
        cfg: Scheme configuration
        rng: Protocol random stream

    Returns:
        (round plans, expected records), one of each per round

    Raises:
        ValueError: If the scheme id is unknown
    """
    geometry = cfg.geometry
    plans: List[RoundPlan] = []
    expected: List[ExpectedRecord] = []
    state_axes = scheme_state_axes(cfg)
    bases = scheme_bases(cfg)

    for index in range(cfg.rounds):
        t_star = cfg.arrival_time(index)
        a0_time = t_star - geometry.d0
        a1_time = t_star - geometry.d1
        scheme = cfg.scheme_id

        if scheme == SchemeId.I:
            psi = sample_uniform_bloch(rng).amplitudes
            a = int(rng.integers(2))
            a0_payloads: Tuple[ClassicalPayload, ...] = ()
            a1_payloads = (ClassicalPayload(PayloadKind.ROUTE, {"a": a}),)
            choices: Dict[str, Any] = {"a": a}
            record = _qubit_expectation(cfg, index, t_star, a, psi)
        elif scheme == SchemeId.II:
            psi = sample_uniform_bloch(rng).amplitudes
            a = int(rng.integers(1, cfg.m + 1))
            b = int(rng.integers(1, cfg.n + 1))
            route = cfg.route(a, b)
            a0_payloads = (ClassicalPayload(PayloadKind.LABEL, {"a": a}),)
            a1_payloads = (ClassicalPayload(PayloadKind.SELECTOR, {"b": b}),)
            choices = {"a": a, "b": b, "route": route}
            record = _qubit_expectation(cfg, index, t_star, route, psi)
        elif scheme in (SchemeId.III, SchemeId.V):
            state_index = int(rng.integers(len(state_axes)))
            psi = state_from_bloch(state_axes[state_index]).amplitudes
            c = int(rng.integers(3))
            a0_payloads = ()
            a1_payloads = (ClassicalPayload(PayloadKind.BASIS_INDEX, {"c": c}),)
            choices = {"state": state_index, "c": c}
            record = _outcome_expectation(cfg, index, t_star, psi, bases[c])
        elif scheme == SchemeId.IV:
            psi = sample_uniform_bloch(rng).amplitudes
            axis = canonical_hemisphere(sample_uniform_axis(rng))
            a0_payloads = ()
            a1_payloads = (ClassicalPayload(PayloadKind.BASIS_AXIS, {"axis": axis}),)
            choices = {"axis": axis}
            record = _outcome_expectation(cfg, index, t_star, psi, MeasBasis.from_vector(axis))
        elif scheme == SchemeId.VI:
            psi = sample_uniform_bloch(rng).amplitudes
            axis = canonical_hemisphere(sample_uniform_axis(rng))
            b = int(rng.integers(2))
            c = int(rng.integers(2))
            a0_payloads = ()
            a1_payloads = (ClassicalPayload(PayloadKind.BRANCH, {"axis": axis, "b": b, "c": c}),)
            choices = {"axis": axis, "b": b, "c": c}
            if b == 0:
                record = _outcome_expectation(cfg, index, t_star, psi, MeasBasis.from_vector(axis))
            else:
                record = _qubit_expectation(cfg, index, t_star, c, psi)
        else:
            raise ValueError(f"Unknown scheme id: {scheme}")

        plans.append(RoundPlan(
            round_index=index,
            arrival_time=t_star,
            a0=StationEmission(0, a0_time, a0_payloads, psi),
            a1=StationEmission(1, a1_time, a1_payloads),
            choices=choices,
        ))
        expected.append(record)

    return plans, expected


class AliceStation(Agent):
    """One of Alice's stations: sends its half of each round and absorbs every qubit"""

    def __init__(self, station: int, position: float, plans: List[RoundPlan]):
        super().__init__(station_id(station), position)
        self.station = station
        self.plans = plans

    def claims(self, delivery: Delivery) -> bool:
        return True

    def on_start(self, sim: Scheduler) -> None:
        direction = Direction.RIGHT if self.station == 0 else Direction.LEFT
        for plan in self.plans:
            emission = plan.a0 if self.station == 0 else plan.a1
            for payload in emission.classical:
                sim.emit(self.agent_id, emission.time, direction, payload, round_index=plan.round_index)
            if emission.qubit is not None:
                (handle,) = sim.store.prepare(PureRegister(emission.qubit), [self.agent_id])
                sim.emit(self.agent_id, emission.time, direction, handle, round_index=plan.round_index)


@dataclass
class TagState:
    powered: TagPower
    scheme_id: SchemeId
    buffered: List[Delivery] = field(default_factory=list)
    completed_rounds: int = 0
    malformed_rounds: int = 0
    excess_inputs: int = 0


class TaggingDevice(Agent):
    """
    The tag at t_plus.

    When powered it pairs the round's inputs (arrivals within epsilon_t) and
    acts on them at the same instant. When off it absorbs nothing and every
    signal propagates through unchanged.
    """

    def __init__(self, cfg: SchemeConfig, powered: TagPower, rng: np.random.Generator):
        super().__init__(TAG_ID, cfg.geometry.t_plus)
        self.cfg = cfg
        self.rng = rng
        self.state = TagState(powered=powered, scheme_id=cfg.scheme_id)

    @property
    def powered(self) -> bool:
        return self.state.powered == TagPower.ON

    def claims(self, delivery: Delivery) -> bool:
        return self.powered

    def on_delivery(self, sim: Scheduler, delivery: Delivery) -> None:
        self.tag_handler(sim, delivery)

    def on_finish(self, sim: Scheduler) -> None:
        self._expire(sim, None)

    def tag_handler(self, sim: Scheduler, delivery: Delivery) -> List[SignalEvent]:
        """Pair the delivery with buffered inputs and act once a round is complete."""
        if not self.powered:
            return []
        required = REQUIRED_INPUTS[self.state.scheme_id]
        if delivery.kind not in required:
            # outputs and Eve-internal traffic pass through
            return []

        self._expire(sim, delivery.time)
        if any(buffered.kind == delivery.kind for buffered in self.state.buffered):
            self._reject_excess(sim, delivery, "duplicate input within one round")
            return []

        self.state.buffered.append(delivery)
        if {buffered.kind for buffered in self.state.buffered} != required:
            return []

        inputs = {buffered.kind: buffered for buffered in self.state.buffered}
        self.state.buffered = []
        self.state.completed_rounds += 1
        return self._execute(sim, inputs)

    def _reject_excess(self, sim: Scheduler, delivery: Delivery, reason: str) -> None:
        self.state.excess_inputs += 1
        logger.warning(
            "Tag ignored excess input",
            extra={"round": delivery.round_index, "time": delivery.time, "kind": delivery.kind.value, "reason": reason},
        )
        if isinstance(delivery.payload, QuantumHandle):
            sim.store.discard(delivery.payload, self.agent_id)

    def _expire(self, sim: Scheduler, now: Optional[float]) -> None:
        """Drop buffered inputs whose partners failed to arrive within epsilon_t."""
        if not self.state.buffered:
            return
        if now is not None and all(now - b.time <= self.cfg.epsilon_t for b in self.state.buffered):
            return
        stale = self.state.buffered
        self.state.buffered = []
        self.state.malformed_rounds += 1
        logger.warning(
            "Malformed tag round: missing simultaneous partner input",
            extra={
                "round": stale[0].round_index,
                "time": stale[0].time,
                "kinds": sorted(b.kind.value for b in stale),
            },
        )
        for buffered in stale:
            if isinstance(buffered.payload, QuantumHandle):
                sim.store.discard(buffered.payload, self.agent_id)

    def _execute(self, sim: Scheduler, inputs: Dict[PayloadKind, Delivery]) -> List[SignalEvent]:
        qubit = inputs[PayloadKind.QUBIT]
        handle = qubit.payload
        round_index = qubit.round_index
        scheme = self.state.scheme_id

        if scheme == SchemeId.I:
            return [self._route(sim, handle, int(inputs[PayloadKind.ROUTE].values["a"]), round_index)]
        if scheme == SchemeId.II:
            a = int(inputs[PayloadKind.LABEL].values["a"])
            b = int(inputs[PayloadKind.SELECTOR].values["b"])
            return [self._route(sim, handle, self.cfg.route(a, b), round_index)]
        if scheme == SchemeId.VI:
            values = inputs[PayloadKind.BRANCH].values
            if int(values["b"]) == 1:
                return [self._route(sim, handle, int(values["c"]), round_index)]

        command = next(inputs[kind] for kind in COMMAND_KINDS if kind in inputs)
        basis = command_basis(self.cfg, command.kind, command.values)
        outcome = sim.store.measure(handle, basis, self.rng, self.agent_id)
        payload = ClassicalPayload(PayloadKind.OUTCOME, {"bit": outcome})
        return [
            sim.emit(self.agent_id, sim.now, Direction.LEFT, payload, round_index=round_index),
            sim.emit(self.agent_id, sim.now, Direction.RIGHT, payload, round_index=round_index),
        ]

    def _route(self, sim: Scheduler, handle: QuantumHandle, station: int, round_index: Optional[int]) -> SignalEvent:
        return sim.emit(self.agent_id, sim.now, direction_to_station(station), handle, round_index=round_index)
