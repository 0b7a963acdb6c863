"""
Discrete-event simulation of agents on a line exchanging light-speed signals.

Classical payloads are copied to every agent on their path. Quantum payloads
are handles into a QuantumStore; each handle has exactly one owner at a time
(in flight, stored by one agent, or consumed).
"""

import bisect
import copy
import heapq
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .qstate import (
    B0,
    BellOutcome,
    MeasBasis,
    PauliCorrection,
    PureRegister,
    apply_pauli,
    bell_measure,
    measure_qubit,
    tensor,
)

logger = logging.getLogger(__name__)

TIME_TOLERANCE = 1e-9


class SimulationError(Exception):
    """Base class for scheduler failures"""
    pass


class NoCloneViolation(SimulationError):
    """A quantum handle was used by an agent that does not own it"""
    pass


class CausalityViolation(SimulationError):
    """A signal was emitted into the past or arrived off its light cone"""
    pass


class HandlerError(SimulationError):
    """An agent handler raised; carries the delivery that triggered it"""

    def __init__(self, message: str, delivery: Optional["Delivery"] = None):
        super().__init__(message)
        self.delivery = delivery


class Direction(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def sign(self) -> int:
        return -1 if self is Direction.LEFT else 1

    @property
    def reverse(self) -> "Direction":
        return Direction.RIGHT if self is Direction.LEFT else Direction.LEFT


class PayloadKind(str, Enum):
    """What a signal carries"""
    QUBIT = "qubit"
    ROUTE = "route"
    LABEL = "label"
    SELECTOR = "selector"
    BASIS_INDEX = "basis_index"
    BASIS_AXIS = "basis_axis"
    BRANCH = "branch"
    OUTCOME = "outcome"
    TELEPORT_DATA = "teleport_data"
    MEASUREMENT_REPORT = "measurement_report"


@dataclass(frozen=True)
class ClassicalPayload:
    kind: PayloadKind
    values: Dict[str, Any] = field(default_factory=dict)

    def copy(self) -> "ClassicalPayload":
        return ClassicalPayload(self.kind, copy.deepcopy(self.values))

    def summary(self) -> str:
        body = ",".join(f"{k}={_format_value(v)}" for k, v in sorted(self.values.items()))
        return f"{self.kind.value}({body})"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "values": _jsonable(self.values)}


@dataclass(frozen=True)
class QuantumHandle:
    """Reference to one qubit in the QuantumStore"""
    handle_id: int
    label: Optional[Tuple[int, int]] = None

    @property
    def kind(self) -> PayloadKind:
        return PayloadKind.QUBIT

    def summary(self) -> str:
        if self.label is None:
            return f"qubit(#{self.handle_id})"
        return f"qubit(#{self.handle_id},label={self.label[0]}:{self.label[1]})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": PayloadKind.QUBIT.value,
            "handle": self.handle_id,
            "label": list(self.label) if self.label is not None else None,
        }


Payload = Union[ClassicalPayload, QuantumHandle]


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (tuple, list)):
        return "(" + ",".join(_format_value(v) for v in value) + ")"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class SignalEvent:
    """A light-speed signal; extent bounds how far a jammed signal travels"""
    signal_id: int
    emit_time: float
    emit_pos: float
    direction: Direction
    payload: Payload
    source: str
    round_index: Optional[int] = None
    extent: Optional[Tuple[float, float]] = None

    @property
    def is_quantum(self) -> bool:
        return isinstance(self.payload, QuantumHandle)

    def position_at(self, time: float) -> float:
        return self.emit_pos + self.direction.sign * (time - self.emit_time)

    def arrival_time(self, position: float) -> float:
        return self.emit_time + abs(position - self.emit_pos)

    def reaches(self, position: float) -> bool:
        if self.extent is None:
            return True
        lo, hi = self.extent
        return lo <= position <= hi


@dataclass(frozen=True)
class Delivery:
    """What an agent sees when a signal reaches it"""
    time: float
    position: float
    agent_id: str
    signal_id: int
    direction: Direction
    source: str
    round_index: Optional[int]
    payload: Payload

    @property
    def kind(self) -> PayloadKind:
        return self.payload.kind

    @property
    def is_quantum(self) -> bool:
        return isinstance(self.payload, QuantumHandle)

    @property
    def values(self) -> Dict[str, Any]:
        if isinstance(self.payload, ClassicalPayload):
            return self.payload.values
        return {}


@dataclass(frozen=True)
class DeliveryRecord:
    time: float
    position: float
    agent_id: str
    direction: Direction
    kind: PayloadKind
    source: str
    round_index: Optional[int]
    signal_id: int
    emit_time: float
    emit_pos: float
    payload: Payload
    claimed: bool

    @property
    def summary(self) -> str:
        return self.payload.summary()

    def to_line(self) -> str:
        return f"{self.time:.9f} {self.position:.9f} {self.direction.value} {self.kind.value} {self.summary}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "position": self.position,
            "agent": self.agent_id,
            "direction": self.direction.value,
            "kind": self.kind.value,
            "source": self.source,
            "round": self.round_index,
            "signal": self.signal_id,
            "emit_time": self.emit_time,
            "emit_pos": self.emit_pos,
            "payload": self.payload.to_dict(),
            "claimed": self.claimed,
        }


class Transcript:
    """Delivery log of a run, plus the store holding delivered qubits"""

    def __init__(self, store: "QuantumStore"):
        self.records: List[DeliveryRecord] = []
        self.store = store

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def at(self, agent_id: str, kind: Optional[PayloadKind] = None) -> List[DeliveryRecord]:
        return [
            r for r in self.records
            if r.agent_id == agent_id and (kind is None or r.kind == kind)
        ]

    def for_round(self, round_index: int) -> List[DeliveryRecord]:
        return [r for r in self.records if r.round_index == round_index]

    def to_lines(self, rounds: Optional[int] = None) -> List[str]:
        return [
            r.to_line() for r in self.records
            if rounds is None or (r.round_index is not None and r.round_index < rounds)
        ]

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.records], sort_keys=True)


class Ownership(str, Enum):
    STORED = "stored"
    IN_FLIGHT = "in_flight"
    CONSUMED = "consumed"


@dataclass
class _Slot:
    register_id: int
    owner: Ownership
    holder: Optional[str] = None


class QuantumStore:
    """
    Registers plus per-qubit ownership.

    Every consuming operation checks that the calling agent stores the handle;
    anything else is a NoCloneViolation.
    """

    def __init__(self, rng: Optional[np.random.Generator] = None):
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._registers: Dict[int, PureRegister] = {}
        self._layout: Dict[int, List[int]] = {}
        self._slots: Dict[int, _Slot] = {}
        self._handles: Dict[int, QuantumHandle] = {}
        self._register_ids = itertools.count()
        self._handle_ids = itertools.count()

    # -- bookkeeping --------------------------------------------------------

    def _slot(self, handle: QuantumHandle) -> _Slot:
        slot = self._slots.get(handle.handle_id)
        if slot is None:
            raise NoCloneViolation(f"Unknown quantum handle #{handle.handle_id}")
        return slot

    def _require_holder(self, handle: QuantumHandle, agent_id: str) -> _Slot:
        slot = self._slot(handle)
        if slot.owner != Ownership.STORED or slot.holder != agent_id:
            where = slot.owner.value if slot.holder is None else f"{slot.owner.value} at {slot.holder}"
            raise NoCloneViolation(
                f"Agent {agent_id} does not hold qubit #{handle.handle_id} (currently {where})"
            )
        return slot

    def owner_of(self, handle: QuantumHandle) -> Tuple[Ownership, Optional[str]]:
        slot = self._slot(handle)
        return slot.owner, slot.holder

    def handles(self) -> List[QuantumHandle]:
        return list(self._handles.values())

    def prepare(
        self,
        register: PureRegister,
        holders: Sequence[str],
        labels: Optional[Sequence[Optional[Tuple[int, int]]]] = None,
    ) -> List[QuantumHandle]:
        """Add a fresh register; qubit k is stored at holders[k]."""
        if len(holders) != register.num_qubits:
            raise ValueError(f"Need {register.num_qubits} holders, got {len(holders)}")
        labels = labels if labels is not None else [None] * register.num_qubits
        register_id = next(self._register_ids)
        self._registers[register_id] = register
        handles = []
        for holder, label in zip(holders, labels):
            handle = QuantumHandle(next(self._handle_ids), label)
            self._slots[handle.handle_id] = _Slot(register_id, Ownership.STORED, holder)
            self._handles[handle.handle_id] = handle
            handles.append(handle)
        self._layout[register_id] = [h.handle_id for h in handles]
        return handles

    def deposit(self, handle: QuantumHandle, agent_id: str) -> None:
        slot = self._slot(handle)
        if slot.owner != Ownership.IN_FLIGHT:
            raise NoCloneViolation(f"Qubit #{handle.handle_id} is not in flight ({slot.owner.value})")
        slot.owner = Ownership.STORED
        slot.holder = agent_id

    def withdraw(self, handle: QuantumHandle, agent_id: str) -> None:
        slot = self._require_holder(handle, agent_id)
        slot.owner = Ownership.IN_FLIGHT
        slot.holder = None

    def _locate(self, handle: QuantumHandle) -> Tuple[int, int]:
        register_id = self._slots[handle.handle_id].register_id
        return register_id, self._layout[register_id].index(handle.handle_id)

    def _factor_out(self, handle: QuantumHandle, successor: Optional[PureRegister]) -> None:
        register_id = self._slots[handle.handle_id].register_id
        self._layout[register_id].remove(handle.handle_id)
        if successor is None:
            del self._registers[register_id]
            del self._layout[register_id]
        else:
            self._registers[register_id] = successor
        slot = self._slots[handle.handle_id]
        slot.owner = Ownership.CONSUMED
        slot.holder = None

    def measure(self, handle: QuantumHandle, basis: MeasBasis, rng: np.random.Generator, agent_id: str) -> int:
        self._require_holder(handle, agent_id)
        register_id, index = self._locate(handle)
        outcome, successor = measure_qubit(self._registers[register_id], index, basis, rng)
        self._factor_out(handle, successor)
        return outcome

    def discard(self, handle: QuantumHandle, agent_id: str) -> None:
        """Trace a qubit out by measuring it in B0 and dropping the outcome."""
        self._require_holder(handle, agent_id)
        self._trace_out(handle)

    def lose(self, handle: QuantumHandle) -> None:
        """Trace out an in-flight qubit that left the line."""
        slot = self._slot(handle)
        if slot.owner != Ownership.IN_FLIGHT:
            raise NoCloneViolation(f"Qubit #{handle.handle_id} is not in flight ({slot.owner.value})")
        self._trace_out(handle)

    def _trace_out(self, handle: QuantumHandle) -> None:
        register_id, index = self._locate(handle)
        _, successor = measure_qubit(self._registers[register_id], index, B0, self._rng)
        self._factor_out(handle, successor)

    def bell_measure(
        self,
        handle_a: QuantumHandle,
        handle_b: QuantumHandle,
        rng: np.random.Generator,
        agent_id: str,
    ) -> BellOutcome:
        self._require_holder(handle_a, agent_id)
        self._require_holder(handle_b, agent_id)
        if handle_a.handle_id == handle_b.handle_id:
            raise NoCloneViolation("Bell measurement needs two distinct qubits")
        rid_a = self._slots[handle_a.handle_id].register_id
        rid_b = self._slots[handle_b.handle_id].register_id
        if rid_a != rid_b:
            self._merge(rid_a, rid_b)
        register_id, index_a = self._locate(handle_a)
        _, index_b = self._locate(handle_b)
        outcome, successor = bell_measure(self._registers[register_id], index_a, index_b, rng)

        layout = self._layout[register_id]
        layout.remove(handle_a.handle_id)
        layout.remove(handle_b.handle_id)
        for handle in (handle_a, handle_b):
            slot = self._slots[handle.handle_id]
            slot.owner = Ownership.CONSUMED
            slot.holder = None
        if successor is None:
            del self._registers[register_id]
            del self._layout[register_id]
        else:
            self._registers[register_id] = successor
        return outcome

    def _merge(self, rid_a: int, rid_b: int) -> None:
        joint = tensor(self._registers.pop(rid_a), self._registers.pop(rid_b))
        layout = self._layout.pop(rid_a) + self._layout.pop(rid_b)
        register_id = next(self._register_ids)
        self._registers[register_id] = joint
        self._layout[register_id] = layout
        for handle_id in layout:
            self._slots[handle_id].register_id = register_id

    def apply_pauli(self, handle: QuantumHandle, pauli: PauliCorrection, agent_id: str) -> None:
        self._require_holder(handle, agent_id)
        register_id, index = self._locate(handle)
        self._registers[register_id] = apply_pauli(self._registers[register_id], index, pauli)

    def inspect(self, handle: QuantumHandle) -> Tuple[PureRegister, int]:
        """Copy of the register holding a live handle, with its qubit index."""
        slot = self._slot(handle)
        if slot.owner == Ownership.CONSUMED:
            raise NoCloneViolation(f"Qubit #{handle.handle_id} has been consumed")
        register_id, index = self._locate(handle)
        return PureRegister(self._registers[register_id].amplitudes), index

    def check_linearity(self, in_flight: Set[int]) -> None:
        """Every live handle has one owner and in-flight handles match the queue."""
        for handle_id, slot in self._slots.items():
            if slot.owner == Ownership.IN_FLIGHT and handle_id not in in_flight:
                raise NoCloneViolation(f"Qubit #{handle_id} is in flight but no signal carries it")
            if slot.owner != Ownership.IN_FLIGHT and handle_id in in_flight:
                raise NoCloneViolation(f"Qubit #{handle_id} is carried by a signal but is {slot.owner.value}")
            if slot.owner != Ownership.CONSUMED and handle_id not in self._layout.get(slot.register_id, []):
                raise NoCloneViolation(f"Qubit #{handle_id} is live but missing from its register")


class Agent:
    """A stationary participant; subclasses override the hooks they need"""

    def __init__(self, agent_id: str, position: float):
        if not math.isfinite(position):
            raise ValueError(f"Agent {agent_id} position must be finite")
        self.agent_id = agent_id
        self.position = float(position)

    def claims(self, delivery: Delivery) -> bool:
        """Whether to absorb a quantum delivery into this agent's store."""
        return False

    def on_start(self, sim: "Scheduler") -> None:
        pass

    def on_delivery(self, sim: "Scheduler", delivery: Delivery) -> None:
        pass

    def on_finish(self, sim: "Scheduler") -> None:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.agent_id!r} at {self.position})"


class Scheduler:
    """
    Event loop over deliveries ordered by (time, position, sequence).

    Args:
        rng: Random source for trace-out measurements in the store
        debug: Run the linearity sweep after every step
    """

    def __init__(self, rng: Optional[np.random.Generator] = None, debug: bool = False):
        self.now = 0.0
        self.debug = debug
        self.store = QuantumStore(rng)
        self.transcript = Transcript(self.store)
        self._queue: List[Tuple[float, float, int, SignalEvent, str]] = []
        self._sequence = itertools.count()
        self._signal_ids = itertools.count()
        self._agents: Dict[str, Agent] = {}
        self._ordered: List[Agent] = []
        self._positions: List[float] = []
        self._started = False

    def register(self, agent: Agent) -> Agent:
        if agent.agent_id in self._agents:
            raise ValueError(f"Duplicate agent id: {agent.agent_id}")
        if agent.position in self._positions:
            raise ValueError(f"Another agent already sits at x={agent.position}")
        index = bisect.bisect_left(self._positions, agent.position)
        self._positions.insert(index, agent.position)
        self._ordered.insert(index, agent)
        self._agents[agent.agent_id] = agent
        return agent

    def agent(self, agent_id: str) -> Agent:
        return self._agents[agent_id]

    @property
    def agents(self) -> List[Agent]:
        return list(self._ordered)

    def emit(
        self,
        agent_id: str,
        time: float,
        direction: Direction,
        payload: Payload,
        round_index: Optional[int] = None,
        extent: Optional[Tuple[float, float]] = None,
    ) -> SignalEvent:
        """
        Send a signal from an agent's position.

        Raises:
            CausalityViolation: If time is before the current simulation time
            NoCloneViolation: If the agent does not hold the quantum handle
        """
        if time < self.now - TIME_TOLERANCE:
            raise CausalityViolation(
                f"{agent_id} tried to emit at t={time!r} before current time t={self.now!r}"
            )
        agent = self._agents[agent_id]
        if isinstance(payload, QuantumHandle):
            if extent is not None:
                raise SimulationError("Jamming extents apply to classical signals only")
            self.store.withdraw(payload, agent_id)
        else:
            payload = payload.copy()

        signal = SignalEvent(
            signal_id=next(self._signal_ids),
            emit_time=max(time, self.now),
            emit_pos=agent.position,
            direction=direction,
            payload=payload,
            source=agent_id,
            round_index=round_index,
            extent=extent,
        )
        self._forward(signal, agent.position)
        return signal

    def next_interceptor(self, signal: SignalEvent, beyond: Optional[float] = None) -> Optional[Tuple[str, float]]:
        """First agent strictly past `beyond` (default: the emit point) that the signal reaches."""
        start = signal.emit_pos if beyond is None else beyond
        if signal.direction is Direction.RIGHT:
            index = bisect.bisect_right(self._positions, start)
        else:
            index = bisect.bisect_left(self._positions, start) - 1
        if not 0 <= index < len(self._positions):
            return None
        position = self._positions[index]
        if not signal.reaches(position):
            return None
        return self._ordered[index].agent_id, signal.arrival_time(position)

    def _forward(self, signal: SignalEvent, beyond: float) -> None:
        hop = self.next_interceptor(signal, beyond)
        if hop is None:
            if signal.is_quantum:
                self.store.lose(signal.payload)
                logger.info(
                    "Quantum signal left the line",
                    extra={"signal": signal.signal_id, "source": signal.source, "round": signal.round_index},
                )
            return
        agent_id, arrival = hop
        position = self._agents[agent_id].position
        heapq.heappush(self._queue, (arrival, position, next(self._sequence), signal, agent_id))

    def _in_flight(self) -> Set[int]:
        return {
            entry[3].payload.handle_id
            for entry in self._queue
            if isinstance(entry[3].payload, QuantumHandle)
        }

    def _check_light_cone(self, signal: SignalEvent, time: float, position: float) -> None:
        travelled = abs(position - signal.emit_pos)
        elapsed = time - signal.emit_time
        if abs(travelled - elapsed) > TIME_TOLERANCE * max(1.0, abs(time)):
            raise CausalityViolation(
                f"Signal {signal.signal_id} from {signal.source} reached x={position!r} at t={time!r}, "
                f"off its light cone (travelled {travelled!r}, elapsed {elapsed!r})"
            )

    def _dispatch(self, agent: Agent, delivery: Delivery) -> None:
        try:
            agent.on_delivery(self, delivery)
        except SimulationError:
            logger.error(
                "Simulation error in handler",
                extra={"agent": agent.agent_id, "time": delivery.time, "round": delivery.round_index},
            )
            raise
        except Exception as e:
            raise HandlerError(
                f"Handler of {agent.agent_id} failed on {delivery.payload.summary()} "
                f"at t={delivery.time!r} (round {delivery.round_index}): {e}",
                delivery,
            ) from e

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for agent in self._ordered:
            agent.on_start(self)

    def step(self) -> DeliveryRecord:
        time, position, _, signal, agent_id = heapq.heappop(self._queue)
        self._check_light_cone(signal, time, position)
        self.now = time
        agent = self._agents[agent_id]

        if isinstance(signal.payload, QuantumHandle):
            payload: Payload = signal.payload
        else:
            payload = signal.payload.copy()
        delivery = Delivery(
            time=time,
            position=position,
            agent_id=agent_id,
            signal_id=signal.signal_id,
            direction=signal.direction,
            source=signal.source,
            round_index=signal.round_index,
            payload=payload,
        )

        claimed = False
        if signal.is_quantum and agent.claims(delivery):
            self.store.deposit(signal.payload, agent_id)
            claimed = True

        record = DeliveryRecord(
            time=time,
            position=position,
            agent_id=agent_id,
            direction=signal.direction,
            kind=signal.payload.kind,
            source=signal.source,
            round_index=signal.round_index,
            signal_id=signal.signal_id,
            emit_time=signal.emit_time,
            emit_pos=signal.emit_pos,
            payload=signal.payload,
            claimed=claimed,
        )
        self.transcript.records.append(record)

        self._dispatch(agent, delivery)
        if not claimed:
            self._forward(signal, position)
        if self.debug:
            self.store.check_linearity(self._in_flight())
        return record

    def run(self, until: float = math.inf) -> Transcript:
        """Process every delivery with arrival time <= until and return the transcript."""
        self.start()
        while self._queue and self._queue[0][0] <= until:
            self.step()
        for agent in self._ordered:
            agent.on_finish(self)
        return self.transcript
