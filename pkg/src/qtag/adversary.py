"""
Eve's strategies.

Eve runs two laboratories, E0 between A0 and the tag and E1 between the tag
and A1. Each site handler reads and writes only its own SiteState; anything
the other site knows has to arrive as a signal.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Set, Tuple

import numpy as np

from .config import AdversaryConfig, AdversaryKind, SchemeConfig, SchemeId
from .qstate import (
    BasisAction,
    BellOutcome,
    MeasBasis,
    basis_action,
    correction_for,
    make_singlet,
    nearest_pauli_basis,
    sample_hemisphere_basis,
)
from .schemes import COMMAND_KINDS, command_basis, direction_to_station, scheme_bases
from .worldline import (
    Agent,
    ClassicalPayload,
    Delivery,
    Direction,
    PayloadKind,
    QuantumHandle,
    Scheduler,
)

logger = logging.getLogger(__name__)

E0_ID = "E0"
E1_ID = "E1"

_ALL_SCHEMES: FrozenSet[SchemeId] = frozenset(SchemeId)
_ROUTING_SCHEMES: FrozenSet[SchemeId] = frozenset({SchemeId.I, SchemeId.II})
_MEASURING_SCHEMES: FrozenSet[SchemeId] = frozenset({SchemeId.III, SchemeId.IV, SchemeId.V, SchemeId.VI})

APPLICABILITY: Dict[AdversaryKind, FrozenSet[SchemeId]] = {
    AdversaryKind.NONE: _ALL_SCHEMES,
    AdversaryKind.TAG_OFF_SILENT: _ALL_SCHEMES,
    AdversaryKind.RECORD_REPLAY: _ALL_SCHEMES,
    AdversaryKind.STORE_AND_WAIT: _ROUTING_SCHEMES,
    AdversaryKind.GUESS_MEASURE: _MEASURING_SCHEMES,
    AdversaryKind.TELEPORT_I_II: _ROUTING_SCHEMES,
    AdversaryKind.TELEPORT_III_STYLE: _MEASURING_SCHEMES,
}


class AdversaryConfigError(Exception):
    """Raised for strategies that cannot run against the configured scheme"""
    pass


def inapplicable_reason(kind: AdversaryKind, scheme: SchemeId) -> Optional[str]:
    """Why a strategy does not apply to a scheme, or None when it does."""
    allowed = APPLICABILITY[kind]
    if scheme in allowed:
        return None
    names = ", ".join(s.value for s in SchemeId if s in allowed)
    return f"{kind.value} targets schemes {names} only"


@dataclass(frozen=True)
class RecordedOutput:
    """A classical tag output captured at an Eve site"""
    site: str
    time: float
    direction: Direction
    round_index: Optional[int]
    payload: ClassicalPayload


@dataclass
class SiteState:
    """Everything one Eve laboratory knows"""
    halves: Dict[Tuple[int, int], QuantumHandle] = field(default_factory=dict)
    held: Dict[int, QuantumHandle] = field(default_factory=dict)
    labels: Dict[int, int] = field(default_factory=dict)
    commands: Dict[int, Tuple[PayloadKind, Dict[str, Any]]] = field(default_factory=dict)
    teleport_data: Dict[int, Tuple[BellOutcome, int]] = field(default_factory=dict)
    reports: Dict[int, Tuple[int, Tuple[float, float, float]]] = field(default_factory=dict)
    forwarded: Dict[int, Dict[int, QuantumHandle]] = field(default_factory=dict)
    recordings: List[RecordedOutput] = field(default_factory=list)
    finished: Set[int] = field(default_factory=set)


class EveSite(Agent):
    """An Eve laboratory; behavior comes from the strategy"""

    def __init__(self, agent_id: str, position: float, strategy: "Strategy"):
        super().__init__(agent_id, position)
        self.strategy = strategy
        self.state = SiteState()

    def claims(self, delivery: Delivery) -> bool:
        return self.strategy.claims(self, delivery)

    def on_start(self, sim: Scheduler) -> None:
        self.strategy.on_start(self, sim)

    def on_delivery(self, sim: Scheduler, delivery: Delivery) -> None:
        self.strategy.on_delivery(self, sim, delivery)


def is_alice_qubit(delivery: Delivery) -> bool:
    return delivery.kind == PayloadKind.QUBIT and delivery.source == "A0"


def is_alice_command(delivery: Delivery) -> bool:
    return delivery.source == "A1" and delivery.kind in COMMAND_KINDS


def inferred_flip(bell: BellOutcome, basis: MeasBasis) -> bool:
    """
    Whether Eve flips the partner's raw outcome to infer the outcome on psi.

    Uses the basis itself when the correction preserves it, otherwise the
    nearest Pauli axis.
    """
    correction = correction_for(bell)
    action = basis_action(correction, basis)
    if action == BasisAction.NOT_PRESERVED:
        action = basis_action(correction, nearest_pauli_basis(basis))
    return action == BasisAction.PRESERVED_FLIPPED


class Strategy:
    """
    Base strategy: two passive sites.

    Args:
        scheme_cfg: Scheme under attack
        adversary_cfg: Strategy parameters and site positions
        rng: Eve's random stream
    """

    kind = AdversaryKind.NONE

    def __init__(self, scheme_cfg: SchemeConfig, adversary_cfg: AdversaryConfig, rng: np.random.Generator):
        reason = inapplicable_reason(self.kind, scheme_cfg.scheme_id)
        if reason is not None:
            raise AdversaryConfigError(reason)
        self.scheme_cfg = scheme_cfg
        self.adversary_cfg = adversary_cfg
        self.rng = rng
        try:
            self.e0, self.e1 = adversary_cfg.sites(scheme_cfg.geometry)
        except ValueError as e:
            raise AdversaryConfigError(str(e)) from e
        self.jam = (self.e0, self.e1)

    @property
    def d_e0(self) -> float:
        """Distance E0 -> tag"""
        return self.scheme_cfg.geometry.t_plus - self.e0

    @property
    def d_e1(self) -> float:
        """Distance tag -> E1"""
        return self.e1 - self.scheme_cfg.geometry.t_plus

    def build_sites(self) -> List[EveSite]:
        return [EveSite(E0_ID, self.e0, self), EveSite(E1_ID, self.e1, self)]

    def install(self, sim: Scheduler, sites: List[EveSite]) -> None:
        """Set up resources before the protocol starts."""
        pass

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        return False

    def on_start(self, site: EveSite, sim: Scheduler) -> None:
        pass

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        pass

    def _site(self, sites: List[EveSite], agent_id: str) -> EveSite:
        return next(site for site in sites if site.agent_id == agent_id)


class PassiveStrategy(Strategy):
    """Eve present but passive"""
    kind = AdversaryKind.NONE


class TagOffSilentStrategy(Strategy):
    """Tag switched off and nobody answers in its place"""
    kind = AdversaryKind.TAG_OFF_SILENT

    def build_sites(self) -> List[EveSite]:
        return []


class RecordReplayStrategy(Strategy):
    """
    Record the tag's classical outputs while it is on, then replay them later.

    In the recording phase both sites watch outgoing OUTCOME signals. In the
    replay phase E0 absorbs and discards Alice's qubit, and each site re-emits
    what it recorded, shifted by replay_delay. Quantum outputs cannot be copied
    and are never replayed.
    """
    kind = AdversaryKind.RECORD_REPLAY

    def __init__(
        self,
        scheme_cfg: SchemeConfig,
        adversary_cfg: AdversaryConfig,
        rng: np.random.Generator,
        recordings: Optional[Dict[str, List[RecordedOutput]]] = None,
    ):
        super().__init__(scheme_cfg, adversary_cfg, rng)
        self.recordings = recordings

    @property
    def replaying(self) -> bool:
        return self.recordings is not None

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        return self.replaying and site.agent_id == E0_ID and is_alice_qubit(delivery)

    def on_start(self, site: EveSite, sim: Scheduler) -> None:
        if not self.replaying:
            return
        delay = self.adversary_cfg.replay_delay
        for item in self.recordings.get(site.agent_id, []):
            sim.emit(site.agent_id, item.time + delay, item.direction, item.payload, round_index=item.round_index)

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        if self.replaying:
            if site.agent_id == E0_ID and is_alice_qubit(delivery):
                sim.store.discard(delivery.payload, site.agent_id)
            return

        outward = Direction.LEFT if site.agent_id == E0_ID else Direction.RIGHT
        if delivery.source != "T" or delivery.direction != outward:
            return
        if isinstance(delivery.payload, QuantumHandle):
            logger.debug(
                "Quantum tag output cannot be recorded",
                extra={"site": site.agent_id, "round": delivery.round_index, "time": delivery.time},
            )
            return
        site.state.recordings.append(RecordedOutput(
            site=site.agent_id,
            time=delivery.time,
            direction=delivery.direction,
            round_index=delivery.round_index,
            payload=delivery.payload,
        ))

    @staticmethod
    def collect(sites: List[EveSite]) -> Dict[str, List[RecordedOutput]]:
        return {site.agent_id: list(site.state.recordings) for site in sites}


class _RoutingMixin:
    """Label/selector handling shared by the Scheme I/II strategies"""

    scheme_cfg: SchemeConfig

    @property
    def labels(self) -> Tuple[int, ...]:
        if self.scheme_cfg.scheme_id == SchemeId.I:
            return (1,)
        return tuple(range(1, self.scheme_cfg.m + 1))

    def route(self, label: int, selector: int) -> int:
        """Destination station for a label given the A1 selector."""
        if self.scheme_cfg.scheme_id == SchemeId.I:
            return selector
        return self.scheme_cfg.route(label, selector)

    @staticmethod
    def selector_of(values: Dict[str, Any]) -> int:
        return int(values["a"] if "a" in values else values["b"])

    def label_of(self, state: SiteState, round_index: int) -> Optional[int]:
        if self.scheme_cfg.scheme_id == SchemeId.I:
            return 1
        return state.labels.get(round_index)


class StoreAndWaitStrategy(_RoutingMixin, Strategy):
    """Hold Alice's qubit at E0 until A1's instruction passes, then forward it"""
    kind = AdversaryKind.STORE_AND_WAIT

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        return site.agent_id == E0_ID and is_alice_qubit(delivery)

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        if site.agent_id != E0_ID or delivery.round_index is None:
            return
        state = site.state
        index = delivery.round_index
        if is_alice_qubit(delivery):
            state.held[index] = delivery.payload
        elif delivery.kind == PayloadKind.LABEL:
            state.labels[index] = int(delivery.values["a"])
        elif is_alice_command(delivery):
            state.commands[index] = (delivery.kind, dict(delivery.values))
        else:
            return

        label = self.label_of(state, index)
        if index not in state.held or index not in state.commands or label is None:
            return
        station = self.route(label, self.selector_of(state.commands[index][1]))
        handle = state.held.pop(index)
        logger.debug("Store-and-wait forwarding", extra={"round": index, "station": station, "time": sim.now})
        sim.emit(site.agent_id, sim.now, direction_to_station(station), handle, round_index=index)


class GuessMeasureStrategy(Strategy):
    """Measure Alice's qubit at E0 in a guessed basis and answer both stations on time"""
    kind = AdversaryKind.GUESS_MEASURE

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        return site.agent_id == E0_ID and is_alice_qubit(delivery)

    def guess_basis(self) -> MeasBasis:
        if self.scheme_cfg.scheme_id in (SchemeId.III, SchemeId.V):
            bases = scheme_bases(self.scheme_cfg)
            return bases[int(self.rng.integers(len(bases)))]
        return sample_hemisphere_basis(self.rng)

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        if site.agent_id != E0_ID or not is_alice_qubit(delivery):
            return
        bit = sim.store.measure(delivery.payload, self.guess_basis(), self.rng, site.agent_id)
        payload = ClassicalPayload(PayloadKind.OUTCOME, {"bit": bit})
        index = delivery.round_index
        sim.emit(site.agent_id, sim.now, Direction.RIGHT, payload, round_index=index)
        sim.emit(site.agent_id, sim.now + 2 * self.d_e0, Direction.LEFT, payload, round_index=index)


class TeleportRoutingStrategy(_RoutingMixin, Strategy):
    """
    Teleportation attack on Schemes I and II.

    Per round Eve pre-shares one singlet per label between E0 and E1. E0
    teleports Alice's qubit through the half matching its label and sends the
    Bell outcome right. When A1's selector reaches E1, E1 sends left every half
    whose label routes to A0 and keeps the rest. The site on the routed side
    then holds both the teleport data and the partner half in time to answer.
    """
    kind = AdversaryKind.TELEPORT_I_II

    def __init__(self, scheme_cfg: SchemeConfig, adversary_cfg: AdversaryConfig, rng: np.random.Generator):
        super().__init__(scheme_cfg, adversary_cfg, rng)
        needed = len(self.labels)
        supply = adversary_cfg.singlets_per_round
        if supply is not None and supply < needed:
            raise AdversaryConfigError(
                f"{self.kind.value} needs {needed} singlets per round, supply is {supply}"
            )

    def install(self, sim: Scheduler, sites: List[EveSite]) -> None:
        e0 = self._site(sites, E0_ID)
        e1 = self._site(sites, E1_ID)
        for index in range(self.scheme_cfg.rounds):
            for label in self.labels:
                key = (index, label)
                left, right = sim.store.prepare(make_singlet(), [E0_ID, E1_ID], labels=[key, key])
                e0.state.halves[key] = left
                e1.state.halves[key] = right

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        if site.agent_id != E0_ID or delivery.kind != PayloadKind.QUBIT:
            return False
        return is_alice_qubit(delivery) or (
            delivery.source == E1_ID and delivery.direction == Direction.LEFT
        )

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        if delivery.round_index is None:
            return
        if site.agent_id == E0_ID:
            self._at_e0(site, sim, delivery)
        else:
            self._at_e1(site, sim, delivery)

    def _at_e0(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        state = site.state
        index = delivery.round_index
        if is_alice_qubit(delivery):
            state.held[index] = delivery.payload
        elif delivery.kind == PayloadKind.LABEL and delivery.source == "A0":
            state.labels[index] = int(delivery.values["a"])
        elif is_alice_command(delivery):
            state.commands[index] = (delivery.kind, dict(delivery.values))
        elif delivery.kind == PayloadKind.QUBIT and delivery.source == E1_ID:
            _, label = delivery.payload.label
            state.forwarded.setdefault(index, {})[label] = delivery.payload
        else:
            return

        label = self.label_of(state, index)
        if index in state.held and label is not None:
            psi = state.held.pop(index)
            bell = sim.store.bell_measure(psi, state.halves.pop((index, label)), self.rng, site.agent_id)
            state.teleport_data[index] = (bell, label)
            logger.debug("Teleported at E0", extra={"round": index, "bell": bell.name, "label": label})
            data = ClassicalPayload(PayloadKind.TELEPORT_DATA, {"bell": bell.name, "label": label})
            sim.emit(site.agent_id, sim.now, Direction.RIGHT, data, round_index=index, extent=self.jam)
        self._finish_e0(site, sim, index)

    def _finish_e0(self, site: EveSite, sim: Scheduler, index: int) -> None:
        state = site.state
        if index in state.finished or index not in state.teleport_data or index not in state.commands:
            return
        selector = self.selector_of(state.commands[index][1])
        incoming = [j for j in self.labels if self.route(j, selector) == 0]
        arrived = state.forwarded.get(index, {})
        if len(arrived) < len(incoming):
            return

        state.finished.add(index)
        bell, label = state.teleport_data[index]
        if self.route(label, selector) == 0:
            handle = arrived.pop(label)
            sim.store.apply_pauli(handle, correction_for(bell), site.agent_id)
            sim.emit(site.agent_id, sim.now, Direction.LEFT, handle, round_index=index)
        for handle in arrived.values():
            sim.store.discard(handle, site.agent_id)
        state.forwarded.pop(index, None)
        for key in [k for k in state.halves if k[0] == index]:
            sim.store.discard(state.halves.pop(key), site.agent_id)

    def _at_e1(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        state = site.state
        index = delivery.round_index
        if is_alice_command(delivery):
            selector = self.selector_of(delivery.values)
            state.commands[index] = (delivery.kind, dict(delivery.values))
            for label in self.labels:
                if self.route(label, selector) == 0:
                    handle = state.halves.pop((index, label))
                    sim.emit(site.agent_id, sim.now, Direction.LEFT, handle, round_index=index)
        elif delivery.kind == PayloadKind.TELEPORT_DATA and delivery.source == E0_ID:
            values = delivery.values
            state.teleport_data[index] = (BellOutcome[values["bell"]], int(values["label"]))
        else:
            return
        self._finish_e1(site, sim, index)

    def _finish_e1(self, site: EveSite, sim: Scheduler, index: int) -> None:
        state = site.state
        if index in state.finished or index not in state.teleport_data or index not in state.commands:
            return
        state.finished.add(index)
        bell, label = state.teleport_data[index]
        selector = self.selector_of(state.commands[index][1])
        if self.route(label, selector) == 1:
            handle = state.halves.pop((index, label))
            sim.store.apply_pauli(handle, correction_for(bell), site.agent_id)
            sim.emit(site.agent_id, sim.now, Direction.RIGHT, handle, round_index=index)
        for key in [k for k in state.halves if k[0] == index]:
            sim.store.discard(state.halves.pop(key), site.agent_id)


class TeleportMeasureStrategy(Strategy):
    """
    Teleportation attack on the measuring schemes.

    E0 teleports Alice's qubit into a pre-shared singlet and sends the Bell
    outcome right. E1 measures the partner half in the commanded basis as soon
    as A1's command passes and sends (raw bit, basis) left. Each site then
    infers the outcome on the original qubit from the raw bit and the Pauli
    correction. In Scheme VI redirect rounds E1 keeps the partner half,
    applies the correction once the teleportation data arrives and forwards
    the reconstructed qubit towards A_c. Rounds redirected to A0 therefore
    arrive late by 2 * (e1 - t).
    """
    kind = AdversaryKind.TELEPORT_III_STYLE

    def __init__(self, scheme_cfg: SchemeConfig, adversary_cfg: AdversaryConfig, rng: np.random.Generator):
        super().__init__(scheme_cfg, adversary_cfg, rng)
        supply = adversary_cfg.singlets_per_round
        if supply is not None and supply < 1:
            raise AdversaryConfigError(f"{self.kind.value} needs 1 singlet per round, supply is {supply}")

    def install(self, sim: Scheduler, sites: List[EveSite]) -> None:
        e0 = self._site(sites, E0_ID)
        e1 = self._site(sites, E1_ID)
        for index in range(self.scheme_cfg.rounds):
            key = (index, 1)
            left, right = sim.store.prepare(make_singlet(), [E0_ID, E1_ID], labels=[key, key])
            e0.state.halves[key] = left
            e1.state.halves[key] = right

    def claims(self, site: EveSite, delivery: Delivery) -> bool:
        return site.agent_id == E0_ID and is_alice_qubit(delivery)

    @staticmethod
    def redirect_station(command: Tuple[PayloadKind, Dict[str, Any]]) -> Optional[int]:
        """Station a Scheme VI redirect round sends the qubit to; None for measuring rounds."""
        kind, values = command
        if kind == PayloadKind.BRANCH and int(values["b"]) == 1:
            return int(values["c"])
        return None

    def on_delivery(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        if delivery.round_index is None:
            return
        if site.agent_id == E0_ID:
            self._at_e0(site, sim, delivery)
        else:
            self._at_e1(site, sim, delivery)

    def _at_e0(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        state = site.state
        index = delivery.round_index
        if is_alice_qubit(delivery):
            bell = sim.store.bell_measure(delivery.payload, state.halves.pop((index, 1)), self.rng, site.agent_id)
            state.teleport_data[index] = (bell, 1)
            data = ClassicalPayload(PayloadKind.TELEPORT_DATA, {"bell": bell.name})
            sim.emit(site.agent_id, sim.now, Direction.RIGHT, data, round_index=index, extent=self.jam)
        elif is_alice_command(delivery):
            state.commands[index] = (delivery.kind, dict(delivery.values))
        elif delivery.kind == PayloadKind.MEASUREMENT_REPORT and delivery.source == E1_ID:
            state.reports[index] = (int(delivery.values["bit"]), tuple(delivery.values["axis"]))
        else:
            return
        self._finish_e0(site, sim, index)

    def _finish_e0(self, site: EveSite, sim: Scheduler, index: int) -> None:
        state = site.state
        if index in state.finished or index not in state.teleport_data or index not in state.commands:
            return
        bell, _ = state.teleport_data[index]
        if self.redirect_station(state.commands[index]) is not None:
            state.finished.add(index)
            return
        if index not in state.reports:
            return
        state.finished.add(index)
        raw, axis = state.reports[index]
        bit = raw ^ int(inferred_flip(bell, MeasBasis.from_vector(axis)))
        payload = ClassicalPayload(PayloadKind.OUTCOME, {"bit": bit})
        sim.emit(site.agent_id, sim.now, Direction.LEFT, payload, round_index=index)

    def _at_e1(self, site: EveSite, sim: Scheduler, delivery: Delivery) -> None:
        state = site.state
        index = delivery.round_index
        if is_alice_command(delivery):
            command = (delivery.kind, dict(delivery.values))
            state.commands[index] = command
            station = self.redirect_station(command)
            if station is None:
                basis = command_basis(self.scheme_cfg, delivery.kind, delivery.values)
                raw = sim.store.measure(state.halves.pop((index, 1)), basis, self.rng, site.agent_id)
                state.reports[index] = (raw, basis.axis)
                report = ClassicalPayload(PayloadKind.MEASUREMENT_REPORT, {"bit": raw, "axis": basis.axis})
                sim.emit(site.agent_id, sim.now, Direction.LEFT, report, round_index=index, extent=self.jam)
        elif delivery.kind == PayloadKind.TELEPORT_DATA and delivery.source == E0_ID:
            state.teleport_data[index] = (BellOutcome[delivery.values["bell"]], 1)
        else:
            return
        self._finish_e1(site, sim, index)

    def _finish_e1(self, site: EveSite, sim: Scheduler, index: int) -> None:
        state = site.state
        if index in state.finished or index not in state.teleport_data or index not in state.commands:
            return
        state.finished.add(index)
        bell, _ = state.teleport_data[index]
        station = self.redirect_station(state.commands[index])
        if station is not None:
            handle = state.halves.pop((index, 1))
            sim.store.apply_pauli(handle, correction_for(bell), site.agent_id)
            direction = Direction.LEFT if station == 0 else Direction.RIGHT
            sim.emit(site.agent_id, sim.now, direction, handle, round_index=index)
            return
        raw, axis = state.reports[index]
        bit = raw ^ int(inferred_flip(bell, MeasBasis.from_vector(axis)))
        payload = ClassicalPayload(PayloadKind.OUTCOME, {"bit": bit})
        sim.emit(site.agent_id, sim.now, Direction.RIGHT, payload, round_index=index)


STRATEGIES: Dict[AdversaryKind, Callable[..., Strategy]] = {
    AdversaryKind.NONE: PassiveStrategy,
    AdversaryKind.TAG_OFF_SILENT: TagOffSilentStrategy,
    AdversaryKind.RECORD_REPLAY: RecordReplayStrategy,
    AdversaryKind.STORE_AND_WAIT: StoreAndWaitStrategy,
    AdversaryKind.GUESS_MEASURE: GuessMeasureStrategy,
    AdversaryKind.TELEPORT_I_II: TeleportRoutingStrategy,
    AdversaryKind.TELEPORT_III_STYLE: TeleportMeasureStrategy,
}


def build_strategy(
    scheme_cfg: SchemeConfig,
    adversary_cfg: AdversaryConfig,
    rng: np.random.Generator,
    **kwargs: Any,
) -> Strategy:
    """
    Instantiate the configured strategy.

    Raises:
        AdversaryConfigError: If the strategy does not apply to the scheme,
            the sites are misplaced or the singlet supply is too small
    """
    return STRATEGIES[adversary_cfg.kind](scheme_cfg, adversary_cfg, rng, **kwargs)
