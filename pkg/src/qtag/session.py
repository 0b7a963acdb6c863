"""
One tagging session: plan the rounds, place the agents, run the scheduler.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

from .adversary import EveSite, RecordedOutput, RecordReplayStrategy, Strategy, build_strategy
from .config import AdversaryConfig, AdversaryKind, SchemeConfig, TagPower, derive_rng
from .schemes import AliceStation, ExpectedRecord, RoundPlan, TaggingDevice, plan_rounds
from .worldline import Scheduler, Transcript

logger = logging.getLogger(__name__)


@dataclass
class SessionResult:
    """Everything the verifier and the report need from one session"""
    trial: int
    transcript: Transcript
    plans: List[RoundPlan]
    expected: List[ExpectedRecord]
    tag: TaggingDevice
    sites: List[EveSite]
    strategy: Strategy


class TaggingSession:
    """
    A single seeded session of one scheme against one strategy.

    Args:
        scheme_cfg: Scheme under test
        adversary_cfg: Eve's strategy
        tag_power: Tag state; defaults to on for the honest control, off otherwise
        seed: Master seed
        trial: Trial number, folded into every derived stream
        debug: Enable the scheduler's per-step linearity sweep
    """

    def __init__(
        self,
        scheme_cfg: SchemeConfig,
        adversary_cfg: Optional[AdversaryConfig] = None,
        tag_power: Optional[TagPower] = None,
        seed: int = 0,
        trial: int = 0,
        debug: bool = False,
    ):
        self.scheme_cfg = scheme_cfg
        self.adversary_cfg = adversary_cfg or AdversaryConfig()
        if tag_power is None:
            tag_power = TagPower.ON if self.adversary_cfg.kind == AdversaryKind.NONE else TagPower.OFF
        self.tag_power = tag_power
        self.seed = seed
        self.trial = trial
        self.debug = debug

    def _rng(self, component: str):
        return derive_rng(self.seed, f"trial-{self.trial}", component)

    def _simulate(
        self,
        tag_power: TagPower,
        recordings: Optional[Dict[str, List[RecordedOutput]]] = None,
        phase: str = "main",
    ) -> SessionResult:
        plans, expected = plan_rounds(self.scheme_cfg, self._rng("plan"))

        kwargs = {}
        if self.adversary_cfg.kind == AdversaryKind.RECORD_REPLAY:
            kwargs["recordings"] = recordings
        strategy = build_strategy(self.scheme_cfg, self.adversary_cfg, self._rng(f"eve-{phase}"), **kwargs)

        sim = Scheduler(rng=self._rng(f"trace-{phase}"), debug=self.debug)
        geometry = self.scheme_cfg.geometry
        sim.register(AliceStation(0, geometry.a0, plans))
        sim.register(AliceStation(1, geometry.a1, plans))
        tag = TaggingDevice(self.scheme_cfg, tag_power, self._rng(f"tag-{phase}"))
        sim.register(tag)
        sites = strategy.build_sites()
        for site in sites:
            sim.register(site)
        strategy.install(sim, sites)

        transcript = sim.run()
        return SessionResult(
            trial=self.trial,
            transcript=transcript,
            plans=plans,
            expected=expected,
            tag=tag,
            sites=sites,
            strategy=strategy,
        )

    def run(self) -> SessionResult:
        """Run the session; record-and-replay first runs its recording phase with the tag on."""
        if self.adversary_cfg.kind == AdversaryKind.RECORD_REPLAY:
            recording = self._simulate(TagPower.ON, recordings=None, phase="record")
            recordings = RecordReplayStrategy.collect(recording.sites)
            logger.debug(
                "Recorded tag outputs",
                extra={"trial": self.trial, "count": sum(len(v) for v in recordings.values())},
            )
            return self._simulate(self.tag_power, recordings=recordings, phase="replay")
        return self._simulate(self.tag_power)


def run_session(
    scheme_cfg: SchemeConfig,
    adversary_cfg: Optional[AdversaryConfig] = None,
    tag_power: Optional[TagPower] = None,
    seed: int = 0,
    trial: int = 0,
    debug: bool = False,
) -> SessionResult:
    return TaggingSession(scheme_cfg, adversary_cfg, tag_power, seed, trial, debug).run()
