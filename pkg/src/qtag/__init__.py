"""
Relativistic quantum tagging simulator

Deterministic discrete-event simulation of tagging Schemes I-VI on a line,
spoofing strategies (including teleportation attacks) and Alice's verifier.
"""

from .adversary import AdversaryConfigError, build_strategy, inapplicable_reason
from .config import (
    AdversaryConfig,
    AdversaryKind,
    ConfigError,
    Geometry,
    RunSpec,
    SchemeConfig,
    SchemeId,
    StatTestConfig,
    TagPower,
    VerifierConfig,
)
from .qstate import QuantumStateError
from .schemes import plan_rounds
from .session import TaggingSession, run_session
from .verdict import Verdict, Verifier, estimate_spoof_rate
from .worldline import CausalityViolation, NoCloneViolation, Scheduler, SimulationError

__version__ = "0.1.0"

__all__ = [
    "AdversaryConfig",
    "AdversaryConfigError",
    "AdversaryKind",
    "CausalityViolation",
    "ConfigError",
    "Geometry",
    "NoCloneViolation",
    "QuantumStateError",
    "RunSpec",
    "Scheduler",
    "SchemeConfig",
    "SchemeId",
    "SimulationError",
    "StatTestConfig",
    "TagPower",
    "TaggingSession",
    "Verdict",
    "Verifier",
    "VerifierConfig",
    "build_strategy",
    "estimate_spoof_rate",
    "inapplicable_reason",
    "plan_rounds",
    "run_session",
]
