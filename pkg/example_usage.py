#!/usr/bin/env python3
"""
Example usage of the quantum tagging simulator

This script walks through an honest session, the teleportation attacks and
the classical attacks, printing what Alice's verifier concludes each time.
"""

import sys
from typing import Optional

from qtag import (
    AdversaryConfig,
    AdversaryKind,
    ConfigError,
    Geometry,
    SchemeConfig,
    SchemeId,
    Verifier,
    estimate_spoof_rate,
    run_session,
)
from qtag.config import VerifierConfig

GEOMETRY = Geometry(a0=0.0, t_plus=5.0, a1=10.0)


def scheme(scheme_id: SchemeId, rounds: int) -> SchemeConfig:
    return SchemeConfig(scheme_id=scheme_id, geometry=GEOMETRY, rounds=rounds)


def show_session(title: str, scheme_cfg: SchemeConfig, adversary: Optional[AdversaryConfig] = None,
                 verifier_cfg: Optional[VerifierConfig] = None) -> None:
    """Run one session and print its verdict."""
    print(f"\n{title}")
    result = run_session(scheme_cfg, adversary, seed=7)
    verdict = Verifier(scheme_cfg, verifier_cfg).verify(result.transcript, result.expected)
    status = "ACCEPT" if verdict.accept else "REJECT"
    print(f"  {status}  failures: {verdict.failure_counts() or 'none'}")
    if verdict.statistics is not None and verdict.statistics.disagreement_rate is not None:
        print(f"  disagreement with ideal measurement: {verdict.statistics.disagreement_rate:.3f}")


def example_honest():
    print("=" * 60)
    print("Honest sessions")
    print("=" * 60)
    for scheme_id in SchemeId:
        show_session(f"Scheme {scheme_id.value}, tag on", scheme(scheme_id, 200))


def example_teleportation():
    print("=" * 60)
    print("Teleportation attacks, tag off")
    print("=" * 60)
    routing = AdversaryConfig(kind=AdversaryKind.TELEPORT_I_II)
    measuring = AdversaryConfig(kind=AdversaryKind.TELEPORT_III_STYLE)
    show_session("Scheme I vs routing teleportation", scheme(SchemeId.I, 50), routing)
    show_session("Scheme II vs routing teleportation", scheme(SchemeId.II, 50), routing)
    show_session("Scheme III vs measurement teleportation", scheme(SchemeId.III, 1000), measuring)
    for scheme_id in (SchemeId.IV, SchemeId.V, SchemeId.VI):
        show_session(f"Scheme {scheme_id.value} vs measurement teleportation", scheme(scheme_id, 1000), measuring)


def example_classical_attacks():
    print("=" * 60)
    print("Classical attacks")
    print("=" * 60)
    show_session(
        "Scheme I vs store-and-wait",
        scheme(SchemeId.I, 20),
        AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT),
    )
    replay = AdversaryConfig(kind=AdversaryKind.RECORD_REPLAY, replay_delay=2.0)
    show_session("Scheme III vs record-and-replay", scheme(SchemeId.III, 50), replay)
    show_session(
        "Scheme III vs record-and-replay, timing checks disabled",
        scheme(SchemeId.III, 50),
        replay,
        VerifierConfig(timing_checks=False),
    )


def example_spoof_rate():
    print("=" * 60)
    print("Spoof-rate estimate")
    print("=" * 60)
    estimate = estimate_spoof_rate(
        scheme(SchemeId.I, 1),
        AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT),
        trials=400,
        seed=1,
    )
    print(f"\nScheme I, N=1, store-and-wait: p = {estimate.p_hat:.3f} "
          f"[{estimate.ci_low:.3f}, {estimate.ci_high:.3f}]")


def main():
    """Run all examples."""
    print("\n" + "=" * 60)
    print("Quantum Tagging Simulator - Example Usage")
    print("=" * 60)

    try:
        example_honest()
        example_teleportation()
        example_classical_attacks()
        example_spoof_rate()
    except ConfigError as e:
        print(f"Configuration error: {e}")
        sys.exit(2)

    print("\n" + "=" * 60)
    print("Examples completed!")
    print("=" * 60)


if __name__ == "__main__":
    main()
