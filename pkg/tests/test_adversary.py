"""
Tests for Eve's strategies against the tagging schemes
"""

import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from qtag.adversary import (  # noqa: E402
    APPLICABILITY,
    AdversaryConfigError,
    GuessMeasureStrategy,
    TeleportMeasureStrategy,
    TeleportRoutingStrategy,
    build_strategy,
    inapplicable_reason,
    inferred_flip,
)
from qtag.config import AdversaryConfig, AdversaryKind, Geometry, SchemeId, TagPower, VerifierConfig  # noqa: E402
from qtag.qstate import (  # noqa: E402
    B0,
    B1_PRIME,
    TELEPORT_CORRECTIONS,
    BellOutcome,
    MeasBasis,
    PureRegister,
    fidelity,
)
from qtag.session import run_session  # noqa: E402
from qtag.verdict import FailureKind, Verifier, estimate_spoof_rate  # noqa: E402
from qtag.worldline import PayloadKind  # noqa: E402

ATTACK_GEOMETRIES = [
    (Geometry(a0=0.0, t_plus=5.0, a1=10.0), 2.0, 8.0),
    (Geometry(a0=0.0, t_plus=2.0, a1=10.0), 0.5, 9.0),
    (Geometry(a0=-7.0, t_plus=1.0, a1=4.0), -1.0, 3.5),
]

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PAULI["XZ"] = _PAULI["X"] @ _PAULI["Z"]
_SIGMA = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


def _bloch(vec):
    rho = np.outer(vec, np.conj(vec))
    return np.array([np.trace(rho @ s).real for s in _SIGMA])


def _eigenstate(axis):
    """+1 eigenvector of n.sigma"""
    op = sum(a * s for a, s in zip(axis, _SIGMA))
    values, vectors = np.linalg.eigh(op)
    return vectors[:, int(np.argmax(values))]


def _oracle_error(psi, axis, bell):
    """Probability Eve's reported bit disagrees with an ideal measurement of psi along axis."""
    n = np.asarray(axis)
    pauli = _PAULI[TELEPORT_CORRECTIONS[bell].value]
    a = float(_bloch(psi) @ n)
    b = float(_bloch(pauli @ psi) @ n)
    k = int(np.argmax(np.abs(n)))
    u = np.zeros(3)
    u[k] = np.sign(n[k]) or 1.0
    flipped = np.allclose(_bloch(pauli @ _eigenstate(u)), -u, atol=1e-9)
    sigma = -1.0 if flipped else 1.0
    return (1 - sigma * a * b) / 2


def _session(make_scheme, scheme_id, kind, rounds=20, seed=0, geometry=None, e0=2.0, e1=8.0,
             debug=True, **adversary):
    kwargs = {"geometry": geometry} if geometry is not None else {}
    cfg = make_scheme(scheme_id, rounds=rounds, **kwargs)
    adv = AdversaryConfig(kind=AdversaryKind(kind), e0=e0, e1=e1, **adversary)
    return cfg, run_session(cfg, adv, seed=seed, debug=debug)


def _run(make_scheme, scheme_id, kind, verifier=None, seed=0, **kwargs):
    cfg, result = _session(make_scheme, scheme_id, kind, seed=seed, **kwargs)
    verdict = Verifier(cfg, verifier or VerifierConfig(), np.random.default_rng(seed + 1000)).verify(
        result.transcript, result.expected
    )
    return cfg, result, verdict


@pytest.mark.unit
class TestApplicability:
    """Test strategy/scheme compatibility and configuration errors"""

    def test_routing_attacks_only_on_routing_schemes(self):
        """Test store-and-wait targets Schemes I and II only"""
        assert inapplicable_reason(AdversaryKind.STORE_AND_WAIT, SchemeId.I) is None
        reason = inapplicable_reason(AdversaryKind.STORE_AND_WAIT, SchemeId.III)
        assert reason == "store_and_wait targets schemes I, II only"

    def test_every_kind_has_a_row(self):
        """Test the applicability table covers every strategy"""
        assert set(APPLICABILITY) == set(AdversaryKind)

    def test_build_rejects_inapplicable(self, make_scheme, make_adversary, rng):
        """Test building a strategy against the wrong scheme"""
        with pytest.raises(AdversaryConfigError, match="targets schemes"):
            build_strategy(make_scheme("IV"), make_adversary("teleport_I_II"), rng)

    def test_singlet_supply_checked(self, make_scheme, make_adversary, rng):
        """Test Scheme II with m=2 needs two singlets per round"""
        with pytest.raises(AdversaryConfigError, match="needs 2 singlets"):
            build_strategy(make_scheme("II"), make_adversary("teleport_I_II", singlets_per_round=1), rng)
        strategy = build_strategy(make_scheme("I"), make_adversary("teleport_I_II", singlets_per_round=1), rng)
        assert isinstance(strategy, TeleportRoutingStrategy)

    def test_measure_attack_needs_a_singlet(self, make_scheme, make_adversary, rng):
        """Test zero supply is rejected"""
        with pytest.raises(AdversaryConfigError, match="needs 1 singlet"):
            build_strategy(make_scheme("III"), make_adversary("teleport_III_style", singlets_per_round=0), rng)

    def test_misplaced_sites(self, make_scheme, make_adversary, rng):
        """Test sites must straddle the tag"""
        with pytest.raises(AdversaryConfigError, match="a0 < e0 < t"):
            build_strategy(make_scheme("III"), make_adversary("guess_measure", e0=6.0), rng)

    def test_default_sites_are_midpoints(self, make_scheme, rng):
        """Test omitted sites sit halfway to each station"""
        strategy = build_strategy(make_scheme("III"), AdversaryConfig(kind=AdversaryKind.GUESS_MEASURE), rng)
        assert isinstance(strategy, GuessMeasureStrategy)
        assert (strategy.e0, strategy.e1) == (2.5, 7.5)


@pytest.mark.unit
class TestInference:
    """Test Eve's outcome inference rule"""

    def test_pauli_bases_inferred_exactly(self):
        """Test the flip follows the conjugation table on Pauli bases"""
        assert inferred_flip(BellOutcome.PSI_MINUS, B0) is False
        assert inferred_flip(BellOutcome.PHI_MINUS, B0) is True
        assert inferred_flip(BellOutcome.PSI_PLUS, B0) is False

    def test_tilted_basis_uses_nearest_axis(self):
        """Test a non-preserved basis falls back to the nearest Pauli axis"""
        # B'1 is closest to +x, which X preserves
        assert inferred_flip(BellOutcome.PHI_MINUS, B1_PRIME) is False
        assert inferred_flip(BellOutcome.PSI_PLUS, B1_PRIME) is True


@pytest.mark.unit
class TestPassiveAndSilent:
    """Test baseline strategies"""

    def test_passive_eve_matches_honest(self, make_scheme):
        """Test a present but passive Eve does not disturb an honest run"""
        cfg = make_scheme("I", rounds=10)
        result = run_session(cfg, AdversaryConfig(e0=2.0, e1=8.0), seed=4, debug=True)
        verdict = Verifier(cfg).verify(result.transcript, result.expected)
        assert verdict.accept
        assert [s.agent_id for s in result.sites] == ["E0", "E1"]

    def test_tag_off_silent_measuring_scheme(self, make_scheme):
        """Test no outcomes arrive when the tag is off and nobody answers"""
        _, result, verdict = _run(make_scheme, "III", "tag_off_silent", rounds=5)
        assert result.sites == []
        assert verdict.failure_counts()["missing"] == 10
        assert not verdict.accept

    def test_tag_off_silent_routing_scheme(self, make_scheme):
        """Test only the route-to-A0 rounds are flagged"""
        _, result, verdict = _run(make_scheme, "I", "tag_off_silent", rounds=20, seed=2)
        to_a0 = sum(1 for plan in result.plans if plan.choices["a"] == 0)
        missing = [f for f in verdict.failures if f.kind == FailureKind.MISSING]
        assert len(missing) == to_a0
        assert all(f.station == "A0" for f in missing)


@pytest.mark.unit
class TestStoreAndWait:
    """Test the store-and-wait attack on the routing schemes"""

    @pytest.mark.parametrize("geometry,e0,e1", ATTACK_GEOMETRIES)
    def test_lateness_is_twice_e0_to_tag(self, make_scheme, geometry, e0, e1):
        """Test rounds routed to A1 arrive late by 2 d(E0, T)"""
        _, result, verdict = _run(make_scheme, "I", "store_and_wait", rounds=20, geometry=geometry, e0=e0, e1=e1)
        lateness = 2 * (geometry.t_plus - e0)
        late_rounds = {plan.round_index for plan in result.plans if plan.choices["a"] == 1}
        mistimed = [f for f in verdict.failures if f.kind == FailureKind.MISTIMED]
        assert {f.round_index for f in mistimed} == late_rounds
        for failure in mistimed:
            assert failure.station == "A1"
            assert failure.delta == pytest.approx(lateness, abs=1e-9)
        assert not any(f.kind == FailureKind.PROJECTIVE_FAIL for f in verdict.failures)

    def test_scheme_ii_forwarding(self, make_scheme):
        """Test Scheme II qubits routed to A0 arrive on time and intact"""
        _, result, verdict = _run(make_scheme, "II", "store_and_wait", rounds=20, seed=5)
        late = {plan.round_index for plan in result.plans if plan.choices["route"] == 1}
        assert {f.round_index for f in verdict.failures} == late

    @pytest.mark.slow
    def test_single_round_acceptance_is_half(self, make_scheme):
        """Test one-round sessions are spoofed about half the time"""
        cfg = make_scheme("I", rounds=1)
        adv = AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT, e0=2.0, e1=8.0)
        estimate = estimate_spoof_rate(cfg, adv, trials=4000, seed=17)
        assert abs(estimate.p_hat - 0.5) < 0.03

    @pytest.mark.slow
    def test_twenty_rounds_never_spoofed(self, make_scheme):
        """Test twenty-round sessions are always caught"""
        cfg = make_scheme("I", rounds=20)
        adv = AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT, e0=2.0, e1=8.0)
        assert estimate_spoof_rate(cfg, adv, trials=300, seed=18).accepted == 0


@pytest.mark.unit
class TestGuessMeasure:
    """Test the measure-and-guess baseline"""

    def test_timing_is_correct(self, make_scheme):
        """Test guessed outcomes arrive at the honest times"""
        _, _, verdict = _run(make_scheme, "IV", "guess_measure", rounds=50)
        kinds = verdict.failure_counts()
        assert "mistimed" not in kinds and "missing" not in kinds and "unexpected" not in kinds

    @pytest.mark.slow
    @pytest.mark.parametrize("scheme_id", ["III", "IV"])
    def test_statistics_catch_guessing(self, make_scheme, scheme_id):
        """Test thousand-round sessions are rejected on statistics"""
        for seed in range(3):
            _, _, verdict = _run(make_scheme, scheme_id, "guess_measure", rounds=1000, seed=seed, debug=False)
            assert not verdict.accept
            kinds = set(verdict.failure_counts())
            assert kinds <= {"deterministic", "statistical"}


@pytest.mark.unit
class TestTeleportRouting:
    """Test the teleportation attack on Schemes I and II"""

    @pytest.mark.parametrize("geometry,e0,e1", ATTACK_GEOMETRIES)
    @pytest.mark.parametrize("scheme_id", ["I", "II"])
    def test_accepted_at_honest_times(self, make_scheme, scheme_id, geometry, e0, e1):
        """Test every round is delivered on time with the original state"""
        cfg, result = _session(make_scheme, scheme_id, "teleport_I_II", rounds=30, geometry=geometry, e0=e0, e1=e1)
        store = result.transcript.store
        for plan, record in zip(result.plans, result.expected):
            check = record.checks[0]
            (delivery,) = [
                r for r in result.transcript.at(check.station_id, PayloadKind.QUBIT)
                if r.claimed and r.round_index == plan.round_index
            ]
            honest = plan.arrival_time + geometry.distance_to_station(check.station)
            assert delivery.time == pytest.approx(honest, abs=1e-9)
            register, index = store.inspect(delivery.payload)
            assert register.num_qubits == 1 and index == 0
            assert fidelity(register, PureRegister(record.target)) == pytest.approx(1.0, abs=1e-9)

        verdict = Verifier(cfg, VerifierConfig(), np.random.default_rng(1)).verify(result.transcript, result.expected)
        assert verdict.accept, verdict.failure_counts()

    def test_internal_traffic_is_jammed(self, make_scheme):
        """Test teleport data never reaches Alice's stations"""
        _, result, verdict = _run(make_scheme, "II", "teleport_I_II", rounds=10)
        for station in ("A0", "A1"):
            assert result.transcript.at(station, PayloadKind.TELEPORT_DATA) == []
        assert verdict.accept

    @pytest.mark.slow
    def test_spoof_rate_is_one(self, make_scheme):
        """Test acceptance frequency 1 across seeds"""
        cfg = make_scheme("II", rounds=50)
        adv = AdversaryConfig(kind=AdversaryKind.TELEPORT_I_II, e0=2.0, e1=8.0)
        estimate = estimate_spoof_rate(cfg, adv, trials=50, seed=3)
        assert estimate.accepted == 50

    def test_random_geometries(self, make_scheme):
        """Test acceptance across randomly placed tags and sites"""
        rng = np.random.default_rng(99)
        for _ in range(5):
            a0, t_plus, a1 = sorted(rng.uniform(-20, 20, size=3))
            e0 = rng.uniform(a0, t_plus)
            e1 = rng.uniform(t_plus, a1)
            geometry = Geometry(a0=a0, t_plus=t_plus, a1=a1)
            _, _, verdict = _run(make_scheme, "I", "teleport_I_II", rounds=20, geometry=geometry, e0=e0, e1=e1)
            assert verdict.accept


@pytest.mark.unit
class TestTeleportMeasure:
    """Test the teleportation attack on the measuring schemes"""

    def test_scheme_iii_is_spoofed(self, make_scheme):
        """Test Pauli-basis commands are inferred exactly"""
        _, result, verdict = _run(make_scheme, "III", "teleport_III_style", rounds=200, seed=6)
        assert verdict.accept, verdict.failure_counts()
        for station in ("A0", "A1"):
            assert result.transcript.at(station, PayloadKind.MEASUREMENT_REPORT) == []

    @pytest.mark.slow
    def test_scheme_iii_outcomes_follow_born_rule(self, make_scheme):
        """Test 100 spoofed sessions are accepted and every (state, basis) cell matches Born"""
        zeros = {}
        totals = {}
        born = {}
        for seed in range(100):
            _, result, verdict = _run(make_scheme, "III", "teleport_III_style", rounds=1000, seed=seed, debug=False)
            assert verdict.accept, verdict.failure_counts()
            bits = {
                station: {
                    r.round_index: r.payload.values["bit"] for r in result.transcript.at(station, PayloadKind.OUTCOME)
                }
                for station in ("A0", "A1")
            }
            assert bits["A0"] == bits["A1"]
            for plan, record in zip(result.plans, result.expected):
                cell = (plan.choices["state"], plan.choices["c"])
                born[cell] = record.outcome_p0
                totals[cell] = totals.get(cell, 0) + 1
                zeros[cell] = zeros.get(cell, 0) + (bits["A0"][record.round_index] == 0)
                deterministic = record.deterministic_outcome()
                if deterministic is not None:
                    assert bits["A0"][record.round_index] == deterministic
        assert len(totals) == 18
        for cell, total in totals.items():
            assert abs(zeros[cell] / total - born[cell]) < 0.03, cell

    @pytest.mark.slow
    @pytest.mark.parametrize("scheme_id", ["IV", "V", "VI"])
    def test_other_measuring_schemes_resist(self, make_scheme, scheme_id):
        """Test Schemes IV to VI reject the attack at N=1000"""
        allowed = {"deterministic", "statistical"} | ({"mistimed"} if scheme_id == "VI" else set())
        for seed in range(3):
            _, _, verdict = _run(make_scheme, scheme_id, "teleport_III_style", rounds=1000, seed=seed, debug=False)
            assert not verdict.accept
            assert set(verdict.failure_counts()) <= allowed

    @pytest.mark.slow
    def test_scheme_vi_rejection_frequency(self, make_scheme):
        """Test the attack on Scheme VI is rejected in at least 95% of sessions"""
        cfg = make_scheme("VI", rounds=1000)
        adv = AdversaryConfig(kind=AdversaryKind.TELEPORT_III_STYLE)
        estimate = estimate_spoof_rate(cfg, adv, trials=40, seed=11)
        assert estimate.trials - estimate.accepted >= 38

    def test_scheme_vi_redirect_rounds(self, make_scheme):
        """Test qubits rebuilt at E1 reach A1 on time and A0 late by 2 * (e1 - t)"""
        _, result, verdict = _run(make_scheme, "VI", "teleport_III_style", rounds=60, seed=8)
        to_a0 = {p.round_index for p in result.plans if p.choices["b"] == 1 and p.choices["c"] == 0}
        to_a1 = {p.round_index for p in result.plans if p.choices["b"] == 1 and p.choices["c"] == 1}
        assert to_a0 and to_a1
        assert not verdict.accept
        late = {f.round_index: f for f in verdict.failures if f.kind == FailureKind.MISTIMED}
        assert set(late) == to_a0
        # e1 = 8, t = 5
        assert all(f.station == "A0" and f.delta == pytest.approx(6.0) for f in late.values())
        for failure in verdict.failures:
            assert failure.round_index not in to_a1
            assert failure.kind not in (FailureKind.MISSING, FailureKind.PROJECTIVE_FAIL)

    def test_redirect_station(self):
        """Test only branch commands with b=1 redirect"""
        assert TeleportMeasureStrategy.redirect_station((PayloadKind.BRANCH, {"b": 1, "c": 0})) == 0
        assert TeleportMeasureStrategy.redirect_station((PayloadKind.BRANCH, {"b": 0, "c": 1})) is None
        assert TeleportMeasureStrategy.redirect_station((PayloadKind.BASIS_INDEX, {"c": 2})) is None

    @pytest.mark.slow
    @pytest.mark.parametrize("scheme_id", ["IV", "V"])
    def test_inference_error_matches_bloch_oracle(self, make_scheme, scheme_id):
        """Test the measured disagreement rate against an independent per-round oracle"""
        observed = []
        predicted = []
        for seed in range(10):
            _, result, verdict = _run(make_scheme, scheme_id, "teleport_III_style", rounds=3000, seed=seed, debug=False)
            e0 = result.sites[0]
            assert e0.agent_id == "E0"
            for record in result.expected:
                bell, _ = e0.state.teleport_data[record.round_index]
                predicted.append(_oracle_error(record.target, record.basis.axis, bell))
            observed.append(verdict.statistics.disagreement_rate)
        assert abs(np.mean(observed) - np.mean(predicted)) < 0.01
        if scheme_id == "IV":
            # honest reports of a uniform state sit at 1/3
            assert np.mean(predicted) > 0.34


@pytest.mark.unit
class TestRecordReplay:
    """Test recording the tag's outputs and replaying them later"""

    def test_replay_rejected_on_timing(self, make_scheme):
        """Test every replayed outcome is late by the replay delay"""
        _, result, verdict = _run(make_scheme, "III", "record_replay", rounds=20, replay_delay=1.0)
        mistimed = [f for f in verdict.failures if f.kind == FailureKind.MISTIMED]
        assert len(mistimed) == 40
        assert all(f.delta == pytest.approx(1.0) for f in mistimed)
        assert {f.round_index for f in mistimed} == set(range(20))

    def test_replay_accepted_without_timing(self, make_scheme):
        """Test a verifier that ignores timing accepts the replay"""
        _, result, verdict = _run(
            make_scheme, "III", "record_replay", rounds=50, replay_delay=3.0,
            verifier=VerifierConfig(timing_checks=False),
        )
        assert verdict.accept, verdict.failure_counts()
        assert result.tag.state.completed_rounds == 0

    def test_quantum_outputs_not_replayed(self, make_scheme):
        """Test replaying against a routing scheme leaves qubits missing"""
        _, result, verdict = _run(make_scheme, "I", "record_replay", rounds=10)
        assert verdict.failure_counts().get("missing", 0) == 10
        assert all(not site.state.recordings for site in result.sites)

    def test_tag_off_in_replay(self, make_scheme):
        """Test the replay phase runs against a switched-off tag"""
        cfg = make_scheme("III", rounds=5)
        adv = AdversaryConfig(kind=AdversaryKind.RECORD_REPLAY, e0=2.0, e1=8.0)
        result = run_session(cfg, adv, seed=1)
        assert result.tag.state.powered == TagPower.OFF
        assert all(len(site.strategy.recordings[site.agent_id]) == 5 for site in result.sites)


@pytest.mark.unit
class TestDeterminism:
    """Test attacks replay identically from a seed"""

    def test_same_seed_same_acceptance(self, make_scheme):
        """Test repeated estimates agree"""
        cfg = make_scheme("I", rounds=2)
        adv = AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT, e0=2.0, e1=8.0)
        first = estimate_spoof_rate(cfg, adv, trials=40, seed=12)
        second = estimate_spoof_rate(cfg, adv, trials=40, seed=12)
        assert first == second

    def test_basis_from_axis(self):
        """Test the oracle helper agrees with the library basis vectors"""
        e0, _ = MeasBasis((0.0, 0.0, 1.0)).vectors()
        assert abs(np.vdot(_eigenstate((0.0, 0.0, 1.0)), e0)) == pytest.approx(1.0)
