"""
Alice's post-hoc verification of a session transcript.

Station deliveries are first assigned to expectations; timing, projective and
statistical checks then run over that assignment. Any failure rejects.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binomtest

from .config import (
    AdversaryConfig,
    RunSpec,
    SchemeConfig,
    StatTestConfig,
    TagPower,
    VerifierConfig,
    derive_rng,
)
from .qstate import MeasBasis, bloch_vector_of
from .schemes import ExpectedRecord, Modality
from .worldline import DeliveryRecord, NoCloneViolation, PayloadKind, Transcript

logger = logging.getLogger(__name__)


class FailureKind(str, Enum):
    MISSING = "missing"
    MISTIMED = "mistimed"
    UNEXPECTED = "unexpected"
    PROJECTIVE_FAIL = "projective_fail"
    OUTCOME_MISMATCH = "outcome_mismatch_between_stations"
    DETERMINISTIC = "deterministic"
    STATISTICAL = "statistical"


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    round_index: Optional[int] = None
    station: Optional[str] = None
    detail: str = ""
    delta: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "round": self.round_index,
            "station": self.station,
            "detail": self.detail,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class TimingCheck:
    """One expected station delivery"""
    round_index: int
    station: str
    modality: Modality
    expected_time: float
    tolerance: float


@dataclass
class Match:
    check: TimingCheck
    expected: ExpectedRecord
    record: Optional[DeliveryRecord] = None

    @property
    def delta(self) -> Optional[float]:
        if self.record is None:
            return None
        return self.record.time - self.check.expected_time


@dataclass
class Assignment:
    matches: List[Match]
    unexpected: List[DeliveryRecord]

    def matched(self, modality: Modality) -> List[Match]:
        return [m for m in self.matches if m.record is not None and m.check.modality == modality]


@dataclass(frozen=True)
class BinReport:
    index: int
    lower: float
    upper: float
    rounds: int
    observed_zero: int
    mean_p0: float
    p_value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.p_value >= self.threshold

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bin": self.index,
            "range": [self.lower, self.upper],
            "rounds": self.rounds,
            "observed_zero": self.observed_zero,
            "expected_zero": self.mean_p0 * self.rounds,
            "p_value": self.p_value,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass
class StatisticsReport:
    bins: List[BinReport] = field(default_factory=list)
    outcome_rounds: int = 0
    deterministic_rounds: int = 0
    disagreement_rate: Optional[float] = None
    failures: List[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "outcome_rounds": self.outcome_rounds,
            "deterministic_rounds": self.deterministic_rounds,
            "disagreement_rate": self.disagreement_rate,
            "bins": [b.to_dict() for b in self.bins],
        }


@dataclass(frozen=True)
class Verdict:
    """Accept iff there are no failures"""
    trial: int
    rounds: int
    failures: Tuple[Failure, ...] = ()
    statistics: Optional[StatisticsReport] = None

    @property
    def accept(self) -> bool:
        return not self.failures

    def with_failures(self, *failures: Failure) -> "Verdict":
        return replace(self, failures=self.failures + tuple(failures))

    def failure_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for failure in self.failures:
            counts[failure.kind.value] = counts.get(failure.kind.value, 0) + 1
        return counts

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trial": self.trial,
            "rounds": self.rounds,
            "accept": self.accept,
            "failure_counts": self.failure_counts(),
            "statistics": self.statistics.to_dict() if self.statistics else None,
        }


@dataclass(frozen=True)
class SpoofRateEstimate:
    accepted: int
    trials: int
    ci_low: float
    ci_high: float

    @property
    def p_hat(self) -> float:
        return self.accepted / self.trials

    def to_dict(self) -> Dict[str, Any]:
        return {
            "accepted": self.accepted,
            "trials": self.trials,
            "p_hat": self.p_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    interval = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(interval.low), float(interval.high)


def timing_checks(expected: Sequence[ExpectedRecord], epsilon_t: float) -> List[Tuple[TimingCheck, ExpectedRecord]]:
    checks = []
    for record in expected:
        for check in record.checks:
            checks.append((
                TimingCheck(record.round_index, check.station_id, check.modality, check.time, epsilon_t),
                record,
            ))
    return checks


def default_window(expected: Sequence[ExpectedRecord]) -> float:
    """Half the spacing between consecutive rounds (unbounded for a single round)."""
    times = sorted({record.arrival_time for record in expected})
    gaps = [b - a for a, b in zip(times, times[1:]) if b > a]
    return min(gaps) / 2 if gaps else math.inf


def _station_deliveries(transcript: Transcript, station: str, modality: Modality) -> List[DeliveryRecord]:
    if modality == Modality.QUBIT:
        return [r for r in transcript.at(station, PayloadKind.QUBIT) if r.claimed]
    return transcript.at(station, PayloadKind.OUTCOME)


def assign_deliveries(
    transcript: Transcript,
    expected: Sequence[ExpectedRecord],
    epsilon_t: float = 1e-9,
    window: Optional[float] = None,
    timing_enabled: bool = True,
) -> Assignment:
    """
    Match station deliveries to expectations.

    With timing enabled, each expectation takes the nearest free delivery of
    its modality at its station within the window. With timing disabled,
    deliveries are matched in arrival order.
    """
    window = default_window(expected) if window is None else window
    pairs = timing_checks(expected, epsilon_t)
    matches = [Match(check, record) for check, record in pairs]
    unexpected: List[DeliveryRecord] = []

    groups: Dict[Tuple[str, Modality], List[Match]] = {}
    for match in matches:
        groups.setdefault((match.check.station, match.check.modality), []).append(match)
    for station in ("A0", "A1"):
        for modality in Modality:
            group = groups.get((station, modality), [])
            deliveries = _station_deliveries(transcript, station, modality)
            used = set()
            if timing_enabled:
                deliveries.sort(key=lambda r: r.time)
                times = [r.time for r in deliveries]
                candidates = []
                for i, match in enumerate(group):
                    expected_time = match.check.expected_time
                    lo = bisect.bisect_left(times, expected_time - window)
                    hi = bisect.bisect_right(times, expected_time + window)
                    for j in range(lo, hi):
                        gap = abs(times[j] - expected_time)
                        candidates.append((gap, expected_time, times[j], i, j))
                candidates.sort()
                taken = set()
                for _, _, _, i, j in candidates:
                    if i in taken or j in used:
                        continue
                    group[i].record = deliveries[j]
                    taken.add(i)
                    used.add(j)
            else:
                ordered = sorted(range(len(group)), key=lambda k: group[k].check.expected_time)
                for i, j in zip(ordered, range(len(deliveries))):
                    group[i].record = deliveries[j]
                    used.add(j)
            unexpected.extend(r for j, r in enumerate(deliveries) if j not in used)

    unexpected.sort(key=lambda r: (r.time, r.position, r.signal_id))
    return Assignment(matches, unexpected)


def check_timing(
    transcript: Transcript,
    expected: Sequence[ExpectedRecord],
    epsilon_t: float = 1e-9,
    window: Optional[float] = None,
    timing_enabled: bool = True,
    assignment: Optional[Assignment] = None,
) -> List[Failure]:
    """Flag missing, mistimed and unexpected station deliveries."""
    if assignment is None:
        assignment = assign_deliveries(transcript, expected, epsilon_t, window, timing_enabled)
    failures = []
    for match in assignment.matches:
        check = match.check
        if match.record is None:
            failures.append(Failure(
                FailureKind.MISSING, check.round_index, check.station,
                f"no {check.modality.value} near t={check.expected_time:.9g}",
            ))
        elif timing_enabled and abs(match.delta) > check.tolerance:
            failures.append(Failure(
                FailureKind.MISTIMED, check.round_index, check.station,
                f"{check.modality.value} arrived at t={match.record.time:.9g}, expected {check.expected_time:.9g}",
                delta=match.delta,
            ))
    for record in assignment.unexpected:
        failures.append(Failure(
            FailureKind.UNEXPECTED, record.round_index, record.agent_id,
            f"{record.summary} at t={record.time:.9g}",
        ))
    return failures


def check_projective(
    transcript: Transcript,
    expected: Sequence[ExpectedRecord],
    rng: np.random.Generator,
    assignment: Optional[Assignment] = None,
) -> List[Failure]:
    """Project every delivered qubit onto its target state; consumes the handles."""
    if assignment is None:
        assignment = assign_deliveries(transcript, expected)
    failures = []
    for match in assignment.matched(Modality.QUBIT):
        basis = MeasBasis.from_vector(bloch_vector_of(match.expected.target))
        try:
            outcome = transcript.store.measure(match.record.payload, basis, rng, match.check.station)
        except NoCloneViolation as e:
            failures.append(Failure(FailureKind.PROJECTIVE_FAIL, match.check.round_index, match.check.station, str(e)))
            continue
        if outcome != 0:
            failures.append(Failure(
                FailureKind.PROJECTIVE_FAIL, match.check.round_index, match.check.station,
                "qubit failed projection onto the sent state",
            ))
    return failures


def disagreement_rate(expected: Sequence[ExpectedRecord], reported: Dict[int, int]) -> Optional[float]:
    """
    Mean probability that a reported bit differs from an ideal measurement of
    the sent state in the commanded basis.
    """
    terms = []
    for record in expected:
        if record.outcome_p0 is None or record.round_index not in reported:
            continue
        p0 = record.outcome_p0
        terms.append(p0 if reported[record.round_index] == 1 else 1 - p0)
    return float(np.mean(terms)) if terms else None


def reported_outcomes(assignment: Assignment) -> Dict[int, Dict[str, int]]:
    bits: Dict[int, Dict[str, int]] = {}
    for match in assignment.matched(Modality.OUTCOME):
        bit = int(match.record.payload.values.get("bit", -1))
        bits.setdefault(match.check.round_index, {})[match.check.station] = bit
    return bits


def check_statistics(
    transcript: Transcript,
    expected: Sequence[ExpectedRecord],
    cfg: Optional[StatTestConfig] = None,
    assignment: Optional[Assignment] = None,
) -> StatisticsReport:
    """
    Station consistency, exact deterministic cells, then binned binomial tests.

    Non-deterministic rounds are binned by predicted p0; each non-empty bin is
    tested two-sided against its mean p0 at alpha / (non-empty bins).
    """
    cfg = cfg or StatTestConfig()
    if assignment is None:
        assignment = assign_deliveries(transcript, expected)
    report = StatisticsReport()
    bits = reported_outcomes(assignment)
    single: Dict[int, int] = {}
    binned: Dict[int, List[Tuple[float, int]]] = {}

    for record in expected:
        if record.outcome_p0 is None:
            continue
        report.outcome_rounds += 1
        observed = bits.get(record.round_index)
        if not observed:
            continue
        if len(set(observed.values())) > 1:
            report.failures.append(Failure(
                FailureKind.OUTCOME_MISMATCH, record.round_index, None,
                ", ".join(f"{s}={b}" for s, b in sorted(observed.items())),
            ))
            continue
        bit = next(iter(observed.values()))
        single[record.round_index] = bit

        deterministic = record.deterministic_outcome(cfg.deterministic_tolerance)
        if deterministic is not None:
            report.deterministic_rounds += 1
            if bit != deterministic:
                report.failures.append(Failure(
                    FailureKind.DETERMINISTIC, record.round_index, None,
                    f"reported {bit}, predicted {deterministic} with certainty",
                ))
            continue
        index = min(int(record.outcome_p0 * cfg.bins), cfg.bins - 1)
        binned.setdefault(index, []).append((record.outcome_p0, bit))

    threshold = cfg.alpha / len(binned) if binned else cfg.alpha
    for index in sorted(binned):
        cell = binned[index]
        zeros = sum(1 for _, bit in cell if bit == 0)
        mean_p0 = float(np.mean([p for p, _ in cell]))
        p_value = float(binomtest(zeros, len(cell), mean_p0).pvalue)
        bin_report = BinReport(
            index=index,
            lower=index / cfg.bins,
            upper=(index + 1) / cfg.bins,
            rounds=len(cell),
            observed_zero=zeros,
            mean_p0=mean_p0,
            p_value=p_value,
            threshold=threshold,
        )
        report.bins.append(bin_report)
        if not bin_report.passed:
            report.failures.append(Failure(
                FailureKind.STATISTICAL, None, None,
                f"bin {index}: {zeros}/{len(cell)} zeros vs mean p0 {mean_p0:.4f} (p={p_value:.3g})",
            ))

    report.disagreement_rate = disagreement_rate(expected, single)
    return report


class Verifier:
    """
    Runs every check over one session.

    Args:
        scheme_cfg: Scheme the session ran
        cfg: Verifier settings
        rng: Stream for projective tests, independent of the protocol stream
    """

    def __init__(self, scheme_cfg: SchemeConfig, cfg: Optional[VerifierConfig] = None, rng: Optional[np.random.Generator] = None):
        self.scheme_cfg = scheme_cfg
        self.cfg = cfg or VerifierConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)

    @property
    def window(self) -> float:
        if self.cfg.assignment_window is not None:
            return self.cfg.assignment_window
        return self.scheme_cfg.tau / 2

    def verify(self, transcript: Transcript, expected: Sequence[ExpectedRecord], trial: int = 0) -> Verdict:
        assignment = assign_deliveries(
            transcript, expected, self.scheme_cfg.epsilon_t, self.window, self.cfg.timing_checks,
        )
        failures = check_timing(
            transcript, expected, self.scheme_cfg.epsilon_t, self.window, self.cfg.timing_checks, assignment,
        )
        failures += check_projective(transcript, expected, self.rng, assignment)
        statistics = check_statistics(transcript, expected, self.cfg.stats, assignment)
        failures += statistics.failures
        verdict = Verdict(trial=trial, rounds=len(expected), failures=tuple(failures), statistics=statistics)
        logger.debug(
            "Session verdict",
            extra={"trial": trial, "accept": verdict.accept, "failures": verdict.failure_counts()},
        )
        return verdict


@dataclass
class TrialOutcome:
    verdict: Verdict
    transcript_sample: List[str]


def evaluate_trial(spec: RunSpec, trial: int, debug: bool = False) -> TrialOutcome:
    """Run and verify one trial of a RunSpec."""
    from .session import run_session

    result = run_session(spec.scheme, spec.adversary, spec.tag_power, spec.seed, trial, debug)
    verifier = Verifier(spec.scheme, spec.verifier, derive_rng(spec.seed, f"trial-{trial}", "verifier"))
    verdict = verifier.verify(result.transcript, result.expected, trial)
    return TrialOutcome(verdict, result.transcript.to_lines(rounds=spec.transcript_rounds))


def estimate_spoof_rate(
    scheme_cfg: SchemeConfig,
    adversary_cfg: Optional[AdversaryConfig] = None,
    trials: int = 100,
    seed: int = 0,
    rounds: Optional[int] = None,
    verifier_cfg: Optional[VerifierConfig] = None,
    tag_power: Optional[TagPower] = None,
) -> SpoofRateEstimate:
    """
    Acceptance frequency over independent sessions with a Wilson 95% interval.

    Raises:
        ValueError: If trials < 1
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rounds is not None:
        scheme_cfg = SchemeConfig.model_validate({**scheme_cfg.model_dump(), "rounds": rounds})
    spec = RunSpec(
        scheme=scheme_cfg,
        adversary=adversary_cfg or AdversaryConfig(),
        verifier=verifier_cfg or VerifierConfig(),
        seed=seed,
        trials=trials,
        tag=tag_power,
        transcript_rounds=0,
    )
    accepted = sum(1 for trial in range(trials) if evaluate_trial(spec, trial).verdict.accept)
    low, high = wilson_interval(accepted, trials)
    return SpoofRateEstimate(accepted, trials, low, high)
