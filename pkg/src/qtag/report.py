"""
Run reports: JSON, a fixed-width summary table and CSV export.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from .config import SCHEME_TYPING, RunSpec, SchemeId
from .verdict import FailureKind, SpoofRateEstimate, TrialOutcome, wilson_interval

SCHEMA_VERSION = "1.0"

SUMMARY_COLUMNS = ["scheme", "adversary", "tag", "N", "trials", "p_hat", "ci_low", "ci_high", "dominant_failure"]


@dataclass
class RowReport:
    """Aggregate of all trials for one (scheme, adversary) pair"""
    scheme: str
    adversary: str
    config: Dict[str, Any]
    applicable: bool = True
    reason: Optional[str] = None
    trials: List[Dict[str, Any]] = field(default_factory=list)
    estimate: Optional[SpoofRateEstimate] = None
    timing_histogram: Dict[str, Dict[str, int]] = field(default_factory=dict)
    statistics_table: List[Dict[str, Any]] = field(default_factory=list)
    transcript_sample: List[str] = field(default_factory=list)
    mean_disagreement_rate: Optional[float] = None
    error: Optional[str] = None

    @property
    def dominant_failure(self) -> Optional[str]:
        totals: Dict[str, int] = {}
        for trial in self.trials:
            for kind, count in trial["failure_counts"].items():
                totals[kind] = totals.get(kind, 0) + count
        if not totals:
            return None
        return max(sorted(totals), key=lambda k: totals[k])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme,
            "adversary": self.adversary,
            "typing": SCHEME_TYPING[SchemeId(self.scheme)],
            "applicable": self.applicable,
            "reason": self.reason,
            "config": self.config,
            "trials": self.trials,
            "estimate": self.estimate.to_dict() if self.estimate else None,
            "dominant_failure": self.dominant_failure,
            "timing_histogram": self.timing_histogram,
            "statistics_table": self.statistics_table,
            "mean_disagreement_rate": self.mean_disagreement_rate,
            "transcript_sample": self.transcript_sample,
            "error": self.error,
        }

    def summary_row(self) -> Dict[str, str]:
        tag = self.config.get("tag_power", "")
        rounds = str(self.config.get("scheme", {}).get("rounds", ""))
        if not self.applicable:
            return {
                "scheme": self.scheme, "adversary": self.adversary, "tag": tag, "N": rounds,
                "trials": "-", "p_hat": "n/a", "ci_low": "-", "ci_high": "-",
                "dominant_failure": self.reason or "",
            }
        if self.estimate is None:
            return {
                "scheme": self.scheme, "adversary": self.adversary, "tag": tag, "N": rounds,
                "trials": "-", "p_hat": "error", "ci_low": "-", "ci_high": "-",
                "dominant_failure": self.error or "",
            }
        return {
            "scheme": self.scheme,
            "adversary": self.adversary,
            "tag": tag,
            "N": rounds,
            "trials": str(self.estimate.trials),
            "p_hat": f"{self.estimate.p_hat:.4f}",
            "ci_low": f"{self.estimate.ci_low:.4f}",
            "ci_high": f"{self.estimate.ci_high:.4f}",
            "dominant_failure": self.dominant_failure or "-",
        }


def build_row(spec: RunSpec, outcomes: List[TrialOutcome]) -> RowReport:
    """Aggregate trial outcomes into a row, in trial order."""
    row = RowReport(
        scheme=spec.scheme.scheme_id.value,
        adversary=spec.adversary.kind.value,
        config=spec_config(spec),
    )
    accepted = 0
    table: Dict[int, Dict[str, Any]] = {}
    rates = []
    for outcome in outcomes:
        verdict = outcome.verdict
        accepted += int(verdict.accept)
        row.trials.append({
            "trial": verdict.trial,
            "accept": verdict.accept,
            "failure_counts": verdict.failure_counts(),
        })
        for failure in verdict.failures:
            if failure.kind != FailureKind.MISTIMED or failure.delta is None:
                continue
            bucket = row.timing_histogram.setdefault(failure.station or "?", {})
            key = f"{failure.delta:+.6g}"
            bucket[key] = bucket.get(key, 0) + 1
        stats = verdict.statistics
        if stats is not None:
            if stats.disagreement_rate is not None:
                rates.append(stats.disagreement_rate)
            for bin_report in stats.bins:
                cell = table.setdefault(bin_report.index, {
                    "bin": bin_report.index,
                    "range": [bin_report.lower, bin_report.upper],
                    "rounds": 0,
                    "observed_zero": 0,
                    "expected_zero": 0.0,
                    "failed_tests": 0,
                })
                cell["rounds"] += bin_report.rounds
                cell["observed_zero"] += bin_report.observed_zero
                cell["expected_zero"] += bin_report.mean_p0 * bin_report.rounds
                cell["failed_tests"] += int(not bin_report.passed)
    if outcomes:
        low, high = wilson_interval(accepted, len(outcomes))
        row.estimate = SpoofRateEstimate(accepted, len(outcomes), low, high)
        row.transcript_sample = outcomes[0].transcript_sample
    row.statistics_table = [table[k] for k in sorted(table)]
    if rates:
        row.mean_disagreement_rate = sum(rates) / len(rates)
    return row


def spec_config(spec: RunSpec) -> Dict[str, Any]:
    config = spec.model_dump(mode="json")
    config["tag_power"] = spec.tag_power.value
    return config


@dataclass
class Report:
    rows: List[RowReport]
    partial: bool = False
    generated_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "generated_at": self.generated_at,
            "partial": self.partial,
            "rows": [row.to_dict() for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary_table(self) -> str:
        rows = [row.summary_row() for row in self.rows]
        widths = {
            col: max([len(col)] + [len(r[col]) for r in rows])
            for col in SUMMARY_COLUMNS
        }
        lines = ["  ".join(col.ljust(widths[col]) for col in SUMMARY_COLUMNS)]
        lines.append("  ".join("-" * widths[col] for col in SUMMARY_COLUMNS))
        for r in rows:
            lines.append("  ".join(r[col].ljust(widths[col]) for col in SUMMARY_COLUMNS).rstrip())
        if self.partial:
            lines.append("(partial: some rows failed to complete)")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.summary_row())
        return buffer.getvalue()


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
