"""
Tests for report rendering
"""

import json
import os
import sys

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from qtag.config import AdversaryConfig, AdversaryKind, RunSpec  # noqa: E402
from qtag.report import SUMMARY_COLUMNS, Report, RowReport, build_row, spec_config  # noqa: E402
from qtag.verdict import evaluate_trial  # noqa: E402


@pytest.fixture
def attack_row(make_scheme):
    """Store-and-wait against Scheme I over a few trials"""
    spec = RunSpec(
        scheme=make_scheme("I", rounds=6),
        adversary=AdversaryConfig(kind=AdversaryKind.STORE_AND_WAIT),
        trials=4,
        seed=1,
    )
    return build_row(spec, [evaluate_trial(spec, t) for t in range(spec.trials)])


@pytest.mark.unit
class TestRowReport:
    """Test row aggregation"""

    def test_trials_in_order(self, attack_row):
        """Test per-trial entries keep trial order"""
        assert [t["trial"] for t in attack_row.trials] == [0, 1, 2, 3]
        assert attack_row.estimate.trials == 4

    def test_timing_histogram_records_lateness(self, attack_row):
        """Test mistimed deltas are bucketed per station"""
        assert attack_row.dominant_failure == "mistimed"
        assert set(attack_row.timing_histogram) == {"A1"}
        assert set(attack_row.timing_histogram["A1"]) == {"+5"}

    def test_config_echo(self, attack_row):
        """Test the row echoes its resolved configuration"""
        assert attack_row.config["tag_power"] == "off"
        assert attack_row.config["scheme"]["rounds"] == 6

    def test_not_applicable_summary(self, make_scheme):
        """Test n/a rows render their reason"""
        spec = RunSpec(scheme=make_scheme("III"), adversary=AdversaryConfig(kind=AdversaryKind.TELEPORT_I_II))
        row = RowReport("III", "teleport_I_II", spec_config(spec), applicable=False, reason="not here")
        summary = row.summary_row()
        assert summary["p_hat"] == "n/a"
        assert summary["dominant_failure"] == "not here"


@pytest.mark.unit
class TestReport:
    """Test whole-report formats"""

    def test_json_is_sorted_and_stable(self, attack_row):
        """Test JSON output parses and carries the schema version"""
        report = Report(rows=[attack_row], generated_at="2024-01-01T00:00:00+00:00")
        text = report.to_json()
        assert text.endswith("\n")
        assert text == Report(rows=[attack_row], generated_at="2024-01-01T00:00:00+00:00").to_json()
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert data["rows"][0]["typing"] == "QQ"
        assert json.dumps(data, indent=2, sort_keys=True) + "\n" == text

    def test_summary_and_csv(self, attack_row):
        """Test table header and partial marker"""
        report = Report(rows=[attack_row], partial=True)
        lines = report.summary_table().splitlines()
        assert lines[0].split() == SUMMARY_COLUMNS
        assert lines[2].split()[:4] == ["I", "store_and_wait", "off", "6"]
        assert lines[-1] == "(partial: some rows failed to complete)"
        csv_lines = report.to_csv().splitlines()
        assert csv_lines[0] == ",".join(SUMMARY_COLUMNS)
        assert len(csv_lines) == 2
