"""
Tests for the command-line runner
"""

import json
import logging
import os
import sys

import pytest

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from qtag import cli  # noqa: E402
from qtag.cli import (  # noqa: E402
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    ExtraFormatter,
    build_matrix,
    build_parser,
    build_run_spec,
    main,
    matrix_specs,
    parse_config,
    parse_f_table,
    parse_geometry,
    resolve_options,
    run_matrix,
    run_row,
)
from qtag.config import AdversaryKind, ConfigError, SchemeId, Settings, TagPower  # noqa: E402
from qtag.qstate import QuantumStateError  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "config")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Isolate runs from QTAG_* variables and stray .env files"""
    for name in ("QTAG_SEED", "QTAG_DEBUG", "QTAG_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def _without_timestamp(text):
    data = json.loads(text)
    data.pop("generated_at")
    return data


@pytest.mark.unit
class TestFlagParsing:
    """Test flag value parsers"""

    def test_parse_geometry(self):
        """Test key=value pairs become floats"""
        assert parse_geometry("a0=0, t=2.5, a1=10,e0=1") == {"a0": 0.0, "t": 2.5, "a1": 10.0, "e0": 1.0}

    def test_parse_geometry_unknown_key(self):
        """Test unknown keys are rejected"""
        with pytest.raises(ConfigError, match="--geometry"):
            parse_geometry("a0=0,x=1")

    def test_parse_geometry_not_a_number(self):
        """Test non-numeric values are rejected"""
        with pytest.raises(ConfigError, match="not a number"):
            parse_geometry("a0=zero")

    def test_parse_f_table(self):
        """Test rows separated by semicolons"""
        assert parse_f_table("0,1;1,0") == [[0, 1], [1, 0]]

    def test_parse_f_table_garbage(self):
        """Test bad bits are rejected"""
        with pytest.raises(ConfigError, match="--f-table"):
            parse_f_table("0,x")


@pytest.mark.unit
class TestParseConfig:
    """Test flags and files resolve into a run"""

    def test_flags(self):
        """Test a minimal flag set"""
        spec = parse_config(["--scheme", "IV", "--rounds", "20", "--geometry", "a0=0,t=2,a1=10", "--seed", "9"])
        assert spec.scheme.scheme_id == SchemeId.IV
        assert spec.scheme.rounds == 20
        assert spec.scheme.geometry.t_plus == 2.0
        assert spec.scheme.tau == 40.0
        assert spec.adversary.kind == AdversaryKind.NONE
        assert spec.tag_power == TagPower.ON
        assert spec.seed == 9

    def test_attack_defaults_tag_off(self):
        """Test attack rows power the tag off unless told otherwise"""
        spec = parse_config(["--scheme", "I", "--adversary", "store_and_wait"])
        assert spec.tag_power == TagPower.OFF
        spec = parse_config(["--scheme", "I", "--adversary", "store_and_wait", "--tag", "on"])
        assert spec.tag_power == TagPower.ON

    def test_misordered_geometry_names_the_flag(self):
        """Test geometry ordering errors point at --geometry"""
        with pytest.raises(ConfigError, match="--geometry: a0 < t required"):
            parse_config(["--scheme", "I", "--geometry", "a0=5,t=1,a1=10"])

    def test_site_outside_segment(self):
        """Test an Eve site beyond the tag is rejected"""
        with pytest.raises(ConfigError, match="a0 < e0 < t required"):
            parse_config(["--scheme", "I", "--adversary", "store_and_wait", "--geometry", "a0=0,t=5,a1=10,e0=6"])

    def test_short_round_period(self):
        """Test round periods shorter than a round trip are rejected"""
        with pytest.raises(ConfigError, match="--round-period|round_period"):
            parse_config(["--scheme", "III", "--round-period", "15"])

    def test_scheme_ii_default_table_warns(self, caplog):
        """Test the XOR default is announced"""
        with caplog.at_level(logging.WARNING, logger="qtag.cli"):
            spec = parse_config(["--scheme", "II"])
        assert spec.scheme.routing_table == ((0, 1), (1, 0))
        assert any("parity XOR" in r.getMessage() for r in caplog.records)

    def test_scheme_ii_explicit_table(self, caplog):
        """Test an explicit table is used without a warning"""
        with caplog.at_level(logging.WARNING, logger="qtag.cli"):
            spec = parse_config(["--scheme", "II", "--f-table", "1,1;0,0"])
        assert spec.scheme.route(1, 2) == 1
        assert spec.scheme.route(2, 1) == 0
        assert not [r for r in caplog.records if r.name == "qtag.cli"]

    def test_yaml_file_with_flag_override(self, tmp_path):
        """Test file values load and flags win"""
        path = tmp_path / "run.yaml"
        path.write_text(
            "scheme: II\n"
            "adversary: teleport_I_II\n"
            "rounds: 12\n"
            "trials: 4\n"
            "geometry: {a0: 0, t: 3, a1: 10, e0: 1, e1: 9}\n"
            "f_table: '0,1;1,0'\n"
        )
        spec = parse_config(["--config", str(path), "--rounds", "7"])
        assert spec.scheme.scheme_id == SchemeId.II
        assert spec.scheme.rounds == 7
        assert spec.trials == 4
        assert spec.adversary.kind == AdversaryKind.TELEPORT_I_II
        assert spec.adversary.sites(spec.scheme.geometry) == (1.0, 9.0)

    def test_shipped_run_file(self):
        """Test the example run file in config/ validates"""
        path = os.path.join(CONFIG_DIR, "run-scheme-iii.yaml")
        spec = parse_config(["--config", path])
        assert spec.scheme.scheme_id == SchemeId.III
        assert spec.adversary.kind == AdversaryKind.TELEPORT_III_STYLE
        assert spec.seed == 42

    def test_shipped_matrix_file(self):
        """Test the example matrix file in config/ expands to every pair"""
        args = build_parser().parse_args(["--config", os.path.join(CONFIG_DIR, "matrix.yaml")])
        options = resolve_options(args, Settings())
        assert len(matrix_specs(options, build_matrix(options))) == 42

    def test_unknown_file_key(self, tmp_path):
        """Test stray keys in a file are reported"""
        path = tmp_path / "run.yaml"
        path.write_text("scheme: I\nroundz: 3\n")
        with pytest.raises(ConfigError, match="unknown keys roundz"):
            parse_config(["--config", str(path)])

    def test_malformed_yaml_reports_line(self, tmp_path):
        """Test YAML syntax errors carry a line number"""
        path = tmp_path / "run.yaml"
        path.write_text("scheme: I\nrounds: [1, 2\n")
        with pytest.raises(ConfigError, match="line"):
            parse_config(["--config", str(path)])


@pytest.mark.unit
class TestMatrix:
    """Test matrix expansion and row execution"""

    def test_all_schemes(self):
        """Test 'all' expands in declaration order"""
        options = {"schemes": ["all"], "adversaries": ["none", "store_and_wait"], "rounds": 3}
        matrix = build_matrix(options)
        assert [s.value for s in matrix.schemes] == ["I", "II", "III", "IV", "V", "VI"]
        specs = matrix_specs(options, matrix)
        assert len(specs) == 12
        assert specs[1].adversary.kind == AdversaryKind.STORE_AND_WAIT

    def test_unknown_adversary(self):
        """Test unknown matrix entries are configuration errors"""
        with pytest.raises(ConfigError, match="--adversaries: unknown value 'psychic'"):
            build_matrix({"schemes": ["I"], "adversaries": ["psychic"]})

    def test_inapplicable_row(self):
        """Test a teleport-routing attack on a classical-output scheme is n/a"""
        row = run_row(build_run_spec({"rounds": 3}, "IV", "teleport_I_II"))
        assert not row.applicable
        assert "targets schemes I, II only" in row.reason
        assert row.summary_row()["p_hat"] == "n/a"
        assert row.trials == []

    def test_rows_follow_row_key_order(self):
        """Test rows come out in scheme then adversary order"""
        specs = [
            build_run_spec({"rounds": 3}, "III", "none"),
            build_run_spec({"rounds": 3}, "I", "tag_off_silent"),
            build_run_spec({"rounds": 3}, "I", "none"),
        ]
        report = run_matrix(specs)
        assert [(r.scheme, r.adversary) for r in report.rows] == [
            ("I", "none"), ("I", "tag_off_silent"), ("III", "none"),
        ]
        assert not report.partial

    def test_failing_row_marks_report_partial(self):
        """Test a row that cannot run is recorded and the rest still complete"""
        options = {"rounds": 3, "singlets_per_round": 0}
        report = run_matrix([
            build_run_spec(options, "I", "none"),
            build_run_spec(options, "I", "teleport_I_II"),
        ])
        assert report.partial
        honest, broken = report.rows
        assert honest.estimate is not None
        assert broken.estimate is None
        assert "singlet" in broken.error
        assert broken.summary_row()["p_hat"] == "error"

    def test_unexpected_row_error_is_recorded(self, monkeypatch, caplog):
        """Test any exception from a row is caught, logged with its fields and marks the report partial"""
        original = cli.run_row

        def flaky(spec, debug=False):
            if spec.scheme.scheme_id == SchemeId.III:
                raise QuantumStateError("register collapsed")
            return original(spec, debug)

        monkeypatch.setattr(cli, "run_row", flaky)
        with caplog.at_level(logging.ERROR, logger="qtag.cli"):
            report = run_matrix([
                build_run_spec({"rounds": 3}, "I", "none"),
                build_run_spec({"rounds": 3}, "III", "none"),
            ])
        assert report.partial
        honest, broken = report.rows
        assert honest.estimate is not None
        assert broken.error == "QuantumStateError: register collapsed"
        (record,) = [r for r in caplog.records if r.getMessage() == "Row failed"]
        assert record.scheme == "III"
        assert record.error == "register collapsed"


@pytest.mark.unit
class TestMain:
    """Test the process entry point"""

    def test_single_row_writes_reports(self, tmp_path, capsys):
        """Test a clean run prints the table and writes all outputs"""
        report_path = tmp_path / "report.json"
        summary_path = tmp_path / "summary.txt"
        csv_path = tmp_path / "summary.csv"
        code = main([
            "--scheme", "III", "--rounds", "5", "--trials", "2",
            "--report", str(report_path), "--summary", str(summary_path), "--csv", str(csv_path),
        ])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0].split() == [
            "scheme", "adversary", "tag", "N", "trials", "p_hat", "ci_low", "ci_high", "dominant_failure",
        ]
        assert summary_path.read_text() == out
        data = json.loads(report_path.read_text())
        assert data["schema_version"] == "1.0"
        assert data["partial"] is False
        (row,) = data["rows"]
        assert row["estimate"]["trials"] == 2
        assert row["typing"] == "QC"
        assert csv_path.read_text().startswith("scheme,adversary,tag,N,trials,p_hat")

    def test_same_seed_same_report(self, tmp_path):
        """Test JSON reports are byte-stable apart from the timestamp"""
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            assert main(["--scheme", "IV", "--adversary", "guess_measure", "--rounds", "6",
                         "--trials", "3", "--seed", "4", "--report", str(path)]) == EXIT_OK
        first, second = (_without_timestamp(p.read_text()) for p in paths)
        assert first == second

    def test_matrix_with_not_applicable_row(self, capsys):
        """Test matrix output marks inapplicable pairs"""
        code = main(["--schemes", "I,IV", "--adversaries", "teleport_I_II", "--rounds", "3"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4
        assert "n/a" in lines[3]
        assert "n/a" not in lines[2]

    def test_configuration_error_exit(self, capsys):
        """Test bad geometry exits with the configuration code"""
        code = main(["--scheme", "I", "--geometry", "a0=5,t=1,a1=10"])
        assert code == EXIT_CONFIG
        assert "a0 < t required" in capsys.readouterr().err

    def test_missing_scheme(self, capsys):
        """Test a run needs a scheme"""
        assert main([]) == EXIT_CONFIG
        assert "--scheme" in capsys.readouterr().err

    def test_bad_environment(self, monkeypatch):
        """Test malformed QTAG_* variables are configuration errors"""
        monkeypatch.setenv("QTAG_SEED", "lots")
        assert main(["--scheme", "I"]) == EXIT_CONFIG

    def test_partial_exit(self, capsys):
        """Test a failed row yields the partial exit code"""
        code = main(["--schemes", "I", "--adversaries", "none,teleport_I_II", "--singlets", "0", "--rounds", "3"])
        assert code == EXIT_PARTIAL
        assert "(partial: some rows failed to complete)" in capsys.readouterr().out

    def test_unexpected_error_still_writes_report(self, monkeypatch, tmp_path):
        """Test a crashing row yields a partial JSON report and exit code 1"""
        def crash(spec, debug=False):
            raise RuntimeError("verifier exploded")

        monkeypatch.setattr(cli, "run_row", crash)
        report_path = tmp_path / "report.json"
        assert main(["--scheme", "IV", "--rounds", "3", "--report", str(report_path)]) == EXIT_PARTIAL
        data = json.loads(report_path.read_text())
        assert data["partial"] is True
        assert data["rows"][0]["error"] == "RuntimeError: verifier exploded"


@pytest.mark.unit
class TestLogFormat:
    """Test log lines carry their structured fields"""

    def _record(self, **extra):
        record = logging.LogRecord("qtag.schemes", logging.WARNING, __file__, 1, "Malformed tag round", (), None)
        record.__dict__.update(extra)
        return record

    def test_extras_are_rendered(self):
        """Test fields passed through extra appear as key=value"""
        line = ExtraFormatter("%(levelname)s %(name)s: %(message)s").format(self._record(round=4, time=12.5))
        assert line == "WARNING qtag.schemes: Malformed tag round round=4 time=12.5"

    def test_plain_record_unchanged(self):
        """Test records without extras keep the base format"""
        line = ExtraFormatter("%(levelname)s %(name)s: %(message)s").format(self._record())
        assert line == "WARNING qtag.schemes: Malformed tag round"
