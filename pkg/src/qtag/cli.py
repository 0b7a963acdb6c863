#!/usr/bin/env python3
"""
Command-line experiment runner.

Runs one (scheme, adversary) pair or a matrix of them, prints a fixed-width
summary to stdout and optionally writes JSON, text and CSV reports.

Exit codes: 0 all rows completed, 1 a row failed (partial report written),
2 configuration error.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from .adversary import inapplicable_reason
from .config import (
    AdversaryKind,
    ConfigError,
    MatrixSpec,
    RunSpec,
    SchemeId,
    Settings,
    describe_validation_error,
    load_yaml,
)
from .report import Report, RowReport, build_row, spec_config, write_text
from .verdict import evaluate_trial

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

DEFAULT_GEOMETRY = {"a0": 0.0, "t": 5.0, "a1": 10.0}
GEOMETRY_KEYS = ("a0", "t", "a1", "e0", "e1", "t0", "t1")

# Model field paths -> the flag (or file key) a user would fix.
FIELD_FLAGS = {
    "scheme": "scheme",
    "scheme.geometry": "--geometry",
    "scheme.geometry.a0": "--geometry a0",
    "scheme.geometry.t_plus": "--geometry t",
    "scheme.geometry.a1": "--geometry a1",
    "scheme.rounds": "--rounds",
    "scheme.round_period": "--round-period",
    "scheme.m": "--m",
    "scheme.n": "--n",
    "scheme.f_table": "--f-table",
    "scheme.epsilon_t": "--epsilon-t",
    "scheme.scheme_id": "--scheme",
    "adversary.kind": "--adversary",
    "adversary.replay_delay": "--replay-delay",
    "adversary.singlets_per_round": "--singlets",
    "verifier.stats.alpha": "--alpha",
    "verifier.stats.bins": "--bins",
    "verifier.assignment_window": "--assignment-window",
    "seed": "--seed",
    "trials": "--trials",
    "": "--geometry",
}


def parse_geometry(text: str) -> Dict[str, float]:
    """Parse 'a0=0,t=5,a1=10,e0=2,e1=8'."""
    geometry: Dict[str, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in GEOMETRY_KEYS:
            raise ConfigError(f"--geometry: expected key=value with keys {', '.join(GEOMETRY_KEYS)}, got '{item}'")
        try:
            geometry[key] = float(value)
        except ValueError:
            raise ConfigError(f"--geometry {key}: not a number: '{value}'")
    return geometry


def parse_f_table(text: str) -> List[List[int]]:
    """Parse rows separated by ';' and bits by ',' (e.g. '0,1;1,0')."""
    try:
        return [[int(bit) for bit in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError:
        raise ConfigError(f"--f-table: expected rows of bits like '0,1;1,0', got '{text}'")


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtag",
        description="Simulate relativistic quantum tagging schemes against spoofing strategies",
    )
    run = parser.add_argument_group("run")
    run.add_argument("--config", help="YAML run or matrix file (flags override file values)")
    run.add_argument("--scheme", choices=[s.value for s in SchemeId])
    run.add_argument("--adversary", choices=[a.value for a in AdversaryKind])
    run.add_argument("--schemes", help="Comma list of schemes for a matrix run, or 'all'")
    run.add_argument("--adversaries", help="Comma list of adversaries for a matrix run, or 'all'")
    run.add_argument("--rounds", type=int, help="Rounds N per session")
    run.add_argument("--trials", type=int, help="Sessions per row")
    run.add_argument("--seed", type=int, help="Master seed (default: QTAG_SEED or 0)")
    run.add_argument("--tag", choices=["on", "off"], help="Override the tag state")
    run.add_argument("--jobs", type=int, default=1, help="Worker processes for matrix rows")

    scheme = parser.add_argument_group("scheme")
    scheme.add_argument("--geometry", help="a0=,t=,a1=[,e0=,e1=]")
    scheme.add_argument("--round-period", type=float, dest="round_period")
    scheme.add_argument("--session-window", type=float, dest="session_window")
    scheme.add_argument("--epsilon-t", type=float, dest="epsilon_t")
    scheme.add_argument("--m", type=int)
    scheme.add_argument("--n", type=int)
    scheme.add_argument("--f-table", dest="f_table", help="Scheme II routing table, e.g. '0,1;1,0'")

    adversary = parser.add_argument_group("adversary")
    adversary.add_argument("--replay-delay", type=float, dest="replay_delay")
    adversary.add_argument("--singlets", type=int, dest="singlets_per_round", help="Singlets per round")

    verifier = parser.add_argument_group("verifier")
    verifier.add_argument("--alpha", type=float)
    verifier.add_argument("--bins", type=int)
    verifier.add_argument("--no-timing-checks", action="store_false", dest="timing_checks", default=None)
    verifier.add_argument("--assignment-window", type=float, dest="assignment_window")

    output = parser.add_argument_group("output")
    output.add_argument("--report", help="Write the JSON report here")
    output.add_argument("--summary", help="Write the summary table here")
    output.add_argument("--csv", help="Write the summary table as CSV here")
    output.add_argument("--transcript-rounds", type=int, dest="transcript_rounds")
    output.add_argument("--log-level", dest="log_level")
    output.add_argument("--debug", action="store_true", default=None, help="Per-step no-cloning sweep")
    return parser


OPTION_KEYS = (
    "scheme", "adversary", "schemes", "adversaries", "rounds", "trials", "seed", "tag",
    "geometry", "round_period", "session_window", "epsilon_t", "m", "n", "f_table", "states", "bases",
    "replay_delay", "singlets_per_round", "alpha", "bins", "timing_checks", "assignment_window",
    "transcript_rounds", "debug",
)


def resolve_options(args: argparse.Namespace, settings: Settings) -> Dict[str, Any]:
    """Merge file values, then flags, over environment defaults."""
    options: Dict[str, Any] = {"seed": settings.seed, "debug": settings.debug}
    if args.config:
        data = load_yaml(args.config)
        unknown = sorted(set(data) - set(OPTION_KEYS))
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {', '.join(unknown)}")
        options.update({k: v for k, v in data.items() if v is not None})
        if isinstance(options.get("geometry"), dict):
            options["geometry"] = {str(k): float(v) for k, v in options["geometry"].items()}
        if isinstance(options.get("f_table"), str):
            options["f_table"] = parse_f_table(options["f_table"])

    for key in OPTION_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "geometry":
            value = parse_geometry(value)
        elif key == "f_table":
            value = parse_f_table(value)
        elif key in ("schemes", "adversaries"):
            value = _csv_list(value)
        options[key] = value
    return options


def _drop_none(data: Dict[str, Any]) -> Dict[str, Any]:
    return {k: (_drop_none(v) if isinstance(v, dict) else v) for k, v in data.items() if v is not None}


def build_run_spec(options: Dict[str, Any], scheme: str, adversary: str) -> RunSpec:
    """
    Validate one row's options into a RunSpec.

    Raises:
        ConfigError: With the offending flag for any invalid value
    """
    geometry = dict(DEFAULT_GEOMETRY)
    geometry.update(options.get("geometry") or {})
    unknown = sorted(set(geometry) - set(GEOMETRY_KEYS))
    if unknown:
        raise ConfigError(f"geometry: unknown keys {', '.join(unknown)}")
    data = _drop_none({
        "scheme": {
            "scheme_id": scheme,
            "geometry": {
                "a0": geometry["a0"],
                "t_plus": geometry["t"],
                "a1": geometry["a1"],
                "t0": geometry.get("t0"),
                "t1": geometry.get("t1"),
            },
            "rounds": options.get("rounds"),
            "round_period": options.get("round_period"),
            "session_window": options.get("session_window"),
            "epsilon_t": options.get("epsilon_t"),
            "m": options.get("m"),
            "n": options.get("n"),
            "f_table": options.get("f_table"),
            "states": options.get("states"),
            "bases": options.get("bases"),
        },
        "adversary": {
            "kind": adversary,
            "e0": geometry.get("e0"),
            "e1": geometry.get("e1"),
            "singlets_per_round": options.get("singlets_per_round"),
            "replay_delay": options.get("replay_delay"),
        },
        "verifier": {
            "stats": {"alpha": options.get("alpha"), "bins": options.get("bins")},
            "timing_checks": options.get("timing_checks"),
            "assignment_window": options.get("assignment_window"),
        },
        "seed": options.get("seed"),
        "trials": options.get("trials"),
        "tag": options.get("tag"),
        "transcript_rounds": options.get("transcript_rounds"),
    })
    try:
        spec = RunSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(describe_validation_error(e, FIELD_FLAGS)) from e
    if spec.scheme.scheme_id == SchemeId.II and spec.scheme.f_table is None:
        logger.warning(
            "Scheme II without an f table: using the parity XOR default",
            extra={"table": [list(row) for row in spec.scheme.routing_table]},
        )
    return spec


def parse_config(argv: Optional[Sequence[str]] = None) -> RunSpec:
    """Parse flags (and an optional --config file) into a single RunSpec."""
    args = build_parser().parse_args(argv)
    options = resolve_options(args, Settings.from_env())
    return build_run_spec(options, options.get("scheme") or "", options.get("adversary") or AdversaryKind.NONE.value)


def _expand(values: Any, enum_cls: Any, flag: str) -> Tuple[str, ...]:
    if isinstance(values, str):
        values = _csv_list(values)
    if list(values) == ["all"]:
        return tuple(member.value for member in enum_cls)
    allowed = {member.value for member in enum_cls}
    for value in values:
        if value not in allowed:
            raise ConfigError(f"{flag}: unknown value '{value}'")
    return tuple(values)


def build_matrix(options: Dict[str, Any]) -> MatrixSpec:
    schemes = _expand(options.get("schemes") or [options.get("scheme") or "all"], SchemeId, "--schemes")
    adversaries = _expand(
        options.get("adversaries") or [options.get("adversary") or AdversaryKind.NONE.value],
        AdversaryKind,
        "--adversaries",
    )
    base = build_run_spec(options, schemes[0], AdversaryKind.NONE.value)
    return MatrixSpec(schemes=schemes, adversaries=adversaries, base=base)


def matrix_specs(options: Dict[str, Any], matrix: MatrixSpec) -> List[RunSpec]:
    return [build_run_spec(options, s.value, a.value) for s, a in matrix.rows()]


def run_row(spec: RunSpec, debug: bool = False) -> RowReport:
    """Run every trial of one row; inapplicable pairs come back marked n/a."""
    reason = inapplicable_reason(spec.adversary.kind, spec.scheme.scheme_id)
    if reason is not None:
        return RowReport(
            scheme=spec.scheme.scheme_id.value,
            adversary=spec.adversary.kind.value,
            config=spec_config(spec),
            applicable=False,
            reason=reason,
        )
    outcomes = [evaluate_trial(spec, trial, debug) for trial in range(spec.trials)]
    row = build_row(spec, outcomes)
    logger.info(
        "Row complete",
        extra={
            "scheme": row.scheme,
            "adversary": row.adversary,
            "accepted": row.estimate.accepted,
            "trials": row.estimate.trials,
        },
    )
    return row


def run_matrix(specs: Sequence[RunSpec], jobs: int = 1, debug: bool = False) -> Report:
    """
    Run rows in row-key order and assemble the report.

    A row that raises is recorded with its error and the report is marked
    partial; the remaining rows still run.
    """
    ordered = sorted(specs, key=lambda s: s.row_key)
    rows: List[RowReport] = []
    partial = False

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_row, spec, debug) for spec in ordered]
            results = []
            for spec, future in zip(ordered, futures):
                try:
                    results.append((spec, future.result(), None))
                except Exception as e:
                    results.append((spec, None, e))
    else:
        results = []
        for spec in ordered:
            try:
                results.append((spec, run_row(spec, debug), None))
            except Exception as e:
                results.append((spec, None, e))

    for spec, row, error in results:
        if error is None:
            rows.append(row)
            continue
        partial = True
        logger.error(
            "Row failed",
            extra={"scheme": spec.scheme.scheme_id.value, "adversary": spec.adversary.kind.value, "error": str(error)},
        )
        rows.append(RowReport(
            scheme=spec.scheme.scheme_id.value,
            adversary=spec.adversary.kind.value,
            config=spec_config(spec),
            error=f"{type(error).__name__}: {error}",
        ))
    return Report(rows=rows, partial=partial)


_RECORD_FIELDS = frozenset(logging.LogRecord("", 0, "", 0, "", (), None).__dict__) | {"message", "asctime", "taskName"}


class ExtraFormatter(logging.Formatter):
    """Appends the fields passed through `extra=` as key=value pairs."""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        extras = {k: v for k, v in record.__dict__.items() if k not in _RECORD_FIELDS and not k.startswith("_")}
        if not extras:
            return line
        return line + " " + " ".join(f"{k}={v}" for k, v in extras.items())


def configure_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ExtraFormatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING), handlers=[handler])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings.from_env()
        configure_logging(args.log_level or settings.log_level)
        options = resolve_options(args, settings)
        if options.get("schemes") or options.get("adversaries"):
            specs = matrix_specs(options, build_matrix(options))
        else:
            if not options.get("scheme"):
                raise ConfigError("--scheme (or --schemes) is required")
            specs = [build_run_spec(options, options["scheme"], options.get("adversary") or AdversaryKind.NONE.value)]
    except ConfigError as e:
        print(f"qtag: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    report = run_matrix(specs, jobs=max(1, args.jobs), debug=bool(options.get("debug")))
    summary = report.summary_table()
    sys.stdout.write(summary)
    if args.report:
        write_text(args.report, report.to_json())
    if args.summary:
        write_text(args.summary, summary)
    if args.csv:
        write_text(args.csv, report.to_csv())
    return EXIT_PARTIAL if report.partial else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
