"""Command-line front end for the toolkit.

Six subcommands cover the workflow end to end: ``check`` parses a formula
and reports well-formedness plus optional resolution lint, ``eval`` runs a
formula against a trace file, ``translate`` embeds stratification-free
formulas into plain metric temporal logic, ``demo separating`` prints the
two-trace separation walkthrough, ``sim`` executes the gridworld experiment
matrix, and ``verify-trajectories`` replays recorded runs against the
no-collision safety property.

Exit codes are part of the interface and stay stable:

* 0 success (or property evaluated to True)
* 1 property evaluated to False (or formula rejected)
* 2 verdict Unknown on the given prefix
* 3 usage, parse, or input-format error
* 4 runtime failure inside a simulation
"""

from __future__ import annotations

import argparse
import csv
import enum
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import __version__
from .charts import ChartSeries, line_chart
from .demo import DEFAULT_RADIUS, DEFAULT_STEP, narrative, run_separating_demo
from .formulas import (
    Formula,
    MissingResolution,
    Stratum,
    as_fraction,
    children,
    is_well_formed,
    max_level,
    resolution_lint,
)
from .gridworld import (
    ExperimentResult,
    InvariantViolation,
    MetricSummary,
    Policy,
    RunMetrics,
    SUMMARY_METRICS,
    WorldGenerationFailed,
    aggregate,
    experiment,
    safety_formula,
    trajectory_to_trace,
)
from .parser import ParseError, parse, pretty_print
from .semantics import (
    NotMTL,
    PositionOutOfRange,
    SemanticsMode,
    UnknownLevel,
    Verdict,
    evaluate,
    evaluate_mtl,
    translate_mtl,
)
from .traces import StratifiedTrace, TraceFormatError, loads_trace


class ExitStatus(enum.IntEnum):
    """Process exit codes; scripts may rely on these never changing."""

    OK = 0
    PROPERTY_FALSE = 1
    UNKNOWN = 2
    USAGE = 3
    RUNTIME = 4


_VERDICT_STATUS = {
    Verdict.TRUE: ExitStatus.OK,
    Verdict.FALSE: ExitStatus.PROPERTY_FALSE,
    Verdict.UNKNOWN: ExitStatus.UNKNOWN,
}


class UsageError(Exception):
    """Bad arguments or unreadable/ill-formed input files."""


class _ArgumentParser(argparse.ArgumentParser):
    # argparse's default error() calls sys.exit(2); route through the
    # shared exit-code table instead.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _format_parse_error(path: str, text: str, exc: ParseError) -> str:
    """Point at the offending token with a caret line under the source."""
    lines = [f"{path}: {exc}"]
    source_lines = text.splitlines()
    if 1 <= exc.span.line <= len(source_lines):
        source = source_lines[exc.span.line - 1]
        width = max(1, exc.span.end_offset - exc.span.start_offset)
        width = min(width, max(1, len(source) - exc.span.column + 1))
        lines.append("  " + source)
        lines.append("  " + " " * (exc.span.column - 1) + "^" * width)
    return "\n".join(lines)


def _parse_formula_file(path: str) -> Formula:
    text = _read_text(path)
    try:
        return parse(text)
    except ParseError as exc:
        raise UsageError(_format_parse_error(path, text, exc)) from exc


def _parse_rational(raw: str, what: str) -> Fraction:
    try:
        return as_fraction(raw)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"invalid {what} {raw!r}: {exc}") from exc


# --- check ---------------------------------------------------------------


def _first_level_climb(f: Formula) -> Optional[tuple[int, int]]:
    """Return (inner, outer) levels of the first stratum that climbs upward."""

    def visit(node: Formula, bound: Optional[int]) -> Optional[tuple[int, int]]:
        if isinstance(node, Stratum):
            if bound is not None and node.level > bound:
                return node.level, bound
            return visit(node.operand, node.level)
        for child in children(node):
            hit = visit(child, bound)
            if hit is not None:
                return hit
        return None

    return visit(f, None)


def cmd_check(args: argparse.Namespace) -> ExitStatus:
    formula = _parse_formula_file(args.formula_file)
    if not is_well_formed(formula):
        climb = _first_level_climb(formula)
        detail = (
            f"L{climb[0]} appears inside L{climb[1]}, but nested levels must "
            f"not increase inward"
            if climb
            else "nested stratification levels must not increase inward"
        )
        print(f"not well-formed: {detail}")
        return ExitStatus.PROPERTY_FALSE
    print(f"well-formed (levels up to L{max_level(formula)})")
    if args.resolutions is not None:
        try:
            doc = json.loads(args.resolutions, parse_float=Fraction)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--resolutions is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("--resolutions must be a JSON object of level: step")
        try:
            resolutions = {int(k): as_fraction(v) for k, v in doc.items()}
            report = resolution_lint(formula, resolutions, base_level=args.base_level)
        except MissingResolution as exc:
            raise UsageError(f"no resolution given for level {exc.args[0]}") from exc
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad resolution map: {exc}") from exc
        for warning in report.warnings:
            print(f"warning: level {warning.level}: {warning.message}")
        if report.ok:
            print("no resolution warnings")
    return ExitStatus.OK


# --- eval ----------------------------------------------------------------


def cmd_eval(args: argparse.Namespace) -> ExitStatus:
    formula = _parse_formula_file(args.formula_file)
    try:
        trace = loads_trace(_read_text(args.trace_file))
    except TraceFormatError as exc:
        raise UsageError(f"{args.trace_file}: {exc}") from exc
    mode = SemanticsMode.SCOPED if args.mode == "scoped" else SemanticsMode.STRICT
    try:
        verdict = evaluate(
            formula, trace, position=args.position, level=args.level, mode=mode
        )
    except (PositionOutOfRange, UnknownLevel) as exc:
        raise UsageError(str(exc)) from exc
    print(verdict)
    return _VERDICT_STATUS[verdict]


# --- translate -----------------------------------------------------------


def cmd_translate(args: argparse.Namespace) -> ExitStatus:
    formula = _parse_formula_file(args.formula_file)
    try:
        embedded = translate_mtl(formula)
    except NotMTL as exc:
        print(f"NotMTL: {exc}")
        return ExitStatus.PROPERTY_FALSE
    print(pretty_print(embedded))
    return ExitStatus.OK


# --- demo ----------------------------------------------------------------


def cmd_demo_separating(args: argparse.Namespace) -> ExitStatus:
    radius = (
        _parse_rational(args.radius, "radius")
        if args.radius is not None
        else DEFAULT_RADIUS
    )
    step = (
        _parse_rational(args.step, "step") if args.step is not None else DEFAULT_STEP
    )
    if radius <= 0 or step <= 0:
        raise UsageError("radius and step must be positive")
    result = run_separating_demo(radius=radius, step=step)
    for line in narrative(result):
        print(line)
    return ExitStatus.OK


# --- sim -----------------------------------------------------------------

_SIM_KEYS = {
    "sizes",
    "seeds_per_size",
    "base_seed",
    "obstacle_density",
    "replan_patience",
    "max_steps",
    "agent_count",
    "policies",
    "trajectories",
}

_POLICY_NAMES = {"mtl": Policy.MTL, "smtl": Policy.SMTL}

CSV_HEADER = (
    "size",
    "policy",
    "seed",
    "collision_rate",
    "avg_path_length",
    "path_efficiency",
    "avg_waits",
    "mean_compute_ms",
    "unfinished",
)

# The summary CSV reports compute time in milliseconds like the per-run one.
_SUMMARY_COLUMNS = tuple(
    name if name != "mean_compute_per_step" else "mean_compute_ms"
    for name in SUMMARY_METRICS
)

SUMMARY_HEADER = ("size", "policy", "runs") + tuple(
    f"{column}_{stat}" for column in _SUMMARY_COLUMNS for stat in ("mean", "std")
)

# (file stem, chart title, y-axis label, per-run value)
_CHART_SPECS: tuple[tuple[str, str, str, Callable[[RunMetrics], float]], ...] = (
    (
        "collision_rate",
        "Collisions per agent",
        "collisions / agent",
        lambda m: float(m.collision_rate),
    ),
    (
        "avg_path_length",
        "Average path length",
        "steps (incl. waits)",
        lambda m: float(m.avg_path_length),
    ),
    (
        "path_efficiency",
        "Path efficiency",
        "shortest / taken",
        lambda m: float(m.path_efficiency),
    ),
    (
        "avg_waits",
        "Average waits per agent",
        "waits / agent",
        lambda m: float(m.avg_waits),
    ),
    (
        "compute_time",
        "Mean compute per step",
        "milliseconds",
        lambda m: m.mean_compute_per_step * 1000.0,
    ),
)


def _load_sim_config(path: str) -> dict:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - _SIM_KEYS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
    for key in ("sizes", "seeds_per_size"):
        if key not in doc:
            raise UsageError(f"{path}: config is missing {key!r}")
    sizes = doc["sizes"]
    if (
        not isinstance(sizes, list)
        or not sizes
        or not all(isinstance(s, int) and s >= 2 for s in sizes)
    ):
        raise UsageError(f"{path}: sizes must be a non-empty list of integers >= 2")
    if not isinstance(doc["seeds_per_size"], int) or doc["seeds_per_size"] < 1:
        raise UsageError(f"{path}: seeds_per_size must be a positive integer")
    policies = doc.get("policies", ["mtl", "smtl"])
    if (
        not isinstance(policies, list)
        or not policies
        or not all(p in _POLICY_NAMES for p in policies)
    ):
        raise UsageError(f"{path}: policies must be a non-empty list drawn from mtl, smtl")
    return doc


def _metric_row(result: ExperimentResult) -> tuple:
    cell = result.cell
    assert result.output is not None
    m = result.output.metrics
    return (
        cell.grid_size,
        str(cell.policy),
        cell.seed,
        repr(float(m.collision_rate)),
        repr(float(m.avg_path_length)),
        repr(float(m.path_efficiency)),
        repr(float(m.avg_waits)),
        repr(m.mean_compute_per_step * 1000.0),
        m.unfinished,
    )


def _write_metrics_csv(path: Path, results: Sequence[ExperimentResult]) -> int:
    rows = [_metric_row(r) for r in results if r.output is not None]
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return len(rows)


def _summary_row(summary: MetricSummary) -> tuple:
    row = [summary.grid_size, str(summary.policy), summary.runs]
    for name in SUMMARY_METRICS:
        scale = 1000.0 if name == "mean_compute_per_step" else 1.0
        row.append(repr(float(summary.mean[name]) * scale))
        row.append(repr(summary.std[name] * scale))
    return tuple(row)


def _write_summary_csv(path: Path, results: Sequence[ExperimentResult]) -> int:
    summaries = aggregate(results)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(_summary_row(s) for s in summaries)
    return len(summaries)


def _write_trajectories(directory: Path, results: Sequence[ExperimentResult]) -> int:
    directory.mkdir(parents=True, exist_ok=True)
    written = 0
    for result in results:
        output = result.output
        if output is None or output.records is None:
            continue
        cell = result.cell
        stem = f"run_{cell.grid_size:03d}_{cell.policy}_{cell.index:02d}"
        log_path = directory / f"{stem}.jsonl"
        with log_path.open("w", encoding="utf-8") as handle:
            for record in output.records:
                handle.write(json.dumps(record, separators=(",", ":")) + "\n")
        meta = {
            "grid_size": cell.grid_size,
            "policy": str(cell.policy),
            "seed": cell.seed,
            "index": cell.index,
            "agent_count": output.metrics.agent_count,
            "starts": [list(c) for c in output.starts],
            "goals": [list(c) for c in output.goals],
        }
        (directory / f"{stem}.meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", encoding="utf-8"
        )
        written += 1
    return written


def _write_charts(
    directory: Path, results: Sequence[ExperimentResult], sizes: Sequence[int]
) -> list[str]:
    by_cell: dict[tuple[int, Policy], list[RunMetrics]] = {}
    for result in results:
        if result.output is not None:
            key = (result.cell.grid_size, result.cell.policy)
            by_cell.setdefault(key, []).append(result.output.metrics)
    written = []
    for stem, title, y_label, value in _CHART_SPECS:
        series = []
        for policy in (Policy.MTL, Policy.SMTL):
            points = []
            for size in sizes:
                runs = by_cell.get((size, policy))
                if runs:
                    points.append((size, sum(value(m) for m in runs) / len(runs)))
            if points:
                series.append(ChartSeries(label=str(policy), points=tuple(points)))
        if not series:
            continue
        svg = line_chart(series, title=title, x_label="grid size", y_label=y_label)
        (directory / f"{stem}.svg").write_text(svg, encoding="utf-8")
        written.append(f"{stem}.svg")
    return written


def cmd_sim(args: argparse.Namespace) -> ExitStatus:
    doc = _load_sim_config(args.config_file)
    sizes = list(doc["sizes"])
    record = bool(args.trajectories or doc.get("trajectories", False))
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        results = experiment(
            sizes=sizes,
            seeds_per_size=doc["seeds_per_size"],
            base_seed=doc.get("base_seed", 0),
            policies=[_POLICY_NAMES[p] for p in doc.get("policies", ["mtl", "smtl"])],
            obstacle_density=doc.get("obstacle_density", 0.10),
            replan_patience=doc.get("replan_patience", 3),
            max_steps=doc.get("max_steps"),
            agent_count=doc.get("agent_count"),
            record_trajectories=record,
            jobs=jobs,
        )
    except ValueError as exc:
        raise UsageError(f"{args.config_file}: {exc}") from exc
    rows = _write_metrics_csv(out_dir / "metrics.csv", results)
    print(f"wrote {out_dir / 'metrics.csv'} ({rows} rows)")
    groups = _write_summary_csv(out_dir / "summary.csv", results)
    print(f"wrote {out_dir / 'summary.csv'} ({groups} groups)")
    for name in _write_charts(out_dir, results, sizes):
        print(f"wrote {out_dir / name}")
    if record:
        logs = _write_trajectories(out_dir / "trajectories", results)
        print(f"wrote {logs} trajectory logs under {out_dir / 'trajectories'}")
    failures = [r for r in results if r.error is not None]
    for failure in failures:
        cell = failure.cell
        print(
            f"error: size={cell.grid_size} policy={cell.policy} "
            f"seed={cell.seed}: {failure.error}",
            file=sys.stderr,
        )
    return ExitStatus.RUNTIME if failures else ExitStatus.OK


# --- verify-trajectories --------------------------------------------------


def _log_policy(path: Path) -> Optional[str]:
    """Resolve a log's policy from its sidecar metadata, else its filename."""
    meta_path = path.with_suffix(".meta.json")
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            policy = meta.get("policy")
            if policy in _POLICY_NAMES:
                return policy
        except (OSError, json.JSONDecodeError):
            pass
    tokens = path.stem.split("_")
    for name in _POLICY_NAMES:
        if name in tokens:
            return name
    return None


def _load_records(path: Path) -> list[dict]:
    records = []
    for lineno, line in enumerate(
        path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(record, dict) or "t" not in record or "positions" not in record:
            raise UsageError(f"{path}:{lineno}: record needs 't' and 'positions'")
        records.append(record)
    if not records:
        raise UsageError(f"{path}: empty trajectory log")
    return records


def _first_collision(
    trace: StratifiedTrace, horizon: Fraction
) -> Optional[tuple[Fraction, list[str]]]:
    for timestamp, atoms in zip(trace.timestamps, trace.levels[1]):
        if timestamp > horizon:
            break
        clashes = sorted(a for a in atoms if a.startswith("collide_"))
        if clashes:
            return timestamp, clashes
    return None


def cmd_verify_trajectories(args: argparse.Namespace) -> ExitStatus:
    log_dir = Path(args.log_dir)
    if not log_dir.is_dir():
        raise UsageError(f"{args.log_dir} is not a directory")
    logs = []
    for path in sorted(log_dir.rglob("*.jsonl")):
        policy = _log_policy(path)
        if args.policy == "all" or policy == args.policy:
            logs.append(path)
    if not logs:
        raise UsageError(
            f"no trajectory logs matching policy {args.policy!r} under {log_dir}"
        )
    horizon_override = (
        _parse_rational(args.horizon, "horizon") if args.horizon is not None else None
    )
    violated = []
    unknown = []
    for path in logs:
        records = _load_records(path)
        agent_count = len(records[0]["positions"])
        trace = trajectory_to_trace(records)
        timed = trace.level_trace(1)
        horizon = (
            horizon_override if horizon_override is not None else timed.timestamps[-1]
        )
        verdict = evaluate_mtl(safety_formula(agent_count, horizon), timed)
        name = path.relative_to(log_dir)
        if verdict is Verdict.TRUE:
            print(f"{name}: ok (no collisions through t={horizon})")
        elif verdict is Verdict.FALSE:
            hit = _first_collision(trace, horizon)
            detail = f" at t={hit[0]}: {', '.join(hit[1])}" if hit else ""
            print(f"{name}: VIOLATED{detail}")
            violated.append(name)
        else:
            print(
                f"{name}: unknown (log ends at t={timed.timestamps[-1]}, "
                f"horizon {horizon} not covered)"
            )
            unknown.append(name)
    total = len(logs)
    if violated:
        print(f"{len(violated)} of {total} runs violated the safety property")
        return ExitStatus.PROPERTY_FALSE
    if unknown:
        print(f"{len(unknown)} of {total} runs were inconclusive")
        return ExitStatus.UNKNOWN
    print(f"all {total} runs satisfied the safety property")
    return ExitStatus.OK


# --- wiring ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="smtlkit",
        description="Stratified metric temporal logic: check, evaluate, simulate.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser(
        "check", help="parse a formula and report well-formedness"
    )
    check.add_argument("formula_file")
    check.add_argument(
        "--resolutions",
        help='JSON object mapping level to time step, e.g. \'{"1": "0.1", "2": 1}\'',
    )
    check.add_argument("--base-level", type=int, default=1)
    check.set_defaults(handler=cmd_check)

    evaluate_cmd = commands.add_parser(
        "eval", help="evaluate a formula on a trace file"
    )
    evaluate_cmd.add_argument("formula_file")
    evaluate_cmd.add_argument("trace_file")
    evaluate_cmd.add_argument("--level", type=int, default=1)
    evaluate_cmd.add_argument("--position", type=int, default=0)
    evaluate_cmd.add_argument(
        "--mode", choices=("strict", "scoped"), default="strict"
    )
    evaluate_cmd.set_defaults(handler=cmd_eval)

    translate = commands.add_parser(
        "translate", help="embed a stratification-free formula into plain MTL"
    )
    translate.add_argument("formula_file")
    translate.set_defaults(handler=cmd_translate)

    demo = commands.add_parser("demo", help="built-in demonstrations")
    examples = demo.add_subparsers(dest="example", required=True)
    separating = examples.add_parser(
        "separating", help="two traces one formula tells apart"
    )
    separating.add_argument("--radius", help="smoothing radius (exact rational)")
    separating.add_argument("--step", help="sampling step (exact rational)")
    separating.set_defaults(handler=cmd_demo_separating)

    sim = commands.add_parser("sim", help="run the gridworld experiment matrix")
    sim.add_argument("config_file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument(
        "--trajectories", action="store_true", help="also write per-run JSONL logs"
    )
    sim.add_argument(
        "--jobs", type=int, default=None, help="worker processes (default: all cores)"
    )
    sim.set_defaults(handler=cmd_sim)

    verify = commands.add_parser(
        "verify-trajectories", help="check recorded runs against the safety property"
    )
    verify.add_argument("log_dir")
    verify.add_argument(
        "--horizon", help="override the safety window's upper bound (exact rational)"
    )
    verify.add_argument(
        "--policy", choices=("smtl", "mtl", "all"), default="smtl",
        help="which runs to verify (default: smtl)",
    )
    verify.set_defaults(handler=cmd_verify_trajectories)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return int(ExitStatus.USAGE)
    except SystemExit as exc:  # argparse exits directly for --help/--version
        return int(exc.code or 0)
    try:
        return int(args.handler(args))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return int(ExitStatus.USAGE)
    except (WorldGenerationFailed, InvariantViolation) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return int(ExitStatus.RUNTIME)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary for exit code 4
        print(f"unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return int(ExitStatus.RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
