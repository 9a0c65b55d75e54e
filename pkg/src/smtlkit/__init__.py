"""Stratified metric temporal logic over multi-resolution traces.

The package layers a stratification operator on top of metric temporal
logic: ``L_k phi`` shifts evaluation to abstraction level ``k`` of a trace
whose levels share one timeline but coarsen in time resolution and state
detail.  Verdicts are three-valued, so a finite prefix can honestly answer
``Unknown`` when it is too short to decide.

Highlights:

* :mod:`smtlkit.formulas` - immutable syntax tree, well-formedness,
  resolution lint.
* :mod:`smtlkit.parser` - concrete syntax with exact rational constants.
* :mod:`smtlkit.traces` - timed and stratified traces, abstraction
  operators, JSON round-trip.
* :mod:`smtlkit.semantics` - the evaluator, a plain-MTL embedding, and a
  deliberately naive oracle for cross-checking.
* :mod:`smtlkit.gridworld` - a multi-agent benchmark in which a
  stratified safety monitor drives collision-free navigation.
* :mod:`smtlkit.cli` - the ``smtlkit`` command.
"""

from .formulas import (
    Always,
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Implies,
    Interval,
    LintReport,
    LintWarning,
    MissingResolution,
    Not,
    Or,
    Release,
    Stratum,
    Until,
    as_fraction,
    children,
    depth,
    desugar,
    is_well_formed,
    max_level,
    node_at,
    resolution_lint,
    walk,
)
from .parser import ParseError, SourceSpan, format_interval, format_rational, parse, pretty_print
from .semantics import (
    EvaluationError,
    InstanceTooLarge,
    NotMTL,
    PositionOutOfRange,
    SemanticsMode,
    UnknownLevel,
    Verdict,
    evaluate,
    evaluate_mtl,
    oracle_evaluate,
    translate_mtl,
)
from .traces import (
    Downsample,
    Hierarchy,
    Identity,
    LevelMismatch,
    Project,
    ResolutionViolation,
    SmoothIsolated,
    StratifiedTrace,
    TimedTrace,
    TraceFormatError,
    Violation,
    apply_abstraction,
    build_stratified,
    check_consistency,
    dumps_trace,
    lift,
    loads_trace,
    trace_from_json,
    trace_to_json,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # formulas
    "Formula",
    "Atom",
    "Const",
    "Not",
    "And",
    "Or",
    "Implies",
    "Until",
    "Release",
    "Eventually",
    "Always",
    "Stratum",
    "Interval",
    "as_fraction",
    "children",
    "walk",
    "node_at",
    "depth",
    "desugar",
    "is_well_formed",
    "max_level",
    "resolution_lint",
    "LintReport",
    "LintWarning",
    "MissingResolution",
    # parser
    "parse",
    "pretty_print",
    "format_rational",
    "format_interval",
    "ParseError",
    "SourceSpan",
    # semantics
    "Verdict",
    "SemanticsMode",
    "evaluate",
    "evaluate_mtl",
    "oracle_evaluate",
    "translate_mtl",
    "EvaluationError",
    "PositionOutOfRange",
    "UnknownLevel",
    "NotMTL",
    "InstanceTooLarge",
    # traces
    "TimedTrace",
    "StratifiedTrace",
    "Hierarchy",
    "Identity",
    "Project",
    "SmoothIsolated",
    "Downsample",
    "apply_abstraction",
    "build_stratified",
    "check_consistency",
    "lift",
    "validate",
    "Violation",
    "LevelMismatch",
    "ResolutionViolation",
    "TraceFormatError",
    "trace_to_json",
    "trace_from_json",
    "dumps_trace",
    "loads_trace",
]
