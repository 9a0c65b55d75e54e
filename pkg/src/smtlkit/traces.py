"""Timed traces, stratified traces, and the abstraction-operator library.

A ``TimedTrace`` is one sequence of proposition sets with strictly
increasing rational timestamps starting at 0.  A ``StratifiedTrace`` carries
one such state sequence per abstraction level over a shared timestamp axis,
plus a per-level temporal resolution.  ``StratifiedTrace`` deliberately does
not police its own invariants at construction time: ``validate`` reports
every violation (so malformed inputs can be diagnosed rather than merely
rejected), and loaders refuse traces that do not validate cleanly.

The JSON file format::

    {
      "timestamps": [0, "0.1", "1/3", ...],
      "resolutions": {"1": "0.05", "2": "0.1"},
      "levels": {"1": [["p", "q"], ...], "2": [...]},
      "hierarchy": [{"op": "smooth_isolated", "radius": "0.3"}]   # optional
    }

Numbers may be JSON numbers or strings; either way they are read exactly
(``"0.1"`` and ``0.1`` both become the rational 1/10, and ``"1/3"`` is
accepted).  When ``hierarchy`` is present, each level must reproduce from
the previous one under the declared operator.
"""
from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .formulas import RationalLike, as_fraction
from .parser import format_rational


class TraceFormatError(ValueError):
    """A trace file is structurally broken or fails validation."""


class ResolutionViolation(ValueError):
    """A constructed level changes state faster than its declared resolution."""


class LevelMismatch(ValueError):
    """A hierarchy's level count does not match the trace it describes."""


def _freeze_states(states: Iterable[Iterable[str]]) -> tuple[frozenset[str], ...]:
    return tuple(frozenset(s) for s in states)


@dataclass(frozen=True)
class TimedTrace:
    """A finite timed state sequence; timestamps start at 0 and increase."""

    timestamps: tuple[Fraction, ...]
    states: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamps", tuple(as_fraction(t) for t in self.timestamps))
        object.__setattr__(self, "states", _freeze_states(self.states))
        if not self.timestamps:
            raise ValueError("a trace needs at least one position")
        if len(self.timestamps) != len(self.states):
            raise ValueError(
                f"{len(self.timestamps)} timestamps but {len(self.states)} states"
            )
        if self.timestamps[0] != 0:
            raise ValueError(f"first timestamp must be 0, got {self.timestamps[0]}")
        for i in range(1, len(self.timestamps)):
            if self.timestamps[i] <= self.timestamps[i - 1]:
                raise ValueError(
                    f"timestamps must strictly increase; position {i} has "
                    f"{self.timestamps[i]} after {self.timestamps[i - 1]}"
                )

    def __len__(self) -> int:
        return len(self.timestamps)

    def prefix(self, length: int) -> "TimedTrace":
        return TimedTrace(self.timestamps[:length], self.states[:length])


@dataclass(frozen=True)
class StratifiedTrace:
    """Per-level state sequences over one timestamp axis.

    Construction only normalises the payload; call ``validate`` to check the
    invariants (aligned lengths, contiguous levels from 1, strictly
    increasing resolutions, and the per-level minimum spacing between state
    changes).
    """

    timestamps: tuple[Fraction, ...]
    levels: dict[int, tuple[frozenset[str], ...]]
    resolutions: dict[int, Fraction]

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamps", tuple(as_fraction(t) for t in self.timestamps))
        object.__setattr__(
            self,
            "levels",
            {int(k): _freeze_states(v) for k, v in self.levels.items()},
        )
        object.__setattr__(
            self,
            "resolutions",
            {int(k): as_fraction(v) for k, v in self.resolutions.items()},
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def state(self, level: int, position: int) -> frozenset[str]:
        return self.levels[level][position]

    def level_trace(self, level: int) -> TimedTrace:
        return TimedTrace(self.timestamps, self.levels[level])

    def prefix(self, length: int) -> "StratifiedTrace":
        return StratifiedTrace(
            self.timestamps[:length],
            {k: seq[:length] for k, seq in self.levels.items()},
            dict(self.resolutions),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # "timestamps", "levels", "alignment", "resolutions", "multi_rate"
    level: int | None
    position: int | None
    message: str


def validate(trace: StratifiedTrace) -> list[Violation]:
    """Return every invariant violation in ``trace`` (empty list if sound)."""
    out: list[Violation] = []
    ts = trace.timestamps
    if not ts:
        return [Violation("timestamps", None, None, "trace has no positions")]
    if ts[0] != 0:
        out.append(Violation("timestamps", None, 0, f"first timestamp is {ts[0]}, not 0"))
    for i in range(1, len(ts)):
        if ts[i] <= ts[i - 1]:
            out.append(
                Violation(
                    "timestamps",
                    None,
                    i,
                    f"timestamp {ts[i]} at position {i} does not increase past {ts[i - 1]}",
                )
            )

    levels = sorted(trace.levels)
    if not levels:
        out.append(Violation("levels", None, None, "trace has no levels"))
        return out
    if levels != list(range(1, len(levels) + 1)):
        out.append(
            Violation(
                "levels",
                None,
                None,
                f"levels must be contiguous from 1, got {levels}",
            )
        )
    for k in levels:
        if len(trace.levels[k]) != len(ts):
            out.append(
                Violation(
                    "alignment",
                    k,
                    None,
                    f"level {k} has {len(trace.levels[k])} states for {len(ts)} timestamps",
                )
            )

    for k in levels:
        if k not in trace.resolutions:
            out.append(Violation("resolutions", k, None, f"level {k} has no resolution"))
    present = sorted(k for k in levels if k in trace.resolutions)
    for lo, hi in zip(present, present[1:]):
        if trace.resolutions[lo] >= trace.resolutions[hi]:
            out.append(
                Violation(
                    "resolutions",
                    hi,
                    None,
                    f"resolution at level {hi} ({trace.resolutions[hi]}) must exceed "
                    f"level {lo} ({trace.resolutions[lo]})",
                )
            )
    for k in present:
        if trace.resolutions[k] <= 0:
            out.append(
                Violation("resolutions", k, None, f"resolution at level {k} must be positive")
            )

    # Multi-rate constraint: state changes at a level must be at least that
    # level's resolution apart (a state run shorter than the resolution is a
    # violation; holding a state indefinitely is always fine).
    for k in levels:
        seq = trace.levels[k]
        if len(seq) != len(ts) or k not in trace.resolutions:
            continue
        rho = trace.resolutions[k]
        change_start = 0
        for i in range(1, len(seq)):
            if seq[i] != seq[i - 1]:
                if ts[i] - ts[change_start] < rho:
                    out.append(
                        Violation(
                            "multi_rate",
                            k,
                            i,
                            f"level {k} changes state at t={ts[i]} only "
                            f"{ts[i] - ts[change_start]} after the previous change; "
                            f"resolution is {rho}",
                        )
                    )
                change_start = i
    return out


@dataclass(frozen=True)
class Identity:
    """Pass the state sequence through unchanged."""


@dataclass(frozen=True)
class Project:
    """Keep only the named propositions."""

    keep: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "keep", frozenset(self.keep))
        if not self.keep:
            raise ValueError("Project needs at least one proposition to keep")


@dataclass(frozen=True)
class SmoothIsolated:
    """Erase features narrower than ``radius``.

    A proposition survives at a position only if it also holds at every
    other position strictly within ``radius`` of it, so brief dropouts widen
    into definite gaps and brief spikes vanish.  With ``radius`` at or below
    the sampling step each window contains only its own position and the
    operator is the identity.
    """

    radius: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "radius", as_fraction(self.radius))
        if self.radius <= 0:
            raise ValueError("smoothing radius must be positive")


@dataclass(frozen=True)
class Downsample:
    """Sample at multiples of ``period`` and hold that value across the period.

    Output positions align with the input.  Each position takes the state
    sampled at the start of its containing period: with ``hold=True`` the
    sample is the input state still in effect at the period boundary (the
    latest position at or before it); with ``hold=False`` it is re-read at
    the boundary (the earliest position at or after it).  The two differ
    only when no input position falls exactly on the boundary.
    """

    period: Fraction
    hold: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "period", as_fraction(self.period))
        if self.period <= 0:
            raise ValueError("downsample period must be positive")


AbstractionOp = Identity | Project | SmoothIsolated | Downsample


def apply_abstraction(op: AbstractionOp, trace: TimedTrace) -> TimedTrace:
    """Apply one abstraction operator, preserving timestamps and length."""
    if isinstance(op, Identity):
        return trace
    if isinstance(op, Project):
        return TimedTrace(trace.timestamps, tuple(s & op.keep for s in trace.states))
    if isinstance(op, SmoothIsolated):
        ts = trace.timestamps
        out = []
        for n, here in enumerate(trace.states):
            lo = bisect_right(ts, ts[n] - op.radius)
            hi = bisect_left(ts, ts[n] + op.radius)
            window = trace.states[lo:hi]
            out.append(frozenset(p for p in here if all(p in s for s in window)))
        return TimedTrace(ts, tuple(out))
    if isinstance(op, Downsample):
        ts = trace.timestamps
        sampled: dict[int, frozenset[str]] = {}
        out = []
        for n, t in enumerate(ts):
            period_index = t // op.period  # floor for non-negative rationals
            if period_index not in sampled:
                boundary = period_index * op.period
                if op.hold:
                    src = bisect_right(ts, boundary) - 1
                else:
                    src = bisect_left(ts, boundary)
                sampled[period_index] = trace.states[src]
            out.append(sampled[period_index])
        return TimedTrace(ts, tuple(out))
    raise TypeError(f"not an abstraction operator: {op!r}")


@dataclass(frozen=True)
class Hierarchy:
    """K-level abstraction stack: ``ops[k-1]`` builds level k+1 from level k."""

    ops: tuple[AbstractionOp, ...]
    resolutions: dict[int, Fraction]

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(
            self,
            "resolutions",
            {int(k): as_fraction(v) for k, v in self.resolutions.items()},
        )
        expected = list(range(1, len(self.ops) + 2))
        if sorted(self.resolutions) != expected:
            raise ValueError(
                f"hierarchy with {len(self.ops)} operators needs resolutions for "
                f"levels {expected}, got {sorted(self.resolutions)}"
            )
        for lo, hi in zip(expected, expected[1:]):
            if self.resolutions[lo] >= self.resolutions[hi]:
                raise ValueError(
                    f"resolutions must strictly increase with level: level {lo} has "
                    f"{self.resolutions[lo]}, level {hi} has {self.resolutions[hi]}"
                )

    @property
    def level_count(self) -> int:
        return len(self.ops) + 1


def build_stratified(base: TimedTrace, hierarchy: Hierarchy) -> StratifiedTrace:
    """Build all levels from ``base`` by composing the hierarchy's operators.

    Level 1 is ``base`` itself; each operator produces the next level from
    the one below it.  Raises ``ResolutionViolation`` if any constructed
    level changes state faster than its declared resolution.
    """
    levels = {1: base.states}
    current = base
    for k, op in enumerate(hierarchy.ops, start=2):
        current = apply_abstraction(op, current)
        levels[k] = current.states
    trace = StratifiedTrace(base.timestamps, levels, dict(hierarchy.resolutions))
    rate_problems = [v for v in validate(trace) if v.kind == "multi_rate"]
    if rate_problems:
        raise ResolutionViolation("; ".join(v.message for v in rate_problems))
    return trace


def check_consistency(trace: StratifiedTrace, hierarchy: Hierarchy) -> bool:
    """Check that each level equals the abstraction of the level below it."""
    levels = sorted(trace.levels)
    if levels != list(range(1, hierarchy.level_count + 1)):
        raise LevelMismatch(
            f"hierarchy describes levels 1..{hierarchy.level_count}, trace has {levels}"
        )
    for k, op in enumerate(hierarchy.ops, start=1):
        below = TimedTrace(trace.timestamps, trace.levels[k])
        if apply_abstraction(op, below).states != trace.levels[k + 1]:
            return False
    return True


def lift(trace: TimedTrace, resolution: RationalLike | None = None) -> StratifiedTrace:
    """Wrap a single-level trace as a 1-level stratified trace.

    The default resolution is the smallest timestamp gap, which no state
    change can undercut.
    """
    if resolution is None:
        if len(trace) > 1:
            resolution = min(
                b - a for a, b in zip(trace.timestamps, trace.timestamps[1:])
            )
        else:
            resolution = Fraction(1)
    return StratifiedTrace(trace.timestamps, {1: trace.states}, {1: as_fraction(resolution)})


_OP_NAMES = {
    Identity: "identity",
    Project: "project",
    SmoothIsolated: "smooth_isolated",
    Downsample: "downsample",
}


def _rational_to_json(value: Fraction) -> int | str:
    if value.denominator == 1:
        return int(value)
    return format_rational(value)


def _op_to_json(op: AbstractionOp) -> dict:
    entry: dict = {"op": _OP_NAMES[type(op)]}
    if isinstance(op, Project):
        entry["keep"] = sorted(op.keep)
    elif isinstance(op, SmoothIsolated):
        entry["radius"] = _rational_to_json(op.radius)
    elif isinstance(op, Downsample):
        entry["period"] = _rational_to_json(op.period)
        entry["hold"] = op.hold
    return entry


def _op_from_json(entry: dict) -> AbstractionOp:
    if not isinstance(entry, dict) or "op" not in entry:
        raise TraceFormatError(f"bad hierarchy entry: {entry!r}")
    name = entry["op"]
    try:
        if name == "identity":
            return Identity()
        if name == "project":
            return Project(frozenset(entry["keep"]))
        if name == "smooth_isolated":
            return SmoothIsolated(as_fraction(entry["radius"]))
        if name == "downsample":
            return Downsample(as_fraction(entry["period"]), bool(entry.get("hold", True)))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"bad hierarchy entry {entry!r}: {exc}") from exc
    raise TraceFormatError(f"unknown abstraction operator {name!r}")


def trace_to_json(trace: StratifiedTrace, hierarchy: Hierarchy | None = None) -> dict:
    doc: dict = {
        "timestamps": [_rational_to_json(t) for t in trace.timestamps],
        "resolutions": {str(k): _rational_to_json(v) for k, v in sorted(trace.resolutions.items())},
        "levels": {str(k): [sorted(s) for s in seq] for k, seq in sorted(trace.levels.items())},
    }
    if hierarchy is not None:
        doc["hierarchy"] = [_op_to_json(op) for op in hierarchy.ops]
    return doc


def dumps_trace(trace: StratifiedTrace, hierarchy: Hierarchy | None = None) -> str:
    return json.dumps(trace_to_json(trace, hierarchy), indent=2) + "\n"


def trace_from_json(doc: dict) -> tuple[StratifiedTrace, Hierarchy | None]:
    """Build a trace (and optional hierarchy) from parsed JSON.

    The result is fully validated: any invariant violation, or a declared
    hierarchy the levels do not actually satisfy, raises ``TraceFormatError``.
    """
    if not isinstance(doc, dict):
        raise TraceFormatError("trace file must contain a JSON object")
    for key in ("timestamps", "resolutions", "levels"):
        if key not in doc:
            raise TraceFormatError(f"trace file is missing {key!r}")
    try:
        trace = StratifiedTrace(
            tuple(as_fraction(t) for t in doc["timestamps"]),
            {int(k): _freeze_states(v) for k, v in doc["levels"].items()},
            {int(k): as_fraction(v) for k, v in doc["resolutions"].items()},
        )
    except (AttributeError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed trace payload: {exc}") from exc
    problems = validate(trace)
    if problems:
        raise TraceFormatError(
            "invalid trace: " + "; ".join(v.message for v in problems)
        )
    hierarchy = None
    if doc.get("hierarchy") is not None:
        ops = tuple(_op_from_json(entry) for entry in doc["hierarchy"])
        try:
            hierarchy = Hierarchy(ops, dict(trace.resolutions))
        except ValueError as exc:
            raise TraceFormatError(str(exc)) from exc
        try:
            consistent = check_consistency(trace, hierarchy)
        except LevelMismatch as exc:
            raise TraceFormatError(str(exc)) from exc
        if not consistent:
            raise TraceFormatError(
                "trace levels are not consistent with the declared hierarchy"
            )
    return trace, hierarchy


def loads_trace(text: str) -> StratifiedTrace:
    """Parse a trace file's text; numbers are read exactly, never as floats."""
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"not valid JSON: {exc}") from exc
    trace, _ = trace_from_json(doc)
    return trace
