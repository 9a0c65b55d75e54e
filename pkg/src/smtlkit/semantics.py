"""Three-valued evaluation of formulas over finite traces.

Verdicts are ``True``, ``False``, or ``Unknown``; ``Unknown`` arises only
when the trace ends before the formula's fate is settled.  ``Until`` is
satisfied at a position if some later in-window position satisfies the right
operand with the left operand holding everywhere strictly before it; it is
refuted only when no continuation of the trace could still produce such a
witness.  Anything else is ``Unknown``, and extending a trace can therefore
refine ``Unknown`` but never flip ``True`` and ``False``.

A stratum node switches evaluation to its named level.  In ``STRICT`` mode
it additionally requires the named level to be at least the level currently
in force, and evaluates to ``False`` outright when it is not; ``SCOPED``
mode drops that side condition and only switches levels.

Three evaluators live here on purpose:

* ``evaluate``      - the production path: desugars to the core fragment,
                      memoises, and short-circuits;
* ``evaluate_mtl``  - stratum-free evaluation over a plain ``TimedTrace``,
                      written directly against the derived operators;
* ``oracle_evaluate`` - a deliberately naive recursion with no sharing,
                      memoisation, or pruning, kept structurally apart from
                      ``evaluate`` so the two can cross-check each other.

Do not "deduplicate" them; their independence is what makes agreement
between them evidence.
"""
from __future__ import annotations

from enum import Enum
from fractions import Fraction

from .formulas import (
    Always,
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Implies,
    Interval,
    Not,
    Or,
    Release,
    Stratum,
    Until,
    depth,
    desugar,
    walk,
)
from .traces import StratifiedTrace, TimedTrace


class Verdict(Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value

    @staticmethod
    def from_bool(b: bool) -> "Verdict":
        return Verdict.TRUE if b else Verdict.FALSE

    def __invert__(self) -> "Verdict":
        if self is Verdict.TRUE:
            return Verdict.FALSE
        if self is Verdict.FALSE:
            return Verdict.TRUE
        return Verdict.UNKNOWN

    def __and__(self, other: "Verdict") -> "Verdict":
        if self is Verdict.FALSE or other is Verdict.FALSE:
            return Verdict.FALSE
        if self is Verdict.TRUE and other is Verdict.TRUE:
            return Verdict.TRUE
        return Verdict.UNKNOWN

    def __or__(self, other: "Verdict") -> "Verdict":
        if self is Verdict.TRUE or other is Verdict.TRUE:
            return Verdict.TRUE
        if self is Verdict.FALSE and other is Verdict.FALSE:
            return Verdict.FALSE
        return Verdict.UNKNOWN


class SemanticsMode(Enum):
    STRICT = "strict"
    SCOPED = "scoped"


class EvaluationError(Exception):
    pass


class PositionOutOfRange(EvaluationError):
    pass


class UnknownLevel(EvaluationError):
    pass


class NotMTL(EvaluationError):
    """The formula contains a stratum operator where pure MTL was required."""


class InstanceTooLarge(EvaluationError):
    """The naive oracle only accepts small instances (trace <= 32, depth <= 6)."""


def _beyond_upper(d: Fraction, interval: Interval) -> bool:
    """True when offset ``d`` (and everything later) lies past the window."""
    if interval.upper is None:
        return False
    return d > interval.upper or (d == interval.upper and not interval.upper_closed)


def _future_can_enter_window(interval: Interval, last_offset: Fraction) -> bool:
    """Could a continuation add positions inside the window?

    New positions carry offsets strictly beyond ``last_offset``, so the
    window is out of reach exactly when its upper bound is finite and
    already at or behind the last observed offset (openness does not matter:
    rationals are dense).
    """
    return interval.upper is None or last_offset < interval.upper


class _Evaluator:
    """One production-evaluation run: core fragment only, memoised by node id."""

    def __init__(self, trace: StratifiedTrace, mode: SemanticsMode):
        self.trace = trace
        self.mode = mode
        self.memo: dict[tuple[int, int, int], Verdict] = {}

    def eval(self, node: Formula, i: int, level: int) -> Verdict:
        key = (id(node), i, level)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if isinstance(node, Atom):
            v = Verdict.from_bool(node.name in self.trace.levels[level][i])
        elif isinstance(node, Const):
            v = Verdict.from_bool(node.value)
        elif isinstance(node, Not):
            v = ~self.eval(node.operand, i, level)
        elif isinstance(node, And):
            left = self.eval(node.left, i, level)
            v = Verdict.FALSE if left is Verdict.FALSE else left & self.eval(node.right, i, level)
        elif isinstance(node, Until):
            v = self._until(node, i, level)
        elif isinstance(node, Stratum):
            if self.mode is SemanticsMode.STRICT and node.level < level:
                v = Verdict.FALSE
            else:
                v = self.eval(node.operand, i, node.level)
        else:
            raise AssertionError(f"non-core node after desugaring: {node!r}")
        self.memo[key] = v
        return v

    def _until(self, node: Until, i: int, level: int) -> Verdict:
        ts = self.trace.timestamps
        origin = ts[i]
        interval = node.interval
        result = Verdict.FALSE
        chain = Verdict.TRUE  # left operand over [i, j), three-valued
        for j in range(i, len(ts)):
            offset = ts[j] - origin
            if _beyond_upper(offset, interval):
                return result  # positions from j on (and any extension) are past the window
            if interval.contains(offset):
                result = result | (chain & self.eval(node.right, j, level))
                if result is Verdict.TRUE:
                    return result
            chain = chain & self.eval(node.left, j, level)
            if chain is Verdict.FALSE:
                return result  # no later witness can satisfy the left chain
        if _future_can_enter_window(interval, ts[-1] - origin):
            result = result | (chain & Verdict.UNKNOWN)
        return result


def evaluate(
    f: Formula,
    trace: StratifiedTrace,
    position: int = 0,
    level: int = 1,
    mode: SemanticsMode = SemanticsMode.STRICT,
) -> Verdict:
    """Evaluate ``f`` on ``trace`` at ``position``, starting at ``level``."""
    if not 0 <= position < len(trace):
        raise PositionOutOfRange(
            f"position {position} outside trace of length {len(trace)}"
        )
    if level not in trace.levels:
        raise UnknownLevel(f"trace has no level {level}")
    missing = sorted(
        {n.level for n in walk(f) if isinstance(n, Stratum)} - set(trace.levels)
    )
    if missing:
        raise UnknownLevel(f"formula names levels absent from the trace: {missing}")
    core = desugar(f)
    return _Evaluator(trace, mode).eval(core, position, level)


def translate_mtl(f: Formula) -> Formula:
    """Embed a pure-MTL formula (the embedding is the identity on its syntax)."""
    for node in walk(f):
        if isinstance(node, Stratum):
            raise NotMTL(f"formula contains stratification operator L{node.level}")
    return f


def evaluate_mtl(f: Formula, trace: TimedTrace, position: int = 0) -> Verdict:
    """Evaluate a pure-MTL formula over a single-level trace.

    Same three-valued semantics as ``evaluate`` minus strata, implemented
    directly against the derived operators rather than by desugaring.
    """
    if not 0 <= position < len(trace):
        raise PositionOutOfRange(
            f"position {position} outside trace of length {len(trace)}"
        )
    return _mtl_eval(f, trace, position)


def _mtl_window(trace: TimedTrace, i: int, interval: Interval) -> tuple[list[int], bool]:
    """In-window positions from ``i`` and whether an extension could add more."""
    origin = trace.timestamps[i]
    inside = []
    for j in range(i, len(trace)):
        offset = trace.timestamps[j] - origin
        if _beyond_upper(offset, interval):
            return inside, False
        if interval.contains(offset):
            inside.append(j)
    return inside, _future_can_enter_window(interval, trace.timestamps[-1] - origin)


def _mtl_eval(node: Formula, trace: TimedTrace, i: int) -> Verdict:
    if isinstance(node, Atom):
        return Verdict.from_bool(node.name in trace.states[i])
    if isinstance(node, Const):
        return Verdict.from_bool(node.value)
    if isinstance(node, Not):
        return ~_mtl_eval(node.operand, trace, i)
    if isinstance(node, And):
        return _mtl_eval(node.left, trace, i) & _mtl_eval(node.right, trace, i)
    if isinstance(node, Or):
        return _mtl_eval(node.left, trace, i) | _mtl_eval(node.right, trace, i)
    if isinstance(node, Implies):
        return ~_mtl_eval(node.left, trace, i) | _mtl_eval(node.right, trace, i)
    if isinstance(node, Eventually):
        inside, open_ended = _mtl_window(trace, i, node.interval)
        verdict = Verdict.UNKNOWN if open_ended else Verdict.FALSE
        for j in inside:
            verdict = verdict | _mtl_eval(node.operand, trace, j)
        return verdict
    if isinstance(node, Always):
        inside, open_ended = _mtl_window(trace, i, node.interval)
        verdict = Verdict.UNKNOWN if open_ended else Verdict.TRUE
        for j in inside:
            verdict = verdict & _mtl_eval(node.operand, trace, j)
        return verdict
    if isinstance(node, Until):
        inside, open_ended = _mtl_window(trace, i, node.interval)
        verdict = Verdict.FALSE
        chain = Verdict.TRUE
        k = i
        for j in inside:
            while k < j:
                chain = chain & _mtl_eval(node.left, trace, k)
                k += 1
            if chain is Verdict.FALSE:
                return verdict
            verdict = verdict | (chain & _mtl_eval(node.right, trace, j))
            if verdict is Verdict.TRUE:
                return verdict
        if open_ended:
            while k < len(trace):
                chain = chain & _mtl_eval(node.left, trace, k)
                k += 1
            verdict = verdict | (chain & Verdict.UNKNOWN)
        return verdict
    if isinstance(node, Release):
        inside, open_ended = _mtl_window(trace, i, node.interval)
        verdict = Verdict.TRUE
        released = Verdict.FALSE  # left operand seen anywhere in [i, j)
        k = i
        for j in inside:
            while k < j:
                released = released | _mtl_eval(node.left, trace, k)
                k += 1
            verdict = verdict & (released | _mtl_eval(node.right, trace, j))
            if verdict is Verdict.FALSE:
                return verdict
        if open_ended:
            while k < len(trace):
                released = released | _mtl_eval(node.left, trace, k)
                k += 1
            verdict = verdict & (released | Verdict.UNKNOWN)
        return verdict
    if isinstance(node, Stratum):
        raise NotMTL(f"formula contains stratification operator L{node.level}")
    raise TypeError(f"not a formula node: {node!r}")


_ORACLE_MAX_POSITIONS = 32
_ORACLE_MAX_DEPTH = 6


def oracle_evaluate(
    f: Formula,
    trace: StratifiedTrace,
    position: int = 0,
    level: int = 1,
    mode: SemanticsMode = SemanticsMode.STRICT,
) -> Verdict:
    """Reference evaluator: naive recursive expansion, no sharing or pruning.

    Usable only on small instances; raises ``InstanceTooLarge`` beyond 32
    trace positions or formula depth 6.
    """
    if len(trace) > _ORACLE_MAX_POSITIONS:
        raise InstanceTooLarge(f"oracle accepts at most {_ORACLE_MAX_POSITIONS} positions")
    if depth(f) > _ORACLE_MAX_DEPTH:
        raise InstanceTooLarge(f"oracle accepts formula depth at most {_ORACLE_MAX_DEPTH}")
    if not 0 <= position < len(trace):
        raise PositionOutOfRange(
            f"position {position} outside trace of length {len(trace)}"
        )
    if level not in trace.levels:
        raise UnknownLevel(f"trace has no level {level}")
    missing = sorted(
        {n.level for n in walk(f) if isinstance(n, Stratum)} - set(trace.levels)
    )
    if missing:
        raise UnknownLevel(f"formula names levels absent from the trace: {missing}")
    return _oracle(f, trace, position, level, mode)


def _oracle_window(trace: StratifiedTrace, i: int, interval: Interval) -> tuple[list[int], bool]:
    origin = trace.timestamps[i]
    inside = [
        j
        for j in range(i, len(trace))
        if interval.contains(trace.timestamps[j] - origin)
    ]
    future = _future_can_enter_window(interval, trace.timestamps[-1] - origin)
    return inside, future


def _oracle(node: Formula, trace: StratifiedTrace, i: int, level: int, mode: SemanticsMode) -> Verdict:
    if isinstance(node, Atom):
        return Verdict.from_bool(node.name in trace.levels[level][i])
    if isinstance(node, Const):
        return Verdict.from_bool(node.value)
    if isinstance(node, Not):
        return ~_oracle(node.operand, trace, i, level, mode)
    if isinstance(node, And):
        return _oracle(node.left, trace, i, level, mode) & _oracle(node.right, trace, i, level, mode)
    if isinstance(node, Or):
        return _oracle(node.left, trace, i, level, mode) | _oracle(node.right, trace, i, level, mode)
    if isinstance(node, Implies):
        return ~_oracle(node.left, trace, i, level, mode) | _oracle(
            node.right, trace, i, level, mode
        )
    if isinstance(node, Eventually):
        inside, future = _oracle_window(trace, i, node.interval)
        verdicts = [_oracle(node.operand, trace, j, level, mode) for j in inside]
        if future:
            verdicts.append(Verdict.UNKNOWN)
        out = Verdict.FALSE
        for v in verdicts:
            out = out | v
        return out
    if isinstance(node, Always):
        inside, future = _oracle_window(trace, i, node.interval)
        verdicts = [_oracle(node.operand, trace, j, level, mode) for j in inside]
        if future:
            verdicts.append(Verdict.UNKNOWN)
        out = Verdict.TRUE
        for v in verdicts:
            out = out & v
        return out
    if isinstance(node, Until):
        inside, future = _oracle_window(trace, i, node.interval)
        out = Verdict.FALSE
        for j in inside:
            witness = _oracle(node.right, trace, j, level, mode)
            for k in range(i, j):
                witness = witness & _oracle(node.left, trace, k, level, mode)
            out = out | witness
        if future:
            witness = Verdict.UNKNOWN
            for k in range(i, len(trace)):
                witness = witness & _oracle(node.left, trace, k, level, mode)
            out = out | witness
        return out
    if isinstance(node, Release):
        inside, future = _oracle_window(trace, i, node.interval)
        out = Verdict.TRUE
        for j in inside:
            clause = _oracle(node.right, trace, j, level, mode)
            for k in range(i, j):
                clause = clause | _oracle(node.left, trace, k, level, mode)
            out = out & clause
        if future:
            clause = Verdict.UNKNOWN
            for k in range(i, len(trace)):
                clause = clause | _oracle(node.left, trace, k, level, mode)
            out = out & clause
        return out
    if isinstance(node, Stratum):
        if mode is SemanticsMode.STRICT and node.level < level:
            return Verdict.FALSE
        return _oracle(node.operand, trace, i, node.level, mode)
    raise TypeError(f"not a formula node: {node!r}")
