"""Core types for stratified metric temporal logic formulas.

Formulas are immutable trees compared structurally.  Derived operators
(``Or``, ``Implies``, ``Eventually``, ``Always``, ``Release``) are kept as
first-class nodes so they survive parsing and printing; ``desugar`` rewrites
them into the minimal core of atoms, ``true``, negation, conjunction,
``Until`` and ``Stratum``.

All time bounds are exact rationals.  Floats are rejected outright rather
than silently converted, because ``Fraction(0.1)`` is not one tenth.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Union

RationalLike = Union[int, str, Fraction]

_ATOM_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_STRATUM_SHAPED = re.compile(r"L[0-9]+\Z")
_RESERVED_NAMES = frozenset({"true", "false"})


class MissingResolution(LookupError):
    """A stratum level has no entry in the supplied resolution map."""


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce ``value`` to an exact ``Fraction``; reject binary floats."""
    if isinstance(value, bool):
        raise TypeError(f"expected a rational number, got {value!r}")
    if isinstance(value, float):
        raise TypeError(
            f"refusing float {value!r}: pass a string, int, or Fraction so the "
            "value stays exact"
        )
    return Fraction(value)


@dataclass(frozen=True)
class Interval:
    """A non-empty time interval with exact rational endpoints.

    ``upper=None`` means unbounded above, in which case the upper end is
    forced open.  Endpoints may each be open or closed independently.
    """

    lower: Fraction
    upper: Fraction | None
    lower_closed: bool = True
    upper_closed: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", as_fraction(self.lower))
        if self.upper is None:
            object.__setattr__(self, "upper_closed", False)
        else:
            object.__setattr__(self, "upper", as_fraction(self.upper))
        if self.lower < 0:
            raise ValueError(f"interval lower bound must be >= 0, got {self.lower}")
        if self.upper is not None:
            if self.upper < self.lower:
                raise ValueError(
                    f"empty interval: upper bound {self.upper} is below lower "
                    f"bound {self.lower}"
                )
            if self.upper == self.lower and not (self.lower_closed and self.upper_closed):
                raise ValueError(
                    f"empty interval: point interval at {self.lower} needs both "
                    "ends closed"
                )

    @classmethod
    def closed(cls, lower: RationalLike, upper: RationalLike) -> "Interval":
        return cls(as_fraction(lower), as_fraction(upper), True, True)

    @classmethod
    def unbounded(cls, lower: RationalLike = 0, lower_closed: bool = True) -> "Interval":
        return cls(as_fraction(lower), None, lower_closed, False)

    @property
    def bounded(self) -> bool:
        return self.upper is not None

    def contains(self, t: RationalLike) -> bool:
        """Exact membership test for a rational time offset."""
        t = as_fraction(t)
        if t < self.lower or (t == self.lower and not self.lower_closed):
            return False
        if self.upper is None:
            return True
        if t > self.upper or (t == self.upper and not self.upper_closed):
            return False
        return True


class Formula:
    """Base class for formula nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self) -> None:
        if not _ATOM_NAME.fullmatch(self.name):
            raise ValueError(f"invalid atom name {self.name!r}")
        # Names that the concrete syntax claims for itself cannot round-trip
        # through the printer, so they are rejected at construction.
        if self.name in _RESERVED_NAMES or _STRATUM_SHAPED.fullmatch(self.name):
            raise ValueError(f"atom name {self.name!r} is reserved by the syntax")


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    interval: Interval
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    interval: Interval
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    operand: Formula


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    operand: Formula


@dataclass(frozen=True)
class Stratum(Formula):
    """Binds the operand to abstraction level ``level`` (written ``Lk``)."""

    level: int
    operand: Formula

    def __post_init__(self) -> None:
        if not isinstance(self.level, int) or isinstance(self.level, bool) or self.level < 1:
            raise ValueError(f"stratum level must be an integer >= 1, got {self.level!r}")


def children(f: Formula) -> tuple[Formula, ...]:
    """Child nodes in canonical order (left before right, unary operand alone)."""
    if isinstance(f, (Atom, Const)):
        return ()
    if isinstance(f, Not):
        return (f.operand,)
    if isinstance(f, (And, Or, Implies, Until, Release)):
        return (f.left, f.right)
    if isinstance(f, (Eventually, Always)):
        return (f.operand,)
    if isinstance(f, Stratum):
        return (f.operand,)
    raise TypeError(f"not a formula node: {f!r}")


def walk(f: Formula) -> Iterator[Formula]:
    """Yield every node of ``f``, parent before children."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def node_at(f: Formula, path: tuple[int, ...]) -> Formula:
    """Resolve a child-index path (as reported by ``resolution_lint``)."""
    node = f
    for idx in path:
        kids = children(node)
        if not 0 <= idx < len(kids):
            raise IndexError(f"path {path!r} leaves the formula at {node!r}")
        node = kids[idx]
    return node


def depth(f: Formula) -> int:
    """Height of the formula tree; a lone atom has depth 1."""
    kids = children(f)
    if not kids:
        return 1
    return 1 + max(depth(c) for c in kids)


def desugar(f: Formula) -> Formula:
    """Rewrite into the core fragment: Atom, true, Not, And, Until, Stratum.

    The rewrite applies the usual identities (eventually as until of true,
    always and release by duality, implication and disjunction through
    negation) and is idempotent.
    """
    if isinstance(f, Atom):
        return f
    if isinstance(f, Const):
        return f if f.value else Not(Const(True))
    if isinstance(f, Not):
        return Not(desugar(f.operand))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return Not(And(desugar(f.left), Not(desugar(f.right))))
    if isinstance(f, Until):
        return Until(desugar(f.left), f.interval, desugar(f.right))
    if isinstance(f, Release):
        return Not(Until(Not(desugar(f.left)), f.interval, Not(desugar(f.right))))
    if isinstance(f, Eventually):
        return Until(Const(True), f.interval, desugar(f.operand))
    if isinstance(f, Always):
        return Not(Until(Const(True), f.interval, Not(desugar(f.operand))))
    if isinstance(f, Stratum):
        return Stratum(f.level, desugar(f.operand))
    raise TypeError(f"not a formula node: {f!r}")


def is_well_formed(f: Formula) -> bool:
    """Check the stratification nesting rule.

    A stratum nested anywhere inside another must not name a higher level
    than any enclosing stratum, i.e. levels may only stay equal or descend
    toward the leaves.
    """

    def ok(node: Formula, bound: int | None) -> bool:
        if isinstance(node, Stratum):
            if bound is not None and node.level > bound:
                return False
            return ok(node.operand, node.level)
        return all(ok(c, bound) for c in children(node))

    return ok(f, None)


def max_level(f: Formula) -> int:
    """Largest stratum level mentioned in ``f``; 0 when there is none."""
    best = 0
    for node in walk(f):
        if isinstance(node, Stratum) and node.level > best:
            best = node.level
    return best


@dataclass(frozen=True)
class LintWarning:
    """A bounded temporal window too short for its level's time resolution."""

    path: tuple[int, ...]
    level: int
    interval: Interval
    message: str


@dataclass(frozen=True)
class LintReport:
    warnings: tuple[LintWarning, ...]

    @property
    def ok(self) -> bool:
        return not self.warnings


def resolution_lint(
    f: Formula,
    resolutions: Mapping[int, RationalLike],
    base_level: int = 1,
) -> LintReport:
    """Flag finite temporal windows narrower than the active level's resolution.

    ``resolutions`` maps abstraction level to its minimum time step and must
    strictly increase with level.  Every stratum level appearing in ``f``
    (and ``base_level`` itself) must have an entry; a missing one raises
    ``MissingResolution``.  Warnings carry the node's child-index path so
    callers can point back into the formula.
    """
    res = {int(k): as_fraction(v) for k, v in resolutions.items()}
    ordered = sorted(res.items())
    for (k_lo, r_lo), (k_hi, r_hi) in zip(ordered, ordered[1:]):
        if r_lo >= r_hi:
            raise ValueError(
                f"resolutions must strictly increase with level: level {k_lo} has "
                f"{r_lo}, level {k_hi} has {r_hi}"
            )
    if base_level not in res:
        raise MissingResolution(base_level)

    warnings: list[LintWarning] = []

    def visit(node: Formula, path: tuple[int, ...], level: int) -> None:
        if isinstance(node, Stratum):
            if node.level not in res:
                raise MissingResolution(node.level)
            visit(node.operand, path + (0,), node.level)
            return
        interval = getattr(node, "interval", None)
        if interval is not None and interval.upper is not None and interval.upper < res[level]:
            warnings.append(
                LintWarning(
                    path=path,
                    level=level,
                    interval=interval,
                    message=(
                        f"window upper bound {interval.upper} is below the "
                        f"level-{level} resolution {res[level]}; nothing can "
                        "change that fast at this level"
                    ),
                )
            )
        for idx, child in enumerate(children(node)):
            visit(child, path + (idx,), level)

    visit(f, (), base_level)
    return LintReport(tuple(warnings))
