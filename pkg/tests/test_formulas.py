"""Syntax-tree level tests: intervals, node utilities, desugaring, lint."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from smtlkit.formulas import (
    Always,
    And,
    Atom,
    Const,
    Eventually,
    Implies,
    Interval,
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
from strategies import formulas, intervals, rationals

P, Q, R = Atom("p"), Atom("q"), Atom("r")


class TestAsFraction:
    def test_exact_decimal_string(self):
        assert as_fraction("0.1") == Fraction(1, 10)

    def test_slash_string(self):
        assert as_fraction("1/3") == Fraction(1, 3)

    def test_int_and_fraction_pass_through(self):
        assert as_fraction(3) == Fraction(3)
        assert as_fraction(Fraction(2, 7)) == Fraction(2, 7)

    def test_float_rejected(self):
        with pytest.raises(TypeError, match="refusing float"):
            as_fraction(0.1)

    def test_bool_rejected(self):
        with pytest.raises(TypeError):
            as_fraction(True)


class TestInterval:
    def test_membership_honours_closed_flags(self):
        half_open = Interval(Fraction(1), Fraction(2), True, False)
        assert half_open.contains(1)
        assert half_open.contains(Fraction(3, 2))
        assert not half_open.contains(2)
        open_low = Interval(Fraction(1), Fraction(2), False, True)
        assert not open_low.contains(1)
        assert open_low.contains(2)

    def test_unbounded_upper_forced_open(self):
        inf = Interval(Fraction(0), None, True, True)
        assert not inf.upper_closed
        assert inf.contains(10**9)
        assert not inf.bounded

    def test_point_interval_needs_closed_ends(self):
        assert Interval(1, 1).contains(1)
        with pytest.raises(ValueError, match="point interval"):
            Interval(1, 1, True, False)

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError, match="empty interval"):
            Interval(2, 1)

    def test_negative_lower_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            Interval(Fraction(-1, 2), 1)

    def test_string_endpoints_parsed_exactly(self):
        got = Interval("0.01", "1/3")
        assert got.lower == Fraction(1, 100)
        assert got.upper == Fraction(1, 3)

    @given(intervals(), rationals)
    def test_membership_matches_symbolic_comparison(self, interval, t):
        # Independent oracle: spell out the rational comparisons directly.
        above = t > interval.lower or (t == interval.lower and interval.lower_closed)
        below = interval.upper is None or (
            t < interval.upper or (t == interval.upper and interval.upper_closed)
        )
        assert interval.contains(t) == (above and below)


class TestNodeBasics:
    def test_atom_name_validation(self):
        for bad in ("", "9x", "a-b", "a b"):
            with pytest.raises(ValueError):
                Atom(bad)

    def test_reserved_atom_names_rejected(self):
        for reserved in ("true", "false", "L1", "L42"):
            with pytest.raises(ValueError, match="reserved"):
                Atom(reserved)

    def test_keyword_like_names_allowed(self):
        # Operator letters are contextual keywords, not reserved words.
        for name in ("F", "G", "U", "R", "L", "inf", "L_2"):
            assert Atom(name).name == name

    def test_stratum_level_validation(self):
        with pytest.raises(ValueError):
            Stratum(0, P)
        with pytest.raises(ValueError):
            Stratum(True, P)

    def test_walk_is_preorder_left_to_right(self):
        f = And(Not(P), Until(Q, Interval(0, 1), R))
        kinds = [type(n).__name__ for n in walk(f)]
        assert kinds == ["And", "Not", "Atom", "Until", "Atom", "Atom"]

    def test_node_at_follows_child_paths(self):
        f = And(Not(P), Until(Q, Interval(0, 1), R))
        assert node_at(f, ()) is f
        assert node_at(f, (0, 0)) == P
        assert node_at(f, (1, 1)) == R
        with pytest.raises(IndexError):
            node_at(f, (0, 0, 0))

    def test_depth(self):
        assert depth(P) == 1
        assert depth(And(P, Not(Q))) == 3


class TestDesugar:
    def test_eventually_becomes_until_of_true(self):
        window = Interval(0, 2)
        assert desugar(Eventually(window, P)) == Until(Const(True), window, P)

    def test_always_is_negated_until_of_negation(self):
        window = Interval(0, 2)
        assert desugar(Always(window, P)) == Not(
            Until(Const(True), window, Not(P))
        )

    def test_or_and_implies_reduce_to_and_not(self):
        assert desugar(Or(P, Q)) == Not(And(Not(P), Not(Q)))
        assert desugar(Implies(P, Q)) == Not(And(P, Not(Q)))

    def test_release_is_dual_of_until(self):
        window = Interval(1, 3)
        assert desugar(Release(P, window, Q)) == Not(
            Until(Not(P), window, Not(Q))
        )

    def test_false_literal_normalises(self):
        assert desugar(Const(False)) == Not(Const(True))

    def test_stratum_levels_survive(self):
        f = Stratum(2, Eventually(Interval(0, 1), P))
        assert desugar(f) == Stratum(2, Until(Const(True), Interval(0, 1), P))

    @given(formulas())
    def test_idempotent(self, f):
        once = desugar(f)
        assert desugar(once) == once

    @given(formulas())
    def test_preserves_well_formedness(self, f):
        assert is_well_formed(desugar(f)) == is_well_formed(f)


class TestWellFormedness:
    def test_levels_may_descend_or_hold(self):
        assert is_well_formed(Stratum(2, Stratum(1, P)))
        assert is_well_formed(Stratum(2, Stratum(2, P)))

    def test_levels_may_not_climb(self):
        assert not is_well_formed(Stratum(1, Stratum(2, P)))

    def test_rule_reaches_through_other_operators(self):
        assert not is_well_formed(Stratum(1, And(P, Not(Stratum(3, Q)))))

    def test_sibling_strata_are_independent(self):
        assert is_well_formed(And(Stratum(2, P), Stratum(1, Q)))

    def test_max_level(self):
        assert max_level(P) == 0
        assert max_level(Until(P, Interval(0, 1), Q)) == 0
        assert max_level(And(Stratum(3, P), Stratum(1, Q))) == 3


class TestResolutionLint:
    RES = {1: Fraction(1, 10), 2: Fraction(1, 2), 3: Fraction(2)}

    def test_plain_atom_is_clean(self):
        assert resolution_lint(P, self.RES).ok

    def test_window_below_base_resolution_warns(self):
        report = resolution_lint(Always(Interval(0, "0.01"), P), self.RES)
        assert len(report.warnings) == 1
        assert report.warnings[0].level == 1

    def test_stratum_switches_the_active_level(self):
        tight = Always(Interval(0, "0.3"), P)
        assert resolution_lint(tight, self.RES).ok
        report = resolution_lint(Stratum(2, tight), self.RES)
        assert [w.level for w in report.warnings] == [2]

    def test_warning_path_points_at_the_offending_node(self):
        inner = Eventually(Interval(0, Fraction(1, 100)), Q)
        f = And(P, Stratum(2, inner))
        report = resolution_lint(f, self.RES)
        (warning,) = report.warnings
        assert isinstance(warning, LintWarning)
        assert node_at(f, warning.path) is inner

    def test_unbounded_window_never_warns(self):
        f = Stratum(3, Always(Interval(0, None, True, False), P))
        assert resolution_lint(f, self.RES).ok

    def test_missing_level_raises(self):
        with pytest.raises(MissingResolution):
            resolution_lint(Stratum(2, P), {1: Fraction(1), 3: Fraction(2)}, base_level=1)
        with pytest.raises(MissingResolution):
            resolution_lint(P, {2: Fraction(1)}, base_level=1)

    def test_non_increasing_resolutions_rejected(self):
        with pytest.raises(ValueError, match="strictly increase"):
            resolution_lint(P, {1: Fraction(1), 2: Fraction(1)})

    @given(formulas(max_level=3))
    def test_clean_when_every_window_is_wide_enough(self, f):
        # With all finite upper bounds at or above the coarsest resolution,
        # no window can undercut any level it might be checked against.
        resolutions = {1: Fraction(1, 64), 2: Fraction(1, 32), 3: Fraction(1, 16)}
        wide_enough = all(
            node.interval.upper is None or node.interval.upper >= Fraction(1, 16)
            for node in walk(f)
            if isinstance(node, (Until, Release, Eventually, Always))
        )
        if wide_enough:
            assert resolution_lint(f, resolutions).ok
