"""Trace-layer tests: invariants, abstraction operators, JSON round trips."""

import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from smtlkit.traces import (
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
from strategies import stratified_traces, timed_traces


def tt(*pairs):
    """Shorthand: ``tt((t, "p q"), ...)`` builds a TimedTrace."""
    timestamps = tuple(Fraction(t) if not isinstance(t, str) else Fraction(t) for t, _ in pairs)
    states = tuple(frozenset(atoms.split()) for _, atoms in pairs)
    return TimedTrace(timestamps, states)


class TestTimedTrace:
    def test_needs_at_least_one_position(self):
        with pytest.raises(ValueError, match="at least one"):
            TimedTrace((), ())

    def test_first_timestamp_must_be_zero(self):
        with pytest.raises(ValueError, match="must be 0"):
            TimedTrace((Fraction(1),), (frozenset(),))

    def test_timestamps_strictly_increase(self):
        with pytest.raises(ValueError, match="strictly increase"):
            TimedTrace((Fraction(0), Fraction(1), Fraction(1)), (frozenset(),) * 3)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="timestamps but"):
            TimedTrace((Fraction(0),), (frozenset(), frozenset()))

    def test_states_are_frozen_and_timestamps_exact(self):
        trace = TimedTrace((0, "0.5"), ({"p"}, set()))
        assert trace.timestamps == (Fraction(0), Fraction(1, 2))
        assert trace.states == (frozenset({"p"}), frozenset())

    def test_prefix(self):
        trace = tt((0, "p"), (1, "q"), (2, ""))
        assert len(trace.prefix(2)) == 2
        assert trace.prefix(2).states == trace.states[:2]


class TestValidate:
    def sound(self):
        return StratifiedTrace(
            (0, 1, 2),
            {1: ({"p"}, set(), {"p"}), 2: (set(), set(), set())},
            {1: Fraction(1, 2), 2: 1},
        )

    def test_sound_trace_has_no_violations(self):
        assert validate(self.sound()) == []

    def kinds(self, trace):
        return sorted({v.kind for v in validate(trace)})

    def test_nonzero_start_flagged(self):
        bad = StratifiedTrace((1, 2), {1: (set(), set())}, {1: 1})
        assert "timestamps" in self.kinds(bad)

    def test_non_contiguous_levels_flagged(self):
        bad = StratifiedTrace((0,), {2: (set(),)}, {2: 1})
        assert "levels" in self.kinds(bad)

    def test_misaligned_level_flagged(self):
        bad = StratifiedTrace((0, 1), {1: (set(),)}, {1: 1})
        assert "alignment" in self.kinds(bad)

    def test_missing_resolution_flagged(self):
        bad = StratifiedTrace((0,), {1: (set(),)}, {})
        assert "resolutions" in self.kinds(bad)

    def test_non_increasing_resolutions_flagged(self):
        bad = StratifiedTrace(
            (0,), {1: (set(),), 2: (set(),)}, {1: 1, 2: 1}
        )
        assert "resolutions" in self.kinds(bad)

    def test_state_change_faster_than_resolution_flagged(self):
        bad = StratifiedTrace(
            (0, 1, 2),
            {1: (set(), set(), set()), 2: (set(), {"p"}, {"p"})},
            {1: Fraction(1, 2), 2: 2},
        )
        violations = validate(bad)
        assert [v.kind for v in violations] == ["multi_rate"]
        assert violations[0].level == 2

    def test_holding_state_forever_is_fine(self):
        steady = StratifiedTrace(
            (0, 1, 2, 3),
            {1: ({"p"},) * 4, 2: ({"p"},) * 4},
            {1: 1, 2: 10},
        )
        assert validate(steady) == []


class TestAbstractionOps:
    def test_identity(self):
        trace = tt((0, "p"), (1, ""))
        assert apply_abstraction(Identity(), trace) is trace

    def test_project_keeps_only_named_atoms(self):
        trace = tt((0, "p q"), (1, "q r"))
        got = apply_abstraction(Project(frozenset({"q", "r"})), trace)
        assert got.states == (frozenset({"q"}), frozenset({"q", "r"}))

    def test_project_needs_atoms(self):
        with pytest.raises(ValueError):
            Project(frozenset())

    def test_smooth_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            SmoothIsolated(Fraction(0))

    def test_smooth_erodes_pulse_edges(self):
        # p holds on [0, 1] sampled at 1/10; a 3/10 radius erodes the
        # trailing edge because samples beyond t=1 lack p.
        step = Fraction(1, 10)
        timestamps = tuple(step * k for k in range(21))
        states = tuple(
            frozenset({"p"}) if t <= 1 else frozenset() for t in timestamps
        )
        trace = TimedTrace(timestamps, states)
        got = apply_abstraction(SmoothIsolated(Fraction(3, 10)), trace)
        survived = [t for t, s in zip(got.timestamps, got.states) if "p" in s]
        assert survived == [step * k for k in range(9)]  # [0, 0.8]

    def test_smooth_erases_isolated_spike(self):
        trace = tt((0, ""), (1, "p"), (2, ""))
        got = apply_abstraction(SmoothIsolated(Fraction(3, 2)), trace)
        assert all("p" not in s for s in got.states)

    def test_smooth_at_or_below_step_is_identity(self):
        trace = tt((0, "p"), (1, ""), (2, "p"))
        got = apply_abstraction(SmoothIsolated(Fraction(1)), trace)
        assert got.states == trace.states

    @given(timed_traces(), st.fractions(min_value="1/4", max_value=4, max_denominator=4))
    def test_smooth_matches_brute_force_oracle(self, trace, radius):
        got = apply_abstraction(SmoothIsolated(radius), trace)
        for n in range(len(trace)):
            expected = frozenset(
                p
                for p in trace.states[n]
                if all(
                    p in trace.states[m]
                    for m in range(len(trace))
                    if m != n and abs(trace.timestamps[m] - trace.timestamps[n]) < radius
                )
            )
            assert got.states[n] == expected

    def test_downsample_holds_period_start_state(self):
        trace = tt((0, "p"), ("1/2", "q"), (1, "r"), ("3/2", "p"), (2, ""))
        got = apply_abstraction(Downsample(Fraction(1)), trace)
        # Periods [0,1), [1,2), [2,..): sampled at 0, 1, 2.
        assert got.states == (
            frozenset({"p"}),
            frozenset({"p"}),
            frozenset({"r"}),
            frozenset({"r"}),
            frozenset(),
        )

    def test_downsample_hold_flag_matters_off_grid(self):
        trace = tt((0, "p"), ("3/4", "q"), ("3/2", "r"))
        held = apply_abstraction(Downsample(Fraction(1), hold=True), trace)
        reread = apply_abstraction(Downsample(Fraction(1), hold=False), trace)
        # Boundary t=1 falls between samples: hold keeps the 3/4 state,
        # re-reading takes the 3/2 state.
        assert held.states[2] == frozenset({"q"})
        assert reread.states[2] == frozenset({"r"})

    def test_downsample_period_must_be_positive(self):
        with pytest.raises(ValueError):
            Downsample(Fraction(-1, 2))

    @given(timed_traces())
    def test_ops_preserve_shape(self, trace):
        for op in (
            Identity(),
            Project(frozenset({"p"})),
            SmoothIsolated(Fraction(1, 2)),
            Downsample(Fraction(2)),
        ):
            got = apply_abstraction(op, trace)
            assert got.timestamps == trace.timestamps
            assert len(got.states) == len(trace.states)


class TestHierarchy:
    def test_needs_resolution_per_level(self):
        with pytest.raises(ValueError, match="needs resolutions"):
            Hierarchy((Identity(),), {1: 1})

    def test_resolutions_must_increase(self):
        with pytest.raises(ValueError, match="strictly increase"):
            Hierarchy((Identity(),), {1: 1, 2: 1})

    def test_level_count(self):
        h = Hierarchy((Identity(), Identity()), {1: 1, 2: 2, 3: 4})
        assert h.level_count == 3

    def test_build_stratified_composes_operators(self):
        base = tt((0, "p q"), (1, "q"), (2, "p q"))
        h = Hierarchy(
            (Project(frozenset({"q"})), Identity()),
            {1: Fraction(1, 2), 2: Fraction(1), 3: Fraction(2)},
        )
        trace = build_stratified(base, h)
        assert trace.levels[1] == base.states
        assert trace.levels[2] == (
            frozenset({"q"}),
            frozenset({"q"}),
            frozenset({"q"}),
        )
        assert trace.levels[3] == trace.levels[2]
        assert validate(trace) == []
        assert check_consistency(trace, h)

    def test_build_stratified_rejects_rate_violations(self):
        base = tt((0, "p"), (1, ""))
        h = Hierarchy((Identity(),), {1: Fraction(1, 2), 2: Fraction(4)})
        with pytest.raises(ResolutionViolation):
            build_stratified(base, h)

    def test_consistency_detects_tampering(self):
        base = tt((0, "p"), (1, "q"))
        h = Hierarchy((Identity(),), {1: Fraction(1, 2), 2: Fraction(1)})
        trace = build_stratified(base, h)
        tampered = StratifiedTrace(
            trace.timestamps,
            {1: trace.levels[1], 2: (frozenset({"r"}),) * 2},
            dict(trace.resolutions),
        )
        assert not check_consistency(tampered, h)

    def test_consistency_requires_matching_level_count(self):
        base = tt((0, "p"),)
        h = Hierarchy((Identity(),), {1: 1, 2: 2})
        with pytest.raises(LevelMismatch):
            check_consistency(lift(base), h)

    def test_lift_defaults_to_smallest_gap(self):
        trace = tt((0, "p"), ("1/2", "q"), (2, ""))
        lifted = lift(trace)
        assert lifted.resolutions == {1: Fraction(1, 2)}
        assert lifted.levels[1] == trace.states
        assert validate(lifted) == []

    def test_lift_single_position(self):
        assert lift(tt((0, "p"),)).resolutions == {1: Fraction(1)}


class TestJsonRoundTrip:
    def test_numbers_read_exactly_in_both_spellings(self):
        text = json.dumps(
            {
                "timestamps": [0, 0.1, "1/3", "0.5"],
                "resolutions": {"1": 0.05},
                "levels": {"1": [["p"], [], ["p"], []]},
            }
        )
        trace = loads_trace(text)
        assert trace.timestamps == (
            Fraction(0),
            Fraction(1, 10),
            Fraction(1, 3),
            Fraction(1, 2),
        )
        assert trace.resolutions == {1: Fraction(1, 20)}

    def test_dumps_then_loads_is_identity(self):
        trace = StratifiedTrace(
            (0, "0.5", "4/3"),
            {1: ({"p"}, set(), {"q"}), 2: (set(), set(), set())},
            {1: Fraction(1, 4), 2: Fraction(1, 2)},
        )
        assert loads_trace(dumps_trace(trace)) == trace

    @given(stratified_traces())
    def test_round_trip_property(self, trace):
        assert loads_trace(dumps_trace(trace)) == trace

    def test_hierarchy_round_trips_with_all_ops(self):
        base = tt((0, "p q"), (1, "p"), (2, "p q"), (3, "p"))
        h = Hierarchy(
            (SmoothIsolated(Fraction(3, 2)), Project(frozenset({"p"})), Downsample(2)),
            {1: "1/2", 2: 1, 3: 2, 4: 4},
        )
        trace = build_stratified(base, h)
        doc = trace_to_json(trace, h)
        loaded_trace, loaded_hierarchy = trace_from_json(doc)
        assert loaded_trace == trace
        assert loaded_hierarchy == h

    def test_missing_key_rejected(self):
        with pytest.raises(TraceFormatError, match="missing"):
            trace_from_json({"timestamps": [0], "levels": {"1": [[]]}})

    def test_invalid_trace_rejected_on_load(self):
        doc = {
            "timestamps": [0, 0],
            "resolutions": {"1": 1},
            "levels": {"1": [[], []]},
        }
        with pytest.raises(TraceFormatError, match="invalid trace"):
            trace_from_json(doc)

    def test_inconsistent_declared_hierarchy_rejected(self):
        doc = {
            "timestamps": [0, 1],
            "resolutions": {"1": "1/2", "2": 1},
            "levels": {"1": [["p"], []], "2": [["q"], ["q"]]},
            "hierarchy": [{"op": "identity"}],
        }
        with pytest.raises(TraceFormatError, match="not consistent"):
            trace_from_json(doc)

    def test_unknown_operator_rejected(self):
        doc = {
            "timestamps": [0],
            "resolutions": {"1": 1, "2": 2},
            "levels": {"1": [[]], "2": [[]]},
            "hierarchy": [{"op": "blur"}],
        }
        with pytest.raises(TraceFormatError, match="unknown abstraction"):
            trace_from_json(doc)

    def test_not_json_rejected(self):
        with pytest.raises(TraceFormatError, match="not valid JSON"):
            loads_trace("{nope")

    def test_float_heavy_json_stays_exact(self):
        # json floats go through Fraction(str) style exact parsing, so 0.1
        # must become 1/10, not the binary double.
        trace = loads_trace(
            '{"timestamps": [0, 0.1], "resolutions": {"1": 0.1},'
            ' "levels": {"1": [[], []]}}'
        )
        assert trace.timestamps[1] == Fraction(1, 10)
