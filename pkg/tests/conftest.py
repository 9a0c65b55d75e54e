"""Shared test configuration: hypothesis profile and canonical fixtures."""

from hypothesis import settings

# Wall-clock deadlines misfire on loaded CI machines; example counts are
# what actually bound the work.
settings.register_profile("smtlkit", deadline=None)
settings.load_profile("smtlkit")

# Three formula texts exercised across the parser and acceptance suites: a
# multi-scale navigation spec spanning three time scales, a
# layered-architecture dependency spec with a stratum nested inside another
# stratum, and the two-pulse separating formula the demo walks through.
NAVIGATION_SPEC = (
    "L1 G[0,0.01] accel_tracking"
    " & L2 G[0,1] (speed_above_min -> F[0,0.5] lane_centered)"
    " & L3 G[0,60] (destination_reached -> G[0,5] safely_parked)"
)
LAYERED_DEPS_SPEC = (
    "L2 G[0,inf) (plan_update ->"
    " L1 F[0,0.5] (exec_acknowledge & F[0,2] functional_update))"
)
SEPARATING_SPEC = "L1 G[0,1] p & L2 F[0,2] !p"
