"""Multi-agent gridworld for comparing flat and stratified safety monitoring.

Agents live on an N x N grid with static obstacles and move one 4-connected
step per tick along breadth-first shortest paths toward their goals.  Two
policies are provided:

* ``Policy.MTL`` agents ignore each other entirely.  Vertex collisions (two
  or more agents on one cell after a tick) are counted but not prevented.
* ``Policy.SMTL`` agents resolve conflicts with a priority protocol: agents
  act in ascending id order, an agent waits rather than enter a cell that is
  already claimed this tick or still occupied by an agent that has not acted
  yet, and after ``replan_patience`` consecutive waits it re-runs BFS around
  the currently occupied cells.

The SMTL stepper is collision-free by construction; :func:`run` re-checks
that invariant every tick and raises :class:`InvariantViolation` if it ever
breaks.  Runs are fully deterministic given a :class:`SimConfig` (timing
excepted), which the experiment harness relies on for reproducibility.

Trajectories can be exported as JSON records and re-interpreted as timed
traces over ``collide_i_j`` / ``at_goal_i`` atoms, so the same model checker
that drives the logic front end can audit simulator output after the fact.
"""

from __future__ import annotations

import enum
import random
import statistics
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappop, heappush
from typing import Iterable, Mapping, Optional, Sequence

from .formulas import And, Atom, Const, Formula, Interval, Not, Always, as_fraction
from .traces import StratifiedTrace

Cell = tuple[int, int]

_NEIGHBOR_OFFSETS: tuple[Cell, ...] = ((-1, 0), (1, 0), (0, -1), (0, 1))


class WorldGenerationFailed(RuntimeError):
    """No obstacle field admitting the requested agents was found in time."""


class InvariantViolation(RuntimeError):
    """The collision-free stepper produced two agents on one cell."""


class Policy(enum.Enum):
    """Movement policy selector."""

    MTL = "mtl"
    SMTL = "smtl"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SimConfig:
    """Inputs that fully determine a run (modulo wall-clock timing).

    ``agent_count`` defaults to ``grid_size`` and ``max_steps`` to
    ``8 * grid_size**2``, which is generous enough that agents only time
    out when they are genuinely wedged.
    """

    grid_size: int
    agent_count: Optional[int] = None
    obstacle_density: float = 0.10
    seed: int = 0
    max_steps: Optional[int] = None
    policy: Policy = Policy.SMTL
    replan_patience: int = 3

    def __post_init__(self) -> None:
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.agent_count is not None and self.agent_count < 1:
            raise ValueError("agent_count must be positive")
        if not 0.0 <= self.obstacle_density < 1.0:
            raise ValueError("obstacle_density must lie in [0, 1)")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.replan_patience < 0:
            raise ValueError("replan_patience must be non-negative")

    @property
    def resolved_agent_count(self) -> int:
        return self.grid_size if self.agent_count is None else self.agent_count

    @property
    def resolved_max_steps(self) -> int:
        return 8 * self.grid_size**2 if self.max_steps is None else self.max_steps


@dataclass(slots=True)
class AgentState:
    """One agent's mutable position, plan, and bookkeeping counters.

    The plan is ``path[path_index:]``; consumed cells stay in the list so
    replans simply swap in a fresh path.  ``steps_taken`` counts every tick
    the agent acted before reaching its goal, waits included, so
    ``steps_taken >= max(waits, shortest)`` and the efficiency ratio
    ``shortest / steps_taken`` never exceeds 1.

    ``position_enc`` and ``path_enc`` are flat-index twins of ``position``
    and ``path`` (row * grid_size + col) that keep the SMTL stepper's hot
    loop off tuple arithmetic.  :class:`World` fills them in on
    construction, so hand-built agents may leave the defaults.
    """

    id: int
    position: Cell
    goal: Cell
    path: list[Cell]
    shortest: int
    path_index: int = 0
    steps_taken: int = 0
    waits: int = 0
    consecutive_waits: int = 0
    next_replan_at: int = 0
    reached: bool = False
    position_enc: int = -1
    path_enc: list[int] = field(default_factory=list)


class GridNavigator:
    """Breadth-first shortest paths on one obstacle grid, built once.

    Cells are flattened to ``row * size + col`` indices and the visited and
    parent buffers are reused across searches via version stamps, so a
    search allocates nothing but its frontier.  Expansion follows the fixed
    up, down, left, right order, which makes tie-breaking between
    equal-length paths deterministic.
    """

    __slots__ = ("size", "adjacency", "_mark", "_parent", "_depth", "_version")

    def __init__(self, size: int, obstacles: frozenset[Cell]) -> None:
        self.size = size
        adjacency: list[tuple[int, ...]] = []
        for r in range(size):
            for c in range(size):
                if (r, c) in obstacles:
                    adjacency.append(())
                    continue
                adjacency.append(
                    tuple(
                        (r + dr) * size + (c + dc)
                        for dr, dc in _NEIGHBOR_OFFSETS
                        if 0 <= r + dr < size
                        and 0 <= c + dc < size
                        and (r + dr, c + dc) not in obstacles
                    )
                )
        self.adjacency = adjacency
        cells = size * size
        self._mark = [0] * cells
        self._parent = [0] * cells
        self._depth = [0] * cells
        self._version = 0

    def encode(self, cell: Cell) -> int:
        return cell[0] * self.size + cell[1]

    def decode(self, index: int) -> Cell:
        return divmod(index, self.size)

    def shortest(
        self, start: int, goal: int, blocked: Iterable[int] = ()
    ) -> Optional[list[int]]:
        """Shortest path as cell indices, start excluded; None if walled off.

        Runs a level-synchronized search from both ends, always growing the
        smaller frontier, which roughly halves the cells touched compared to
        one-sided search on open grids.  ``blocked`` indices are stamped into
        the visited buffer up front, so each costs one array write instead of
        a set probe per edge.  The start cell is always usable even if listed
        as blocked.  All tie-breaking is fixed, so results are deterministic.
        """
        mark = self._mark
        self._version += 3
        stamp_blocked = self._version - 2
        for index in blocked:
            mark[index] = stamp_blocked
        if start == goal:
            return []
        adjacency = self.adjacency
        if mark[goal] >= stamp_blocked or not adjacency[goal]:
            return None
        parent = self._parent
        depth = self._depth
        stamp_fwd = stamp_blocked + 1
        stamp_bwd = stamp_blocked + 2
        mark[start] = stamp_fwd
        mark[goal] = stamp_bwd
        depth[start] = depth[goal] = 0
        fwd_front = [start]
        bwd_front = [goal]
        fwd_levels = bwd_levels = 0
        best = -1
        bridge = (0, 0)
        # Growing the completed-level counts makes fwd_levels + bwd_levels + 1
        # a lower bound on any path still undiscovered, so the loop can stop
        # as soon as the best bridge found beats everything still possible.
        while fwd_front and bwd_front and (best < 0 or fwd_levels + bwd_levels + 1 < best):
            if len(fwd_front) <= len(bwd_front):
                own, other = stamp_fwd, stamp_bwd
                front, fwd_front = fwd_front, []
                grown = fwd_front
                fwd_levels += 1
                next_depth = fwd_levels
            else:
                own, other = stamp_bwd, stamp_fwd
                front, bwd_front = bwd_front, []
                grown = bwd_front
                bwd_levels += 1
                next_depth = bwd_levels
            # Level sync means every cell in `front` sits at next_depth - 1,
            # so bridge lengths need only the other side's stored depth.
            for cell in front:
                for nxt in adjacency[cell]:
                    seen = mark[nxt]
                    if seen < stamp_blocked:
                        mark[nxt] = own
                        parent[nxt] = cell
                        depth[nxt] = next_depth
                        grown.append(nxt)
                    elif seen == other:
                        length = next_depth + depth[nxt]
                        if best < 0 or length < best:
                            best = length
                            bridge = (cell, nxt) if own == stamp_fwd else (nxt, cell)
        if best < 0:
            return None
        fwd_node, bwd_node = bridge
        path = []
        back = fwd_node
        while back != start:
            path.append(back)
            back = parent[back]
        path.reverse()
        node = bwd_node
        path.append(node)
        while node != goal:
            node = parent[node]
            path.append(node)
        return path

    def distances_from(self, source: int) -> list[int]:
        """Static hop counts from every cell to ``source``; unreachable = size**2.

        Ignores agents entirely, so the result can be cached for a whole run
        and used as an admissible, consistent heuristic by
        :meth:`shortest_toward` no matter which cells are occupied later.
        """
        cells = self.size * self.size
        dist = [cells] * cells
        adjacency = self.adjacency
        if not adjacency[source]:
            # Source sits on an obstacle: nothing is reachable from it.
            return dist
        dist[source] = 0
        front = [source]
        level = 0
        while front:
            level += 1
            grown: list[int] = []
            for cell in front:
                for nxt in adjacency[cell]:
                    if dist[nxt] > level:
                        dist[nxt] = level
                        grown.append(nxt)
            front = grown
        return dist

    def shortest_toward(
        self, start: int, goal: int, dist: list[int], blocked: Iterable[int] = ()
    ) -> Optional[list[int]]:
        """Like :meth:`shortest` but guided by a ``distances_from(goal)`` table.

        Runs A* with the static table as heuristic, breaking f-ties toward
        deeper nodes, so an unobstructed search expands little more than the
        path itself and detours only spill around the cells actually in the
        way.  Blocked cells can only lengthen true distances, so the static
        table stays admissible and the result is still a shortest path.
        Statically unreachable goals return None without searching.

        The one bad regime is a goal sealed off by blocked cells, where A*
        floods the whole start component under heap overhead while the
        two-ended :meth:`shortest` just exhausts the small sealed side.  An
        expansion cap sized so that ordinary detours stay well inside it
        hands such searches over to :meth:`shortest`, which is why
        ``blocked`` must be re-iterable, not a one-shot iterator.  Either
        way the result is an exact shortest path.
        """
        mark = self._mark
        self._version += 3
        stamp_blocked = self._version - 2
        stamp_open = self._version - 1
        stamp_closed = self._version
        for index in blocked:
            mark[index] = stamp_blocked
        if start == goal:
            return []
        adjacency = self.adjacency
        unreachable = len(dist)
        if mark[goal] >= stamp_blocked or not adjacency[goal] or dist[start] >= unreachable:
            return None
        parent = self._parent
        depth = self._depth
        mark[start] = stamp_open
        depth[start] = 0
        heap = [(dist[start], 0, 0, start)]
        tie = 0
        cap = 2 * dist[start] + 64
        while heap:
            _, neg_g, _, cell = heappop(heap)
            if mark[cell] == stamp_closed:
                continue
            mark[cell] = stamp_closed
            cap -= 1
            if cap < 0:
                return self.shortest(start, goal, blocked)
            g1 = 1 - neg_g
            for nxt in adjacency[cell]:
                seen = mark[nxt]
                if seen >= stamp_blocked:
                    # Blocked, closed, or already open at depth <= g1: only
                    # an open node this pass found a longer way to is worth
                    # revisiting, and the stale heap entry skips via closed.
                    if seen != stamp_open or depth[nxt] <= g1:
                        continue
                if nxt == goal:
                    parent[nxt] = cell
                    path = [nxt]
                    while cell != start:
                        path.append(cell)
                        cell = parent[cell]
                    path.reverse()
                    return path
                h = dist[nxt]
                if h >= unreachable:
                    continue
                mark[nxt] = stamp_open
                parent[nxt] = cell
                depth[nxt] = g1
                tie += 1
                heappush(heap, (g1 + h, -g1, tie, nxt))
        return None

    def shortest_cells(
        self, start: Cell, goal: Cell, blocked: Iterable[Cell] = ()
    ) -> Optional[list[Cell]]:
        """`shortest` with (row, col) cells at the boundary."""
        size = self.size
        path = self.shortest(
            self.encode(start),
            self.encode(goal),
            (r * size + c for r, c in blocked),
        )
        if path is None:
            return None
        return [divmod(index, size) for index in path]


@dataclass
class World:
    """An instantiated scenario: geometry plus live agent states.

    ``nav`` is the shared path searcher over the obstacle grid; ``parked``
    and ``active`` mirror the reached agents' positions and the unreached
    agents themselves, so the steppers never rescan the whole fleet per
    tick.  ``occupied`` holds every agent's current cell in the navigator's
    flat ``row * size + col`` encoding; between ticks it is exactly the
    occupancy map, and within a tick the SMTL stepper keeps it equal to the
    cells an agent must not enter.  All three are derived from ``agents``
    on construction and maintained by the steppers afterwards; mutating
    agent positions by hand desynchronizes them.
    """

    grid_size: int
    obstacles: frozenset[Cell]
    agents: list[AgentState]
    replan_patience: int = 3
    nav: Optional[GridNavigator] = None
    parked: set[Cell] = field(default_factory=set)
    active: list[AgentState] = field(default_factory=list)
    occupied: set[int] = field(default_factory=set)
    goal_dist: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nav is None:
            self.nav = GridNavigator(self.grid_size, self.obstacles)
        self.parked = {a.position for a in self.agents if a.reached}
        self.active = [a for a in self.agents if not a.reached]
        n = self.grid_size
        for agent in self.agents:
            agent.position_enc = agent.position[0] * n + agent.position[1]
            if len(agent.path_enc) != len(agent.path):
                agent.path_enc = [r * n + c for r, c in agent.path]
        self.occupied = {a.position_enc for a in self.agents}
        if len(self.occupied) != len(self.agents):
            raise InvariantViolation("agents share a cell at construction")
        # Static hop counts to each goal, reused as replan heuristics.
        self.goal_dist = {
            a.id: self.nav.distances_from(a.goal[0] * n + a.goal[1])
            for a in self.agents
        }


def bfs_path(
    grid_size: int,
    obstacles: frozenset[Cell],
    start: Cell,
    goal: Cell,
    blocked: frozenset[Cell] = frozenset(),
) -> Optional[list[Cell]]:
    """Shortest 4-connected path from ``start`` to ``goal``, start excluded.

    ``blocked`` cells are treated as extra obstacles (the start itself is
    always usable).  Returns ``None`` when the goal is unreachable and the
    empty list when ``start == goal``.  One-shot convenience wrapper over
    :class:`GridNavigator` for callers without a world in hand.
    """
    if goal in obstacles:
        return None
    return GridNavigator(grid_size, obstacles).shortest_cells(start, goal, blocked)


_OBSTACLE_ATTEMPTS = 50
_PAIR_ATTEMPTS = 200


def generate_world(config: SimConfig) -> World:
    """Sample a world from ``config.seed``.

    Obstacle cells are drawn independently at ``obstacle_density``; agents
    get distinct start cells, distinct goal cells, ``start != goal``, and a
    BFS-reachable start-goal pair.  Pairs are resampled a bounded number of
    times before the whole obstacle field is redrawn; if that also fails the
    scenario is declared infeasible.
    """
    rng = random.Random(config.seed)
    n = config.grid_size
    agent_count = config.resolved_agent_count
    all_cells = [(r, c) for r in range(n) for c in range(n)]
    for _ in range(_OBSTACLE_ATTEMPTS):
        obstacles = frozenset(
            cell for cell in all_cells if rng.random() < config.obstacle_density
        )
        free = [cell for cell in all_cells if cell not in obstacles]
        if len(free) < agent_count + 1:
            continue
        nav = GridNavigator(n, obstacles)
        used_starts: set[Cell] = set()
        used_goals: set[Cell] = set()
        agents: list[AgentState] = []
        for agent_id in range(agent_count):
            for _ in range(_PAIR_ATTEMPTS):
                start = free[rng.randrange(len(free))]
                goal = free[rng.randrange(len(free))]
                if start == goal or start in used_starts or goal in used_goals:
                    continue
                path = nav.shortest(nav.encode(start), nav.encode(goal))
                if path is None:
                    continue
                used_starts.add(start)
                used_goals.add(goal)
                agents.append(
                    AgentState(
                        id=agent_id,
                        position=start,
                        goal=goal,
                        path=[nav.decode(step) for step in path],
                        shortest=len(path),
                        path_enc=path,
                    )
                )
                break
            else:
                break
        if len(agents) == agent_count:
            return World(
                grid_size=n,
                obstacles=obstacles,
                agents=agents,
                replan_patience=config.replan_patience,
                nav=nav,
            )
    raise WorldGenerationFailed(
        f"could not place {agent_count} agents on a {n}x{n} grid "
        f"at density {config.obstacle_density}"
    )


def count_vertex_collisions(agents: Sequence[AgentState]) -> int:
    """Number of unordered same-cell pairs, over all agents (parked included)."""
    occupancy = Counter(agent.position for agent in agents)
    return sum(k * (k - 1) // 2 for k in occupancy.values())


def step_mtl(world: World) -> list[int]:
    """Advance every unfinished agent one cell along its precomputed path.

    Agents are oblivious to one another, so nobody ever waits; the return
    value (ids of waiting agents) is always empty and exists only so both
    steppers share a signature.
    """
    arrived = False
    for agent in world.active:
        agent.position = agent.path[agent.path_index]
        agent.path_index += 1
        agent.steps_taken += 1
        if agent.position == agent.goal:
            agent.reached = True
            arrived = True
            world.parked.add(agent.position)
    if arrived:
        world.active = [agent for agent in world.active if not agent.reached]
    return []


def step_smtl(world: World) -> list[int]:
    """Advance agents in ascending id order with blocking and replanning.

    An agent may not move onto a cell that (a) an earlier-acting agent
    already moved to or waited on this tick, (b) a later-acting agent still
    occupies, or (c) a finished agent is parked on.  A blocked agent waits
    in place.  After ``replan_patience`` consecutive waits it re-runs BFS
    with all currently occupied cells as temporary obstacles and adopts the
    detour if one exists; after a failed attempt the next one waits twice as
    long, so permanently walled-in agents only ever pay O(log max_steps)
    searches.  Returns the ids of agents that waited.

    World.occupied is the single source of blocking truth: dropping the
    acting agent's own cell and re-adding wherever it ends up keeps the set
    equal to (a) + (b) + (c) for each agent in turn, so one membership test
    replaces three and the replan search can take the set as-is.
    """
    active = world.active
    nav = world.nav
    assert nav is not None
    size = nav.size
    occupied = world.occupied
    occupied_add = occupied.add
    occupied_discard = occupied.discard
    goal_dist = world.goal_dist
    waited: list[int] = []
    patience = world.replan_patience
    arrived = False
    for agent in active:
        own = agent.position_enc
        occupied_discard(own)
        index = agent.path_index
        target_enc = agent.path_enc[index]
        if target_enc in occupied:
            waits_after = agent.consecutive_waits + 1
            if agent.next_replan_at == 0:
                agent.next_replan_at = max(patience, 1)
            blocked = True
            if waits_after >= agent.next_replan_at:
                goal = agent.goal
                detour = nav.shortest_toward(
                    own, goal[0] * size + goal[1], goal_dist[agent.id], blocked=occupied
                )
                if detour:
                    # Every cell of the detour avoids `occupied`, so its
                    # first step is guaranteed free right now.
                    agent.path = [divmod(step, size) for step in detour]
                    agent.path_enc = detour
                    agent.path_index = index = 0
                    target_enc = detour[0]
                    blocked = False
                else:
                    agent.next_replan_at = waits_after * 2
            if blocked:
                agent.waits += 1
                agent.steps_taken += 1
                agent.consecutive_waits = waits_after
                waited.append(agent.id)
                occupied_add(own)
                continue
        target = agent.path[index]
        agent.path_index = index + 1
        agent.position = target
        agent.position_enc = target_enc
        agent.steps_taken += 1
        if agent.consecutive_waits:
            agent.consecutive_waits = 0
            agent.next_replan_at = 0
        occupied_add(target_enc)
        if target == agent.goal:
            agent.reached = True
            arrived = True
            world.parked.add(target)
    if arrived:
        world.active = [agent for agent in world.active if not agent.reached]
    return waited


@dataclass(frozen=True)
class RunMetrics:
    """Aggregate statistics of one run.

    All ratio-valued fields are exact rationals except
    ``mean_compute_per_step``, which is measured wall-clock seconds spent
    inside the stepper and therefore the only nondeterministic field.
    """

    policy: Policy
    agent_count: int
    steps_executed: int
    total_collisions: int
    total_waits: int
    unfinished: int
    collision_rate: Fraction
    avg_path_length: Fraction
    path_efficiency: Fraction
    avg_waits: Fraction
    mean_compute_per_step: float

    def deterministic_fields(self) -> tuple:
        """Everything except the timing measurement, for equality checks."""
        return (
            self.policy,
            self.agent_count,
            self.steps_executed,
            self.total_collisions,
            self.total_waits,
            self.unfinished,
            self.collision_rate,
            self.avg_path_length,
            self.path_efficiency,
            self.avg_waits,
        )


@dataclass(frozen=True)
class RunOutput:
    """A finished run: metrics plus optional per-tick trajectory records."""

    config: SimConfig
    metrics: RunMetrics
    starts: tuple[Cell, ...]
    goals: tuple[Cell, ...]
    records: Optional[tuple[dict, ...]] = None


def _snapshot(t: int, agents: Sequence[AgentState], collisions: int, waited: Sequence[int]) -> dict:
    return {
        "t": t,
        "positions": [list(agent.position) for agent in agents],
        "collisions": collisions,
        "waits_this_step": list(waited),
    }


def run(config: SimConfig, record_trajectory: bool = False) -> RunOutput:
    """Generate a world from ``config`` and simulate it to completion.

    The loop stops when every agent has reached its goal or after
    ``config.resolved_max_steps`` ticks.  Collision counting and trajectory
    recording happen outside the timed region, so
    ``mean_compute_per_step`` reflects policy decisions only.
    """
    world = generate_world(config)
    agents = world.agents
    starts = tuple(agent.position for agent in agents)
    goals = tuple(agent.goal for agent in agents)
    stepper = step_mtl if config.policy is Policy.MTL else step_smtl
    records: Optional[list[dict]] = None
    if record_trajectory:
        records = [_snapshot(0, agents, 0, [])]
    total_collisions = 0
    compute_seconds = 0.0
    steps = 0
    max_steps = config.resolved_max_steps
    while steps < max_steps and world.active:
        began = time.perf_counter()
        waited = stepper(world)
        compute_seconds += time.perf_counter() - began
        steps += 1
        collisions = count_vertex_collisions(agents)
        if config.policy is Policy.SMTL and collisions:
            clashes = Counter(agent.position for agent in agents)
            cell = next(pos for pos, k in clashes.items() if k > 1)
            raise InvariantViolation(
                f"SMTL agents share cell {cell} at step {steps}"
            )
        total_collisions += collisions
        if records is not None:
            records.append(_snapshot(steps, agents, collisions, waited))
    finished = [agent for agent in agents if agent.reached]
    agent_count = len(agents)
    if finished:
        avg_path = Fraction(sum(a.steps_taken for a in finished), len(finished))
        efficiency = Fraction(
            sum(Fraction(a.shortest, a.steps_taken) for a in finished), len(finished)
        )
    else:
        avg_path = Fraction(0)
        efficiency = Fraction(0)
    metrics = RunMetrics(
        policy=config.policy,
        agent_count=agent_count,
        steps_executed=steps,
        total_collisions=total_collisions,
        total_waits=sum(agent.waits for agent in agents),
        unfinished=agent_count - len(finished),
        collision_rate=Fraction(total_collisions, agent_count),
        avg_path_length=avg_path,
        path_efficiency=efficiency,
        avg_waits=Fraction(sum(agent.waits for agent in agents), agent_count),
        mean_compute_per_step=compute_seconds / steps if steps else 0.0,
    )
    return RunOutput(
        config=config,
        metrics=metrics,
        starts=starts,
        goals=goals,
        records=tuple(records) if records is not None else None,
    )


def derive_seed(base_seed: int, grid_size: int, index: int) -> int:
    """Mix a base seed with grid size and replicate index, reproducibly."""
    return (base_seed * 1_000_003 + grid_size * 10_007 + index * 101 + 12_345) % 2**63


@dataclass(frozen=True)
class ExperimentCell:
    """One (grid size, policy, replicate) point of an experiment matrix."""

    grid_size: int
    policy: Policy
    index: int
    seed: int


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one experiment cell; ``error`` is set when the run blew up."""

    cell: ExperimentCell
    output: Optional[RunOutput] = None
    error: Optional[str] = None


def _experiment_cells(
    sizes: Sequence[int],
    seeds_per_size: int,
    base_seed: int,
    policies: Sequence[Policy],
) -> list[ExperimentCell]:
    cells = []
    for size in sizes:
        for policy in policies:
            for index in range(seeds_per_size):
                cells.append(
                    ExperimentCell(
                        grid_size=size,
                        policy=policy,
                        index=index,
                        seed=derive_seed(base_seed, size, index),
                    )
                )
    return cells


def _run_cell(args: tuple[ExperimentCell, SimConfig, bool]) -> ExperimentResult:
    cell, config, record = args
    try:
        return ExperimentResult(cell=cell, output=run(config, record_trajectory=record))
    except (WorldGenerationFailed, InvariantViolation) as exc:
        return ExperimentResult(cell=cell, error=f"{type(exc).__name__}: {exc}")


def experiment(
    sizes: Sequence[int],
    seeds_per_size: int,
    base_seed: int = 0,
    policies: Sequence[Policy] = (Policy.MTL, Policy.SMTL),
    obstacle_density: float = 0.10,
    replan_patience: int = 3,
    max_steps: Optional[int] = None,
    agent_count: Optional[int] = None,
    record_trajectories: bool = False,
    jobs: int = 1,
) -> list[ExperimentResult]:
    """Run the full size x policy x seed matrix, optionally in parallel.

    Each cell gets its own derived seed, so matched MTL/SMTL pairs see the
    same world.  Results come back in deterministic matrix order regardless
    of ``jobs``.
    """
    cells = _experiment_cells(sizes, seeds_per_size, base_seed, policies)
    tasks = []
    for cell in cells:
        config = SimConfig(
            grid_size=cell.grid_size,
            agent_count=agent_count,
            obstacle_density=obstacle_density,
            seed=cell.seed,
            max_steps=max_steps,
            policy=cell.policy,
            replan_patience=replan_patience,
        )
        tasks.append((cell, config, record_trajectories))
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_cell(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, tasks))


# Per-run metrics that get mean / sample-std rows in experiment summaries.
SUMMARY_METRICS = (
    "collision_rate",
    "avg_path_length",
    "path_efficiency",
    "avg_waits",
    "mean_compute_per_step",
    "unfinished",
)


@dataclass(frozen=True)
class MetricSummary:
    """Per-(size, policy) aggregate over an experiment's successful runs.

    Means stay exact rationals wherever the underlying metric is one;
    standard deviations are sample (n-1) floats, 0.0 for a single run.
    """

    grid_size: int
    policy: Policy
    runs: int
    mean: Mapping[str, object]
    std: Mapping[str, float]


def aggregate(results: Sequence[ExperimentResult]) -> list[MetricSummary]:
    """Summarise results per (grid size, policy), in matrix order.

    Failed cells contribute nothing; a group with no successful runs is
    omitted entirely rather than reported as a row of zeros.
    """
    groups: dict[tuple[int, Policy], list[RunMetrics]] = {}
    order: list[tuple[int, Policy]] = []
    for result in results:
        if result.output is None:
            continue
        key = (result.cell.grid_size, result.cell.policy)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(result.output.metrics)
    summaries = []
    for size, policy in order:
        metrics = groups[size, policy]
        mean: dict[str, object] = {}
        std: dict[str, float] = {}
        for name in SUMMARY_METRICS:
            values = [getattr(m, name) for m in metrics]
            if name == "mean_compute_per_step":
                mean[name] = sum(values) / len(values)
            else:
                mean[name] = Fraction(sum(values)) / len(values)
            std[name] = (
                statistics.stdev(float(v) for v in values) if len(values) > 1 else 0.0
            )
        summaries.append(
            MetricSummary(
                grid_size=size, policy=policy, runs=len(metrics), mean=mean, std=std
            )
        )
    return summaries


def trajectory_to_trace(
    records: Sequence[Mapping],
    goals: Optional[Sequence[Cell]] = None,
) -> StratifiedTrace:
    """Re-read trajectory records as a single-level timed trace.

    Atom ``collide_i_j`` (i < j) holds whenever agents ``i`` and ``j`` share
    a cell at that tick; with ``goals`` given, ``at_goal_i`` holds whenever
    agent ``i`` sits on its goal.  Tick ``t`` becomes timestamp ``t`` with
    base resolution 1.
    """
    ordered = sorted(records, key=lambda rec: rec["t"])
    if not ordered:
        raise ValueError("trajectory is empty")
    timestamps = []
    states = []
    for rec in ordered:
        timestamps.append(as_fraction(rec["t"]))
        positions = [tuple(pos) for pos in rec["positions"]]
        atoms: set[str] = set()
        for i in range(len(positions)):
            for j in range(i + 1, len(positions)):
                if positions[i] == positions[j]:
                    atoms.add(f"collide_{i}_{j}")
        if goals is not None:
            for i, pos in enumerate(positions):
                if i < len(goals) and pos == tuple(goals[i]):
                    atoms.add(f"at_goal_{i}")
        states.append(atoms)
    return StratifiedTrace(
        timestamps=tuple(timestamps),
        levels={1: tuple(frozenset(s) for s in states)},
        resolutions={1: Fraction(1)},
    )


def _balanced_and(terms: Sequence[Formula]) -> Formula:
    if not terms:
        return Const(True)
    if len(terms) == 1:
        return terms[0]
    mid = len(terms) // 2
    return And(_balanced_and(terms[:mid]), _balanced_and(terms[mid:]))


def safety_formula(agent_count: int, horizon) -> Formula:
    """No two agents ever share a cell, over the closed window [0, horizon].

    The pairwise conjunction is balanced rather than left-nested so formula
    depth grows logarithmically in the number of agents.
    """
    if agent_count < 1:
        raise ValueError("agent_count must be positive")
    terms = [
        Not(Atom(f"collide_{i}_{j}"))
        for i in range(agent_count)
        for j in range(i + 1, agent_count)
    ]
    window = Interval(Fraction(0), as_fraction(horizon))
    return Always(window, _balanced_and(terms))
