"""
The remote-inspection rover.

The rover explores an n by n grid. Its Detection component reports the grid,
the obstacles, and the start cell; its Planner component proposes plans, i.e.,
sets of cells starting at the start cell; and its Agent component selects a
plan of least cardinality. This module provides executable bodies for the
three components, a simulated world backing the obstacle oracle, fault
injection for exercising the monitors, and an independent breadth-first search
for checking that the selected plan is a shortest one.
"""
from collections import deque
from collections.abc import Callable, Iterator, Mapping
import dataclasses
import enum
import functools
import itertools
import logging
from pathlib import Path
import tomllib
from typing import Literal, TypeAlias, cast

from .errors import EmptyPlanSet, EnumerationCapExceeded, InvalidFault, InvalidWorld
from .evaluate import Coord, Interpretation, Value, adjacency, format_value, four_adjacent


log = logging.getLogger(__name__)


Plan: TypeAlias = frozenset[Coord]
Adjacency: TypeAlias = Callable[[Coord, Coord], bool]

DATA = Path(__file__).parent / 'data'

CAP = 100_000


def data_path(name: str) -> Path:
    """Resolve the name of a bundled data file."""
    return DATA / name


# ======================================================================================
# Worlds and Faults


class FaultKind(enum.Enum):
    PHANTOM_OBSTACLE = 'phantom-obstacle'
    CORRUPT_START = 'corrupt-start'
    DROP_PLAN_CONNECTIVITY = 'drop-plan-connectivity'
    PICK_NON_MINIMAL = 'pick-non-minimal'

    @property
    def target(self) -> str:
        """The component this kind of fault is injected into."""
        return _FAULT_TARGETS[self]

    @property
    def takes_cell(self) -> bool:
        return self in (FaultKind.PHANTOM_OBSTACLE, FaultKind.CORRUPT_START)


_FAULT_TARGETS = {
    FaultKind.PHANTOM_OBSTACLE: 'Detection',
    FaultKind.CORRUPT_START: 'Detection',
    FaultKind.DROP_PLAN_CONNECTIVITY: 'Planner',
    FaultKind.PICK_NON_MINIMAL: 'Agent',
}


@dataclasses.dataclass(frozen=True, slots=True)
class FaultSpec:
    target: str
    kind: FaultKind
    cell: None | Coord = None

    def __post_init__(self) -> None:
        if self.target != self.kind.target:
            raise InvalidFault(
                f'{self.kind.value} targets {self.kind.target}, not {self.target}'
            )
        if self.kind.takes_cell != (self.cell is not None):
            raise InvalidFault(
                f'{self.kind.value} {"requires" if self.kind.takes_cell else "takes no"} cell'
            )

    @classmethod
    def of(cls, kind: FaultKind, cell: None | Coord = None) -> 'FaultSpec':
        return cls(kind.target, kind, cell)


@dataclasses.dataclass(frozen=True, slots=True)
class WorldState:
    """
    The simulated world: an n by n grid, the ground truth about obstacles,
    the start cell, an optional goal cell, and the faults to inject.
    """

    n: int
    obstacles: frozenset[Coord]
    start: Coord
    goal: None | Coord = None
    faults: tuple[FaultSpec, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidWorld(f'grid size {self.n} is not positive')
        if not self.obstacles <= self.grid:
            raise InvalidWorld('obstacles outside the grid')
        for role, cell in (('start', self.start), ('goal', self.goal)):
            if cell is None:
                continue
            if cell not in self.grid:
                raise InvalidWorld(f'{role} {format_value(cell)} is outside the grid')
            if cell in self.obstacles:
                raise InvalidWorld(f'{role} {format_value(cell)} is an obstacle')

    @property
    def grid(self) -> frozenset[Coord]:
        return grid_of(self.n)

    def faults_for(self, component: str) -> tuple[FaultSpec, ...]:
        return tuple(f for f in self.faults if f.target == component)

    def with_faults(self, *faults: FaultSpec) -> 'WorldState':
        return dataclasses.replace(self, faults=tuple(faults))

    def interpretation(self, connectivity: int = 4) -> Interpretation:
        """The interpretation whose obstacle oracle is the ground truth."""
        return Interpretation.of(connectivity=connectivity, obstacles=self.obstacles)


@functools.lru_cache(maxsize=16)
def grid_of(n: int) -> frozenset[Coord]:
    """The cells of the n by n grid."""
    return frozenset(itertools.product(range(n), repeat=2))


def parse_cell(text: object) -> Coord:
    """Parse a cell written as ``"x,y"``."""
    if not isinstance(text, str):
        raise InvalidWorld(f'cell {text!r} is not a string')
    x, sep, y = text.partition(',')
    try:
        if not sep:
            raise ValueError()
        cell = int(x.strip()), int(y.strip())
    except ValueError:
        raise InvalidWorld(f'malformed cell "{text}"') from None
    if cell[0] < 0 or cell[1] < 0:
        raise InvalidWorld(f'cell "{text}" has negative coordinates')
    return cell


def _parse_fault(entry: object) -> FaultSpec:
    if not isinstance(entry, dict):
        raise InvalidFault(f'fault {entry!r} is not a table')
    entry = cast(dict[str, object], entry)
    try:
        kind = FaultKind(entry.get('kind'))
    except ValueError:
        raise InvalidFault(f'unknown fault kind {entry.get("kind")!r}') from None
    target = entry.get('target', kind.target)
    if not isinstance(target, str):
        raise InvalidFault(f'fault target {target!r} is not a string')
    cell = entry.get('cell')
    return FaultSpec(target, kind, None if cell is None else parse_cell(cell))


def parse_world(text: str, *, cap: int = CAP) -> WorldState:
    """
    Parse a world file, which is written in TOML.

    Raises:
        InvalidWorld: if the world is malformed
        EnumerationCapExceeded: if the grid has more cells than the cap
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as x:
        raise InvalidWorld(str(x)) from None

    n = data.get('n')
    if not isinstance(n, int):
        raise InvalidWorld('grid size "n" is missing or not an integer')
    if n * n > cap:
        raise EnumerationCapExceeded(cap, 'grid cells')
    obstacles = data.get('obstacles', [])
    if not isinstance(obstacles, list):
        raise InvalidWorld('"obstacles" is not a list')
    if 'start' not in data:
        raise InvalidWorld('"start" is missing')
    goal = data.get('goal')
    faults = data.get('faults', [])
    if not isinstance(faults, list):
        raise InvalidWorld('"faults" is not an array of tables')

    return WorldState(
        n,
        frozenset(parse_cell(c) for c in cast(list[object], obstacles)),
        parse_cell(data['start']),
        None if goal is None else parse_cell(goal),
        tuple(_parse_fault(f) for f in cast(list[object], faults)),
    )


def load_world(path: str | Path, *, cap: int = CAP) -> WorldState:
    with open(path, mode='rb') as file:
        return parse_world(file.read().decode('utf8'), cap=cap)


# ======================================================================================
# Component Bodies


def detection_body(world: WorldState, *, goal: bool = False) -> dict[str, Value]:
    """
    Report the grid, the obstacles, and the start cell of the world, applying
    any Detection faults. In goal mode, also report the goal.
    """
    obstacles = set(world.obstacles)
    start = world.start
    for fault in world.faults_for('Detection'):
        assert fault.cell is not None
        if fault.kind is FaultKind.PHANTOM_OBSTACLE:
            obstacles.add(fault.cell)
        else:
            start = fault.cell

    outputs: dict[str, Value] = {
        'n': world.n,
        'Grid': world.grid,
        'Obstacles': frozenset(obstacles),
        's0': start,
    }
    if goal:
        if world.goal is None:
            raise InvalidWorld('goal mode requires a goal')
        outputs['goal'] = world.goal
    return outputs


def satisfies_plan_guarantee(
    plan: Plan,
    grid: frozenset[Coord],
    obstacles: frozenset[Coord],
    s0: Coord,
    goal: None | Coord = None,
    adjacent: Adjacency = four_adjacent,
) -> bool:
    """
    Determine whether the plan meets the Planner's guarantee: it avoids
    obstacles, contains the start and one of its neighbors, and every other
    cell has neighbors in the plan. With a goal, the plan also contains the
    goal, one of the goal's neighbors, and the goal differs from the start.
    """
    if not plan <= grid - obstacles or s0 not in plan:
        return False
    if not any(adjacent(s0, cell) for cell in plan):
        return False
    for cell in plan:
        if cell == s0 or cell == goal:
            continue
        if not any(adjacent(other, cell) for other in plan):
            return False
    if goal is not None:
        if goal == s0 or goal not in plan:
            return False
        if not any(adjacent(cell, goal) for cell in plan):
            return False
    return True


_OFFSETS = {
    4: ((-1, 0), (0, -1), (0, 1), (1, 0)),
    8: tuple((dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy),
}


def neighbors_of(cell: Coord, cells: frozenset[Coord], connectivity: int = 4) -> list[Coord]:
    """The cells adjacent to the given cell that belong to cells, in sorted order."""
    adjacency(connectivity)  # rejects other connectivities
    x, y = cell
    return [
        (x + dx, y + dy) for dx, dy in _OFFSETS[connectivity] if (x + dx, y + dy) in cells
    ]


def _simple_paths(
    free: frozenset[Coord], s0: Coord, connectivity: int
) -> Iterator[tuple[Coord, ...]]:
    # Depth-first over simple paths starting at s0, in deterministic order.
    neighbors = {cell: neighbors_of(cell, free, connectivity) for cell in free}
    stack: list[tuple[Coord, ...]] = [(s0,)]
    while stack:
        path = stack.pop()
        yield path
        for cell in reversed(neighbors[path[-1]]):
            if cell not in path:
                stack.append(path + (cell,))


Candidates: TypeAlias = Literal['paths', 'subsets']


def planner_body(
    grid: frozenset[Coord],
    obstacles: frozenset[Coord],
    s0: Coord,
    goal: None | Coord = None,
    *,
    cap: int = CAP,
    candidates: Candidates = 'paths',
    connectivity: int = 4,
) -> frozenset[Plan]:
    """
    Compute the set of plans. By default, the candidates are the cell sets of
    simple paths starting at the start cell, and ending at the goal in goal
    mode. With ``candidates='subsets'``, the candidates are all subsets of the
    obstacle-free cells that contain the start cell. Either way, only
    candidates meeting the Planner's guarantee become plans.

    Raises:
        EnumerationCapExceeded: if there are more candidates than the cap
    """
    adjacent = adjacency(connectivity)
    free = grid - obstacles
    if s0 not in free or goal == s0:
        return frozenset()

    def accept(plan: Plan) -> bool:
        return satisfies_plan_guarantee(plan, grid, obstacles, s0, goal, adjacent)

    plans: set[Plan] = set()
    count = 0
    if candidates == 'subsets':
        others = sorted(free - {s0})
        if 2 ** len(others) > cap:
            raise EnumerationCapExceeded(cap)
        for size in range(len(others) + 1):
            for subset in itertools.combinations(others, size):
                count += 1
                plan = frozenset(subset) | {s0}
                if accept(plan):
                    plans.add(plan)
    else:
        for path in _simple_paths(free, s0, connectivity):
            count += 1
            if count > cap:
                raise EnumerationCapExceeded(cap)
            if goal is not None and path[-1] != goal:
                continue
            plan = frozenset(path)
            if accept(plan):
                plans.add(plan)

    log.debug('planner kept %d of %d candidates', len(plans), count)
    return frozenset(plans)


def plan_key(plan: Plan) -> tuple[int, list[Coord]]:
    """Order plans by cardinality and then by their sorted cells."""
    return len(plan), sorted(plan)


def agent_body(plan_set: frozenset[Plan]) -> Plan:
    """
    Select a plan of least cardinality, breaking ties by the sorted cells.

    Raises:
        EmptyPlanSet: if there are no plans
    """
    if not plan_set:
        raise EmptyPlanSet()
    return min(plan_set, key=plan_key)


def bfs_oracle(
    grid: frozenset[Coord],
    obstacles: frozenset[Coord],
    s0: Coord,
    goal: Coord,
    connectivity: int = 4,
) -> None | int:
    """
    Determine the number of cells on a shortest obstacle-free path from s0 to
    goal with breadth-first search. Return ``None`` if goal is unreachable.
    """
    free = grid - obstacles
    if s0 not in free or goal not in free:
        return None

    distance = {s0: 1}
    queue = deque([s0])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            return distance[cell]
        for other in neighbors_of(cell, free, connectivity):
            if other not in distance:
                distance[other] = distance[cell] + 1
                queue.append(other)
    return None


# ======================================================================================
# Faults


def drop_plan_connectivity(
    plan_set: frozenset[Plan], s0: Coord, adjacent: Adjacency = four_adjacent
) -> frozenset[Plan]:
    """Remove the neighbors of s0 from every plan."""
    return frozenset(
        frozenset(c for c in plan if not adjacent(s0, c)) for plan in plan_set
    )


def pick_non_minimal(plan_set: frozenset[Plan]) -> Plan:
    """
    Select the least plan of the second-smallest cardinality. If all plans
    have the same cardinality, fall back on the greatest plan.
    """
    if not plan_set:
        raise EmptyPlanSet()
    ordered = sorted(plan_set, key=plan_key)
    smallest = len(ordered[0])
    for plan in ordered:
        if len(plan) > smallest:
            return plan
    return ordered[-1]


# ======================================================================================
# Adapters


OnEmpty: TypeAlias = Literal['violate', 'raise']


def rover_inputs(world: WorldState, *, goal: bool = False) -> dict[str, Value]:
    """The system inputs for running the rover in the world."""
    inputs: dict[str, Value] = {'n': world.n}
    if goal:
        if world.goal is None:
            raise InvalidWorld('goal mode requires a goal')
        inputs['goal'] = world.goal
    return inputs


def rover_bodies(
    world: WorldState,
    *,
    goal: bool = False,
    connectivity: int = 4,
    cap: int = CAP,
    candidates: Candidates = 'paths',
    on_empty: OnEmpty = 'violate',
) -> dict[str, Callable[[Mapping[str, Value]], Mapping[str, Value]]]:
    """
    Create the bodies of Detection, Planner, and Agent for the world,
    injecting the world's faults. When the Agent receives no plans, it either
    outputs the empty plan, which violates its guarantee, or raises
    :class:`EmptyPlanSet`, depending on ``on_empty``.
    """
    adjacent = adjacency(connectivity)

    def detection(_: Mapping[str, Value]) -> Mapping[str, Value]:
        return detection_body(world, goal=goal)

    def planner(inputs: Mapping[str, Value]) -> Mapping[str, Value]:
        grid = cast(frozenset[Coord], inputs['Grid'])
        obstacles = cast(frozenset[Coord], inputs['Obstacles'])
        s0 = cast(Coord, inputs['s0'])
        target = cast(Coord, inputs['goal']) if goal else None

        plan_set = planner_body(
            grid, obstacles, s0, target,
            cap=cap, candidates=candidates, connectivity=connectivity,
        )
        for fault in world.faults_for('Planner'):
            if fault.kind is FaultKind.DROP_PLAN_CONNECTIVITY:
                plan_set = drop_plan_connectivity(plan_set, s0, adjacent)

        outputs: dict[str, Value] = {
            'Grid': grid, 'Obstacles': obstacles, 's0': s0, 'PlanSet': plan_set
        }
        if goal:
            outputs['goal'] = cast(Coord, target)
        return outputs

    def agent(inputs: Mapping[str, Value]) -> Mapping[str, Value]:
        plan_set = cast(frozenset[Plan], inputs['PlanSet'])
        select = agent_body
        if any(f.kind is FaultKind.PICK_NON_MINIMAL for f in world.faults_for('Agent')):
            select = pick_non_minimal
        try:
            return {'plan': select(plan_set)}
        except EmptyPlanSet:
            if on_empty == 'raise':
                raise
            log.warning('agent received no plans')
            return {'plan': frozenset()}

    return {'Detection': detection, 'Planner': planner, 'Agent': agent}


# ======================================================================================
# Rendering


def render_world(world: WorldState, plan: None | Plan = None) -> list[str]:
    """
    Render the world as rows of characters, with the row for the largest y
    first: ``S`` marks the start, ``G`` the goal, ``#`` obstacles, ``*`` plan
    cells, and ``.`` free cells.
    """
    rows: list[str] = []
    for y in reversed(range(world.n)):
        row: list[str] = []
        for x in range(world.n):
            cell = (x, y)
            if cell == world.start:
                row.append('S')
            elif cell == world.goal:
                row.append('G')
            elif cell in world.obstacles:
                row.append('#')
            elif plan is not None and cell in plan:
                row.append('*')
            else:
                row.append('.')
        rows.append(' '.join(row))
    return rows


def format_plan(
    world: WorldState, plan: None | Plan, shortest: None | int = None
) -> str:
    """Format the plan file, which describes the final plan of a run."""
    lines = ['plan: ' + ('-' if plan is None else format_value(plan))]
    if plan is not None:
        lines.append(f'cardinality: {len(plan)}')
    if world.goal is not None:
        lines.append('shortest: ' + ('unreachable' if shortest is None else str(shortest)))
    lines.append('')
    lines.extend(render_world(world, plan))
    return '\n'.join(lines) + '\n'
