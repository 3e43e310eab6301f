import itertools
import os
import random
import unittest

from contractchain.dsl import load_contracts, load_system
from contractchain.errors import (
    BodyFailure, ConfigError, EmptyPlanSet, EnumerationCapExceeded, InvalidFault,
    InvalidWorld,
)
from contractchain.evaluate import Env, eight_adjacent, evaluate, four_adjacent
from contractchain.monitor import (
    Bindings, EventLog, Halted, Outcome, Phase, Policy, run_pipeline, wrap,
)
from contractchain.rover import (
    CAP, FaultKind, FaultSpec, WorldState, agent_body, bfs_oracle, data_path,
    detection_body, drop_plan_connectivity, format_plan, grid_of, load_world,
    neighbors_of, parse_cell, parse_world, pick_non_minimal, planner_body, render_world,
    rover_bodies, rover_inputs,
)


BASE = load_contracts(data_path('rover.agc'))
BASE_GRAPH = load_system(data_path('rover.sys'), BASE)
GOAL = load_contracts(data_path('rover_goal.agc'))
GOAL_GRAPH = load_system(data_path('rover_goal.sys'), GOAL)

EXHAUSTIVE = os.environ.get('CONTRACTCHAIN_EXHAUSTIVE') == '1'

CENTER_BLOCK = WorldState(3, frozenset({(1, 1)}), (0, 0), (2, 2))
TWO_BY_TWO = grid_of(2)


def worlds(n: int, max_obstacles: int = 3) -> list[WorldState]:
    """All worlds of size n with a reachable goal distinct from the start."""
    grid = sorted(grid_of(n))
    result: list[WorldState] = []
    for count in range(max_obstacles + 1):
        for blocked in itertools.combinations(grid, count):
            obstacles = frozenset(blocked)
            free = [c for c in grid if c not in obstacles]
            for start, goal in itertools.permutations(free, 2):
                if bfs_oracle(grid_of(n), obstacles, start, goal) is not None:
                    result.append(WorldState(n, obstacles, start, goal))
    return result


def sample_worlds(rng: random.Random, n: int, count: int) -> list[WorldState]:
    """Draw worlds of size n with up to three obstacles and a reachable goal."""
    grid = sorted(grid_of(n))
    result: list[WorldState] = []
    while len(result) < count:
        obstacles = frozenset(rng.sample(grid, rng.randint(0, 3)))
        free = [c for c in grid if c not in obstacles]
        start, goal = rng.sample(free, 2)
        if bfs_oracle(grid_of(n), obstacles, start, goal) is not None:
            result.append(WorldState(n, obstacles, start, goal))
    return result


class TestRover(unittest.TestCase):

    def test_parse_world(self) -> None:
        world = load_world(data_path('w2_center_block.world'))
        self.assertEqual(world, CENTER_BLOCK)
        self.assertEqual(len(world.grid), 9)

        world = load_world(data_path('w2_corrupt_start.world'))
        self.assertEqual(
            world.faults, (FaultSpec('Detection', FaultKind.CORRUPT_START, (1, 1)),)
        )
        self.assertEqual(world.faults_for('Planner'), ())

        world = parse_world('n = 2\nstart = " 1 , 0 "\n')
        self.assertEqual((world.start, world.goal, world.obstacles), ((1, 0), None, frozenset()))

    def test_invalid_worlds(self) -> None:
        cases: list[tuple[str, type[Exception], str]] = [
            ('not TOML', InvalidWorld, 'n = \n'),
            ('missing size', InvalidWorld, 'start = "0,0"'),
            ('size not positive', InvalidWorld, 'n = 0\nstart = "0,0"'),
            ('missing start', InvalidWorld, 'n = 2'),
            ('malformed cell', InvalidWorld, 'n = 2\nstart = "0;0"'),
            ('negative cell', InvalidWorld, 'n = 2\nstart = "-1,0"'),
            ('cell not a string', InvalidWorld, 'n = 2\nstart = [0, 0]'),
            ('start off the grid', InvalidWorld, 'n = 2\nstart = "2,0"'),
            ('start on obstacle', InvalidWorld, 'n = 2\nobstacles = ["0,0"]\nstart = "0,0"'),
            ('goal on obstacle', InvalidWorld,
             'n = 2\nobstacles = ["1,1"]\nstart = "0,0"\ngoal = "1,1"'),
            ('obstacle off the grid', InvalidWorld, 'n = 2\nobstacles = ["3,3"]\nstart = "0,0"'),
            ('unknown fault', InvalidFault,
             'n = 2\nstart = "0,0"\n[[faults]]\nkind = "teleport"'),
            ('fault in wrong component', InvalidFault,
             'n = 2\nstart = "0,0"\n[[faults]]\ntarget = "Agent"\nkind = "corrupt-start"\ncell = "1,1"'),
            ('fault without cell', InvalidFault,
             'n = 2\nstart = "0,0"\n[[faults]]\nkind = "phantom-obstacle"'),
            ('fault with cell', InvalidFault,
             'n = 2\nstart = "0,0"\n[[faults]]\nkind = "pick-non-minimal"\ncell = "1,1"'),
        ]
        for label, error, text in cases:
            with self.subTest(label):
                with self.assertRaises(error):
                    parse_world(text)

    def test_faults(self) -> None:
        self.assertEqual(FaultKind.PHANTOM_OBSTACLE.target, 'Detection')
        self.assertEqual(FaultKind.DROP_PLAN_CONNECTIVITY.target, 'Planner')
        self.assertEqual(FaultKind.PICK_NON_MINIMAL.target, 'Agent')
        self.assertEqual(
            FaultSpec.of(FaultKind.CORRUPT_START, (2, 2)),
            FaultSpec('Detection', FaultKind.CORRUPT_START, (2, 2)),
        )
        self.assertEqual(parse_cell('3,4'), (3, 4))

    def test_detection(self) -> None:
        world = CENTER_BLOCK.with_faults(FaultSpec.of(FaultKind.PHANTOM_OBSTACLE, (5, 5)))
        outputs = detection_body(world)
        self.assertEqual(outputs['Obstacles'], frozenset({(1, 1), (5, 5)}))
        self.assertEqual(outputs['s0'], (0, 0))
        self.assertNotIn('goal', outputs)

        self.assertEqual(detection_body(CENTER_BLOCK, goal=True)['goal'], (2, 2))
        with self.assertRaises(InvalidWorld):
            detection_body(WorldState(2, frozenset(), (0, 0)), goal=True)
        with self.assertRaises(InvalidWorld):
            rover_inputs(WorldState(2, frozenset(), (0, 0)), goal=True)
        self.assertEqual(rover_inputs(CENTER_BLOCK, goal=True), {'n': 3, 'goal': (2, 2)})

    def test_planner_candidates(self) -> None:
        # The literal guarantee admits the set {s0, (0, 1), (1, 0)}, which no
        # simple path visits exactly.
        paths = planner_body(TWO_BY_TWO, frozenset(), (0, 0))
        subsets = planner_body(TWO_BY_TWO, frozenset(), (0, 0), candidates='subsets')
        self.assertEqual(len(paths), 5)
        self.assertEqual(len(subsets), 6)
        self.assertEqual(subsets - paths, {frozenset({(0, 0), (0, 1), (1, 0)})})

        plans = planner_body(grid_of(3), frozenset({(1, 1)}), (0, 0), (2, 2))
        self.assertTrue(plans)
        self.assertTrue(all((2, 2) in p and (1, 1) not in p for p in plans))
        self.assertEqual(min(len(p) for p in plans), 5)

        with self.subTest('no plans'):
            self.assertEqual(planner_body(TWO_BY_TWO, frozenset(), (0, 0), (0, 0)), frozenset())
            self.assertEqual(planner_body(TWO_BY_TWO, frozenset({(0, 0)}), (0, 0)), frozenset())
            walled = frozenset({(1, 0), (0, 1)})
            self.assertEqual(planner_body(grid_of(3), walled, (0, 0)), frozenset())

    def test_planner_cap(self) -> None:
        with self.assertRaises(EnumerationCapExceeded) as context:
            planner_body(grid_of(3), frozenset(), (0, 0), cap=5)
        self.assertEqual(context.exception.cap, 5)
        with self.assertRaises(EnumerationCapExceeded):
            planner_body(grid_of(3), frozenset(), (0, 0), cap=100, candidates='subsets')

    def test_grid_cap(self) -> None:
        with self.assertRaises(EnumerationCapExceeded) as context:
            parse_world('n = 5000\nstart = "0,0"\n')
        self.assertEqual(context.exception.cap, CAP)
        self.assertEqual(str(context.exception), 'exceeded cap of 100,000 grid cells')

        self.assertEqual(parse_world('n = 316\nstart = "0,0"\n').n, 316)
        with self.assertRaises(EnumerationCapExceeded):
            parse_world('n = 4\nstart = "0,0"\n', cap=15)

    def test_neighbors(self) -> None:
        grid = grid_of(3)
        self.assertEqual(neighbors_of((0, 0), grid), [(0, 1), (1, 0)])
        self.assertEqual(neighbors_of((1, 1), grid), [(0, 1), (1, 0), (1, 2), (2, 1)])
        self.assertEqual(neighbors_of((1, 1), grid - {(1, 0)}), [(0, 1), (1, 2), (2, 1)])
        self.assertEqual(neighbors_of((0, 0), grid, 8), [(0, 1), (1, 0), (1, 1)])
        self.assertEqual(len(neighbors_of((1, 1), grid, 8)), 8)
        with self.assertRaises(ConfigError):
            neighbors_of((0, 0), grid, 6)

        # Neighbors agree with the interpreted adjacency predicates.
        for connectivity, adjacent in ((4, four_adjacent), (8, eight_adjacent)):
            for cell in grid:
                with self.subTest('adjacency', connectivity=connectivity, cell=cell):
                    self.assertEqual(
                        neighbors_of(cell, grid, connectivity),
                        sorted(c for c in grid if adjacent(cell, c)),
                    )

    def test_agent(self) -> None:
        plans = planner_body(TWO_BY_TWO, frozenset(), (0, 0))
        self.assertEqual(agent_body(plans), frozenset({(0, 0), (0, 1)}))
        self.assertEqual(pick_non_minimal(plans), frozenset({(0, 0), (0, 1), (1, 1)}))

        same = frozenset({frozenset({(0, 0), (0, 1)}), frozenset({(0, 0), (1, 0)})})
        self.assertEqual(pick_non_minimal(same), frozenset({(0, 0), (1, 0)}))

        with self.assertRaises(EmptyPlanSet):
            agent_body(frozenset())
        with self.assertRaises(EmptyPlanSet):
            pick_non_minimal(frozenset())

        dropped = drop_plan_connectivity(plans, (0, 0))
        self.assertIn(frozenset({(0, 0)}), dropped)
        self.assertIn(frozenset({(0, 0), (1, 1)}), dropped)

    def test_bfs_oracle(self) -> None:
        self.assertEqual(bfs_oracle(grid_of(3), frozenset({(1, 1)}), (0, 0), (2, 2)), 5)
        self.assertEqual(bfs_oracle(grid_of(3), frozenset(), (1, 1), (1, 1)), 1)
        self.assertEqual(bfs_oracle(grid_of(3), frozenset(), (0, 0), (2, 2), 8), 3)
        walled = frozenset({(1, 0), (0, 1)})
        self.assertIsNone(bfs_oracle(grid_of(3), walled, (0, 0), (2, 2)))
        self.assertIsNone(bfs_oracle(grid_of(3), walled, (1, 0), (2, 2)))

    def test_rendering(self) -> None:
        plan = frozenset({(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)})
        self.assertEqual(render_world(CENTER_BLOCK), ['. . G', '. # .', 'S . .'])
        self.assertEqual(render_world(CENTER_BLOCK, plan), ['. . G', '. # *', 'S * *'])
        self.assertEqual(format_plan(CENTER_BLOCK, plan, 5), (
            'plan: {(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)}\n'
            'cardinality: 5\n'
            'shortest: 5\n'
            '\n'
            '. . G\n'
            '. # *\n'
            'S * *\n'
        ))
        self.assertEqual(
            format_plan(WorldState(2, frozenset(), (0, 0)), None).splitlines()[0], 'plan: -'
        )

    def test_case_study(self) -> None:
        world = load_world(data_path('w2_center_block.world'))
        result = run_pipeline(
            GOAL_GRAPH,
            rover_bodies(world, goal=True),
            rover_inputs(world, goal=True),
            Policy.HALT_ON_VIOLATION,
            interp=world.interpretation(),
        )
        self.assertTrue(result.ok)
        self.assertEqual(len(result.events), 6)
        self.assertTrue(all(e.verdict is Outcome.PASS for e in result.events))
        plan = result.final['plan']
        assert isinstance(plan, frozenset)
        self.assertEqual(len(plan), 5)

    def test_monitor_transparency(self) -> None:
        world = CENTER_BLOCK
        bodies = rover_bodies(world)
        result = run_pipeline(
            BASE_GRAPH, bodies, rover_inputs(world), Policy.LOG_AND_CONTINUE,
            interp=world.interpretation(),
        )

        detected = bodies['Detection']({'n': 3})
        planned = bodies['Planner']({'n': 3, **detected})
        chosen = bodies['Agent'](planned)
        self.assertEqual(result.final, {'n': 3, **detected, **planned, **chosen})

    def test_planner_rejects_bad_obstacles(self) -> None:
        planner = BASE[1]
        called: list[Bindings] = []

        def body(inputs: Bindings) -> Bindings:
            called.append(inputs)
            return {}

        monitored = wrap(planner, body, Policy.HALT_ON_VIOLATION)
        events = EventLog()
        step = monitored.run(
            {'n': 2, 'Grid': TWO_BY_TWO, 'Obstacles': frozenset({(5, 5)}), 's0': (0, 0)},
            events,
        )
        self.assertEqual(step.halted, Phase.INPUT_CHECKED)
        self.assertEqual([e.verdict for e in events], [Outcome.VIOLATION])
        self.assertEqual(called, [])

    def test_unreachable(self) -> None:
        world = load_world(data_path('w3_unreachable.world'))
        result = run_pipeline(
            BASE_GRAPH, rover_bodies(world), rover_inputs(world),
            Policy.HALT_ON_VIOLATION, interp=world.interpretation(),
        )
        self.assertEqual(result.final['PlanSet'], frozenset())
        self.assertEqual(result.final['plan'], frozenset())
        self.assertEqual(
            [(e.component, e.phase) for e in result.violations],
            [('Agent', Phase.OUTPUT_CHECKED)],
        )

        with self.assertRaises(BodyFailure) as context:
            run_pipeline(
                BASE_GRAPH, rover_bodies(world, on_empty='raise'), rover_inputs(world),
                Policy.HALT_ON_VIOLATION, interp=world.interpretation(),
            )
        self.assertEqual(context.exception.component, 'Agent')
        self.assertIsInstance(context.exception.cause, EmptyPlanSet)

    def test_singleton_worlds(self) -> None:
        # A plan must leave s0, so a one-cell grid has no plans, and the Agent
        # cannot satisfy plan in PlanSet.
        world = WorldState(1, frozenset(), (0, 0))
        result = run_pipeline(
            BASE_GRAPH, rover_bodies(world), rover_inputs(world),
            Policy.HALT_ON_VIOLATION, interp=world.interpretation(),
        )
        self.assertEqual(
            [(e.component, e.phase, e.verdict) for e in result.events],
            [
                ('Detection', Phase.INPUT_CHECKED, Outcome.PASS),
                ('Detection', Phase.OUTPUT_CHECKED, Outcome.PASS),
                ('Planner', Phase.INPUT_CHECKED, Outcome.PASS),
                ('Planner', Phase.OUTPUT_CHECKED, Outcome.PASS),
                ('Agent', Phase.INPUT_CHECKED, Outcome.PASS),
                ('Agent', Phase.OUTPUT_CHECKED, Outcome.VIOLATION),
            ],
        )
        self.assertEqual(result.final['Grid'], frozenset({(0, 0)}))
        self.assertEqual(result.final['PlanSet'], frozenset())
        self.assertEqual(result.final['plan'], frozenset())
        self.assertEqual(result.halted, Halted('Agent', Phase.OUTPUT_CHECKED))

        # Likewise, a mission whose goal is its start has no plans.
        world = WorldState(3, frozenset(), (1, 1), (1, 1))
        self.assertEqual(bfs_oracle(world.grid, world.obstacles, world.start, (1, 1)), 1)
        result = run_pipeline(
            GOAL_GRAPH, rover_bodies(world, goal=True), rover_inputs(world, goal=True),
            Policy.HALT_ON_VIOLATION, interp=world.interpretation(),
        )
        self.assertEqual(len(result.events), 6)
        self.assertEqual(
            [(e.component, e.formula) for e in result.violations], [('Agent', 'G_Agent')]
        )
        self.assertEqual(result.final['PlanSet'], frozenset())
        self.assertEqual(result.final['plan'], frozenset())

        with self.assertRaises(BodyFailure) as context:
            run_pipeline(
                GOAL_GRAPH,
                rover_bodies(world, goal=True, on_empty='raise'),
                rover_inputs(world, goal=True),
                Policy.HALT_ON_VIOLATION,
                interp=world.interpretation(),
            )
        self.assertIsInstance(context.exception.cause, EmptyPlanSet)

    def test_fault_worlds(self) -> None:
        expected = {
            'w2_phantom_obstacle.world': 'Detection',
            'w2_corrupt_start.world': 'Detection',
            'w2_drop_connectivity.world': 'Planner',
            'w2_pick_non_minimal.world': 'Agent',
        }
        for name, component in expected.items():
            with self.subTest('fault', world=name):
                world = load_world(data_path(name))
                self.assertEqual([f.target for f in world.faults], [component])
                interp = world.interpretation()
                result = run_pipeline(
                    BASE_GRAPH, rover_bodies(world), rover_inputs(world),
                    Policy.HALT_ON_VIOLATION, interp=interp,
                )

                self.assertEqual(len(result.violations), 1)
                violation = result.violations[0]
                self.assertEqual(
                    (violation.component, violation.phase, violation.formula),
                    (component, Phase.OUTPUT_CHECKED, f'G_{component}'),
                )
                self.assertIs(result.events[-1], violation)
                assert result.halted is not None
                self.assertEqual(result.halted.component, component)

                # Replaying the bindings reproduces the violation.
                guarantee = BASE_GRAPH.component(component).guarantee
                self.assertFalse(evaluate(guarantee, Env(violation.bindings, interp)))

    def check_worlds(self, sample: list[WorldState]) -> None:
        for world in sample:
            with self.subTest('world', n=world.n, obstacles=sorted(world.obstacles),
                              start=world.start, goal=world.goal):
                assert world.goal is not None
                shortest = bfs_oracle(world.grid, world.obstacles, world.start, world.goal)
                result = run_pipeline(
                    GOAL_GRAPH,
                    rover_bodies(world, goal=True),
                    rover_inputs(world, goal=True),
                    Policy.HALT_ON_VIOLATION,
                    interp=world.interpretation(),
                )
                self.assertEqual(result.violations, [])
                plan = result.final['plan']
                assert isinstance(plan, frozenset)
                self.assertEqual(len(plan), shortest)

    def test_shortest_plans(self) -> None:
        for n in (2, 3):
            self.check_worlds(worlds(n))

    def test_shortest_plans_four_by_four(self) -> None:
        # Set CONTRACTCHAIN_EXHAUSTIVE=1 to check every world.
        if EXHAUSTIVE:
            self.check_worlds(worlds(4))
        else:
            self.check_worlds(sample_worlds(random.Random(0xA11), 4, 40))
