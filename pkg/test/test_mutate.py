import itertools
import random
import unittest

from contractchain.compose import ORACLE, Obligation, Status, obligation_for, replay
from contractchain.contract import Contract, Direction, Link, Port, SystemGraph, system_of
from contractchain.dsl import parse_contract_file, parse_system_file
from contractchain.evaluate import DomainBounds, domain, four_adjacent
from contractchain.logic import COORD, NAT, Lt, SemType, Var, set_of
from contractchain.mutate import (
    Mutant, Operator, at_path, format_mutations, mutants, mutate_assumption,
    mutation_campaign, replace_at, sample_mutants,
)

from .generators import VARIABLES, FormulaGenerator, parse_formula
from .reference import reference_holds


CELLS = set_of(COORD)
BOUNDS = DomainBounds(max_n=2, max_card=2, max_plans=2)

UPSTREAM: dict[str, SemType] = {'S': CELLS, 'c': COORD, 'i': NAT}
DOWNSTREAM: dict[str, SemType] = {'T': CELLS, 'd': COORD, 'j': NAT}


def random_system(rng: random.Random) -> SystemGraph:
    """A source and a sink linked by equal ports, with random contracts."""
    generator = FormulaGenerator(rng, max_literal=2)
    source = Contract(
        'Source',
        (),
        tuple(Port(n, t, Direction.OUTPUT) for n, t in UPSTREAM.items()),
        guarantee=generator.formula(UPSTREAM, 2),
    )
    sink = Contract(
        'Sink',
        tuple(Port(n, t) for n, t in DOWNSTREAM.items()),
        (),
        assumption=generator.formula(DOWNSTREAM, 3),
    )
    link = Link('Source', 'Sink', tuple(zip(UPSTREAM, DOWNSTREAM)))
    return system_of([source, sink], link)


def brute_force(obligation: Obligation) -> bool:
    """Check the obligation with the reference interpreter over all environments."""
    names = [v.name for v in obligation.variables]
    values = [domain(v.type, obligation.bounds) for v in obligation.variables]
    for combination in itertools.product(*values):
        bindings = dict(zip(names, combination))
        obstacles = bindings.pop(ORACLE, frozenset())
        assert isinstance(obstacles, frozenset)
        if not reference_holds(
            obligation.formula, bindings, four_adjacent, obstacles.__contains__
        ):
            return False
    return True


class TestMutate(unittest.TestCase):

    def test_comparison_mutants(self) -> None:
        found = mutants(parse_formula('i < j'), VARIABLES)
        self.assertEqual([str(m) for m in found], ['flip-comparison@root', 'negate-atom@root'])
        self.assertEqual(
            [str(m.formula) for m in found], ['i <= j', 'not i < j']
        )

    def test_ill_typed_mutants_are_discarded(self) -> None:
        formula = parse_formula('c in S')
        self.assertEqual(
            [m.operator for m in mutants(formula, VARIABLES)], [Operator.NEGATE_ATOM]
        )
        self.assertEqual(
            [m.operator for m in mutants(formula)],
            [Operator.SWAP_ARGUMENTS, Operator.NEGATE_ATOM],
        )

        formula = parse_formula('S subset T')
        self.assertEqual(
            [str(m.formula) for m in mutants(formula, VARIABLES)],
            ['T subset S', 'not S subset T'],
        )

    def test_structural_mutants(self) -> None:
        formula = parse_formula('forall p in P . c in p and i < j')
        found = [(str(m), str(m.formula)) for m in mutants(formula, VARIABLES)]
        self.assertEqual(found, [
            ('swap-quantifier@root', 'exists p in P . c in p and i < j'),
            ('drop-conjunct@0', 'forall p in P . i < j'),
            ('drop-conjunct@0', 'forall p in P . c in p'),
            ('swap-connective@0', 'forall p in P . c in p or i < j'),
            ('negate-atom@0.0', 'forall p in P . not c in p and i < j'),
            ('flip-comparison@0.1', 'forall p in P . c in p and i <= j'),
            ('negate-atom@0.1', 'forall p in P . c in p and not i < j'),
        ])

    def test_duplicates_are_discarded(self) -> None:
        found = mutants(parse_formula('i < j and i < j'), VARIABLES)
        drops = [m for m in found if m.operator is Operator.DROP_CONJUNCT]
        self.assertEqual(len(drops), 1)
        self.assertEqual(str(drops[0].formula), 'i < j')

        keys = [str(m.formula) for m in found]
        self.assertEqual(len(keys), len(set(keys)))

    def test_paths(self) -> None:
        formula = parse_formula('b = b => not (i < j or c in S)')
        self.assertEqual(str(at_path(formula, (1, 0, 1))), 'c in S')
        replaced = replace_at(formula, (1, 0, 1), parse_formula('c in T'))
        self.assertEqual(str(replaced), 'b = b => not (i < j or c in T)')
        self.assertEqual(replace_at(formula, (), formula), formula)
        with self.assertRaises(IndexError):
            replace_at(parse_formula('i < j'), (0,), formula)

    def test_sampling(self) -> None:
        formula = parse_formula(
            'forall p in P . c in p and i < j and (exists d in S . adjacent(c, d))'
        )
        everything = mutants(formula, VARIABLES)
        sample = sample_mutants(formula, 3, 7, VARIABLES)
        self.assertEqual(len(sample), 3)
        self.assertEqual(sample, sample_mutants(formula, 3, 7, VARIABLES))
        indices = [everything.index(m) for m in sample]
        self.assertEqual(indices, sorted(indices))
        self.assertEqual(sample_mutants(formula, 1_000, 7, VARIABLES), everything)

    def test_mutate_assumption(self) -> None:
        graph = random_system(random.Random(1))
        mutated = mutate_assumption(graph, 'Sink', Lt(Var('j'), Var('j')))
        self.assertEqual(mutated.component('Sink').assumption, Lt(Var('j'), Var('j')))
        self.assertEqual(mutated.component('Source'), graph.component('Source'))
        self.assertEqual(mutated.links, graph.links)

    def test_campaign(self) -> None:
        contracts = parse_contract_file(
            'component Source { out x : nat; guarantee x < 2; }\n'
            'component Sink { in y : nat; assume y < 2; }\n'
        )
        graph = parse_system_file('link Source.x -> Sink.y equal;', contracts)
        results = mutation_campaign(graph, 10, 0, DomainBounds(max_n=3))

        self.assertEqual(
            [(str(r.mutant), r.verdict.status) for r in results],
            [('flip-comparison@root', Status.DISCHARGED), ('negate-atom@root', Status.REFUTED)],
        )
        self.assertEqual(format_mutations(results), (
            '\n'
            'mutants\n'
            '  Source->Sink: 2 generated, 1 killed, 1 survived, 0 exhausted\n'
            '    flip-comparison@root discharged\n'
        ))

    def test_refutation_soundness(self) -> None:
        rng = random.Random(0xB0B)
        checked = 0
        while checked < 100:
            graph = random_system(rng)
            link = graph.links[0]
            for result in mutation_campaign(graph, 5, rng.randrange(1 << 16), BOUNDS):
                mutant: Mutant = result.mutant
                verdict = result.verdict
                mutated = mutate_assumption(graph, 'Sink', mutant.formula)

                obligation = obligation_for(mutated, link, BOUNDS)
                self.assertIsNot(verdict.status, Status.EXHAUSTED)

                with self.subTest('mutant', index=checked, mutant=str(mutant.formula)):
                    if verdict.status is Status.REFUTED:
                        self.assertFalse(replay(obligation, verdict))
                        bindings = dict(verdict.counterexample or {})
                        obstacles = bindings.pop(ORACLE, frozenset())
                        assert isinstance(obstacles, frozenset)
                        self.assertFalse(reference_holds(
                            obligation.formula, bindings, four_adjacent,
                            obstacles.__contains__,
                        ))
                    else:
                        self.assertTrue(brute_force(obligation))
                checked += 1
