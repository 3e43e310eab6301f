"""
Seeded random generators for well-typed formulas, environments, and contracts.
"""
import random

from contractchain.contract import Contract, Direction, Port
from contractchain.dsl import parse_contract_file
from contractchain.evaluate import DomainBounds, domain
from contractchain.logic import (
    BOOL, COORD, NAT, Adjacent, And, CardLeq, Const, Diff, Eq, Exists, Forall,
    Formula, Implies, In, Leq, Lit, Lt, Neq, Not, ObstacleOracle, Or, Pair, SemType,
    SubsetEq, Term, Value, Var, set_of,
)


CELLS = set_of(COORD)
PLANS = set_of(CELLS)

VARIABLES: dict[str, SemType] = {
    'i': NAT, 'j': NAT, 'c': COORD, 'd': COORD, 'S': CELLS, 'T': CELLS,
    'P': PLANS, 'b': BOOL,
}

# Small enough for sets of sets to enumerate quickly.
SMALL_BOUNDS = DomainBounds(max_n=2, max_card=3, max_plans=2)


class FormulaGenerator:
    """Generate random formulas that type check under the given variables."""

    def __init__(self, rng: random.Random, max_literal: int = 3) -> None:
        self.rng = rng
        self.max_literal = max_literal
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f'v{self.counter}'

    def _named(self, type: SemType, scope: dict[str, SemType]) -> list[str]:
        return [name for name, t in scope.items() if t == type]

    def can_make(self, type: SemType, scope: dict[str, SemType]) -> bool:
        return not type.is_set and type != BOOL or bool(self._named(type, scope))

    def term(self, type: SemType, scope: dict[str, SemType], depth: int = 1) -> Term:
        rng = self.rng
        names = self._named(type, scope)
        if type == NAT:
            if names and rng.random() < 0.6:
                return Var(rng.choice(names))
            return Lit(rng.randrange(self.max_literal))
        if type == COORD:
            if names and rng.random() < 0.6:
                return Var(rng.choice(names))
            return Pair(self.term(NAT, scope, depth), self.term(NAT, scope, depth))
        assert names, f'no variable of type {type}'
        if type.is_set and depth > 0 and rng.random() < 0.2:
            return Diff(self.term(type, scope, depth - 1), self.term(type, scope, depth - 1))
        return Var(rng.choice(names))

    def atom(self, scope: dict[str, SemType]) -> Formula:
        rng = self.rng
        options: list[str] = ['lt', 'leq', 'eq-nat', 'neq-coord', 'adjacent', 'obstacle', 'const']
        if self.can_make(CELLS, scope):
            options += ['in', 'subset', 'card', 'eq-set']
        if self.can_make(PLANS, scope) and self.can_make(CELLS, scope):
            options += ['in-plans']
        if self.can_make(BOOL, scope):
            options += ['eq-bool']

        match rng.choice(options):
            case 'lt':
                return Lt(self.term(NAT, scope), self.term(NAT, scope))
            case 'leq':
                return Leq(self.term(NAT, scope), self.term(NAT, scope))
            case 'eq-nat':
                return Eq(self.term(NAT, scope), self.term(NAT, scope))
            case 'neq-coord':
                return Neq(self.term(COORD, scope), self.term(COORD, scope))
            case 'adjacent':
                return Adjacent(self.term(COORD, scope), self.term(COORD, scope))
            case 'obstacle':
                return ObstacleOracle(self.term(COORD, scope))
            case 'const':
                return Const(rng.random() < 0.5)
            case 'in':
                return In(self.term(COORD, scope), self.term(CELLS, scope))
            case 'subset':
                return SubsetEq(self.term(CELLS, scope), self.term(CELLS, scope))
            case 'card':
                return CardLeq(self.term(CELLS, scope), self.term(CELLS, scope))
            case 'eq-set':
                return Eq(self.term(CELLS, scope), self.term(CELLS, scope))
            case 'in-plans':
                return In(self.term(CELLS, scope), self.term(PLANS, scope))
            case _:
                return Eq(self.term(BOOL, scope), self.term(BOOL, scope))

    def formula(self, scope: dict[str, SemType], depth: int = 3) -> Formula:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.25:
            return self.atom(scope)

        options = ['not', 'and', 'or', 'implies']
        if self.can_make(CELLS, scope) or self.can_make(PLANS, scope):
            options += ['forall', 'exists']

        choice = rng.choice(options)
        if choice == 'not':
            return Not(self.formula(scope, depth - 1))
        if choice in ('and', 'or'):
            operands = tuple(
                self.formula(scope, depth - 1) for _ in range(rng.randint(2, 3))
            )
            return And(operands) if choice == 'and' else Or(operands)
        if choice == 'implies':
            return Implies(self.formula(scope, depth - 1), self.formula(scope, depth - 1))

        quantifier = Forall if choice == 'forall' else Exists
        domains = [t for t in (CELLS, PLANS) if self.can_make(t, scope)]
        domain_type = rng.choice(domains)
        domain_term = self.term(domain_type, scope)
        inner = dict(scope)
        if domain_type == CELLS and rng.random() < 0.4:
            x, y = self.fresh(), self.fresh()
            inner[x] = inner[y] = NAT
            return quantifier((x, y), domain_term, self.formula(inner, depth - 1))

        name = self.fresh()
        assert domain_type.element is not None
        inner[name] = domain_type.element
        return quantifier(name, domain_term, self.formula(inner, depth - 1))


def random_env(
    rng: random.Random,
    types: dict[str, SemType] = VARIABLES,
    bounds: DomainBounds = SMALL_BOUNDS,
) -> dict[str, Value]:
    return {name: rng.choice(domain(type, bounds)) for name, type in types.items()}


def random_obstacles(rng: random.Random, bounds: DomainBounds = SMALL_BOUNDS) -> frozenset[tuple[int, int]]:
    cells = [(x, y) for x in range(bounds.max_n) for y in range(bounds.max_n)]
    return frozenset(c for c in cells if rng.random() < 0.3)


def random_contract(rng: random.Random, name: str) -> Contract:
    """
    Generate a contract whose ports are a random split of the standard
    variables into inputs and outputs.
    """
    names = list(VARIABLES)
    rng.shuffle(names)
    cut = rng.randint(1, len(names) - 1)
    inputs = {n: VARIABLES[n] for n in names[:cut]}
    everything = dict(VARIABLES)

    generator = FormulaGenerator(rng)
    return Contract(
        name,
        tuple(Port(n, t) for n, t in inputs.items()),
        tuple(Port(n, VARIABLES[n], Direction.OUTPUT) for n in names[cut:]),
        generator.formula(inputs, rng.randint(0, 3)),
        generator.formula(everything, rng.randint(0, 3)),
    )


def parse_formula(text: str, types: dict[str, SemType] = VARIABLES) -> Formula:
    """Parse a formula over the given free variables."""
    ports = ''.join(f'in {name} : {type}; ' for name, type in types.items())
    source = f'component Scratch {{ {ports}guarantee {text}; }}'
    return parse_contract_file(source)[0].guarantee
