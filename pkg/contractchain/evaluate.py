"""
Evaluation of formulas over finite environments.

Values are Python values: naturals are ``int``, coordinates are pairs of
``int``, Booleans are ``bool``, and sets are ``frozenset``. An :class:`Env`
binds variables to values and carries the :class:`Interpretation` of the two
interpreted predicates, ``adjacent`` and ``obstacle``.

Formulas are evaluated by first compiling them into a tree of closures with
:func:`compile_formula`. Compiling once and evaluating many times is what makes
enumerating a million environments for an obligation practical.
:func:`evaluate` combines both steps for one-off evaluation.
"""
from collections.abc import Callable, Iterator, Mapping, Sequence
import dataclasses
import functools
import itertools
import logging
import math
from typing import ClassVar, TypeAlias

from .contract import Port
from .errors import BudgetExceeded, ConfigError, DomainNotASet, UnboundVariable
from .logic import (
    Adjacent, And, BinaryAtom, CardLeq, Const, Diff, Eq, Exists, Forall, Formula,
    Implies, In, Kind, Leq, Lit, Lt, Neq, Not, ObstacleOracle, Or, Pair, SemType,
    SubsetEq, Term, Value, Var,
)


log = logging.getLogger(__name__)


Coord: TypeAlias = tuple[int, int]


# ======================================================================================
# Interpretation and Environments


def four_adjacent(cell1: Coord, cell2: Coord) -> bool:
    """Determine whether the cells are at Manhattan distance one."""
    return abs(cell1[0] - cell2[0]) + abs(cell1[1] - cell2[1]) == 1


def eight_adjacent(cell1: Coord, cell2: Coord) -> bool:
    """Determine whether the cells are distinct and touch, possibly diagonally."""
    return max(abs(cell1[0] - cell2[0]), abs(cell1[1] - cell2[1])) == 1


def no_obstacles(_: Coord) -> bool:
    return False


def adjacency(connectivity: int) -> Callable[[Coord, Coord], bool]:
    if connectivity == 4:
        return four_adjacent
    if connectivity == 8:
        return eight_adjacent
    raise ConfigError(f'adjacency must be 4 or 8, not {connectivity}')


@dataclasses.dataclass(frozen=True, slots=True)
class Interpretation:
    """The meaning of the interpreted predicates ``adjacent`` and ``obstacle``."""

    adjacent: Callable[[Coord, Coord], bool] = four_adjacent
    obstacle: Callable[[Coord], bool] = no_obstacles

    @classmethod
    def of(
        cls,
        *,
        connectivity: int = 4,
        obstacles: None | frozenset[Coord] = None,
    ) -> 'Interpretation':
        """
        Create an interpretation with the given connectivity, whose obstacle
        predicate is membership in the given set of obstacles.
        """
        if obstacles is None:
            return cls(adjacency(connectivity))
        return cls(adjacency(connectivity), obstacles.__contains__)


DEFAULT_INTERPRETATION = Interpretation()


@dataclasses.dataclass(frozen=True, slots=True)
class Env:
    bindings: Mapping[str, Value]
    interp: Interpretation = DEFAULT_INTERPRETATION

    def __getitem__(self, name: str) -> Value:
        return self.bindings[name]


# ======================================================================================
# Bounds and Domains


@dataclasses.dataclass(frozen=True, slots=True)
class DomainBounds:
    """
    The bounds for enumerating environments.

    Attributes:
        max_n: the number of naturals, i.e., naturals range over ``0..max_n-1``
        max_card: the maximum cardinality of sets of non-sets
        max_plans: the maximum cardinality of sets of sets
        max_envs: the maximum number of environments to enumerate
    """

    max_n: int = 3
    max_card: int = 4
    max_plans: int = 3
    max_envs: int = 1_000_000

    KEYS: ClassVar[dict[str, str]] = {
        'n': 'max_n', 'card': 'max_card', 'plans': 'max_plans', 'envs': 'max_envs'
    }

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f'bound {field.name} must be a positive integer')

    @classmethod
    def parse(cls, text: str) -> 'DomainBounds':
        """Parse bounds written as ``n=3,card=4,plans=3,envs=1000000``."""
        values: dict[str, int] = {}
        for item in (i.strip() for i in text.split(',')):
            if not item:
                continue
            key, sep, value = item.partition('=')
            key = key.strip()
            if not sep or key not in cls.KEYS:
                raise ConfigError(f'malformed bound "{item}"')
            try:
                values[cls.KEYS[key]] = int(value.strip().replace('_', ''))
            except ValueError:
                raise ConfigError(f'bound "{key}" is not an integer') from None
        return cls(**values)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> 'DomainBounds':
        """Create bounds from a mapping with the same keys as :meth:`parse`."""
        values: dict[str, int] = {}
        for key, value in mapping.items():
            if key not in cls.KEYS or not isinstance(value, int):
                raise ConfigError(f'malformed bound {key} = {value!r}')
            values[cls.KEYS[key]] = value
        return cls(**values)

    def __str__(self) -> str:
        return (
            f'n={self.max_n},card={self.max_card},'
            f'plans={self.max_plans},envs={self.max_envs}'
        )


def value_key(value: Value) -> tuple[object, ...]:
    """
    A sort key that orders values like the enumeration does: naturals and
    coordinates by value, sets by cardinality and then lexicographically.
    """
    if isinstance(value, frozenset):
        elements = sorted((value_key(v) for v in value))
        return (len(elements), tuple(elements))
    return (value,)


def _set_limit(type: SemType, bounds: DomainBounds) -> int:
    assert type.element is not None
    return bounds.max_plans if type.element.is_set else bounds.max_card


@functools.cache
def domain(type: SemType, bounds: DomainBounds) -> tuple[Value, ...]:
    """
    Enumerate the values of the type within the bounds. Sets are ordered by
    cardinality and then lexicographically over the element order.
    """
    if type.kind is Kind.NAT:
        return tuple(range(bounds.max_n))
    if type.kind is Kind.COORD:
        return tuple(itertools.product(range(bounds.max_n), repeat=2))
    if type.kind is Kind.BOOL:
        return (False, True)

    assert type.element is not None
    base = domain(type.element, bounds)
    limit = min(_set_limit(type, bounds), len(base))
    return tuple(
        frozenset(subset)
        for size in range(limit + 1)
        for subset in itertools.combinations(base, size)
    )


def domain_size(type: SemType, bounds: DomainBounds) -> int:
    """Count the values of the type within the bounds without enumerating them."""
    if type.kind is Kind.NAT:
        return bounds.max_n
    if type.kind is Kind.COORD:
        return bounds.max_n ** 2
    if type.kind is Kind.BOOL:
        return 2

    assert type.element is not None
    base = domain_size(type.element, bounds)
    limit = min(_set_limit(type, bounds), base)
    return sum(math.comb(base, size) for size in range(limit + 1))


def estimate_envs(ports: Sequence[Port], bounds: DomainBounds) -> int:
    """Count the environments for the ports."""
    return math.prod(domain_size(port.type, bounds) for port in ports)


def enumerate_envs(
    ports: Sequence[Port],
    bounds: DomainBounds,
    interp: Interpretation = DEFAULT_INTERPRETATION,
) -> Iterator[Env]:
    """
    Enumerate every environment binding the ports to values within bounds,
    each exactly once. The first port varies slowest.

    Raises:
        BudgetExceeded: if the number of environments exceeds
            ``bounds.max_envs``; the check happens before the first environment
            is produced
    """
    estimate = estimate_envs(ports, bounds)
    log.debug('estimated %d environments for %d ports', estimate, len(ports))
    if estimate > bounds.max_envs:
        raise BudgetExceeded(estimate, bounds.max_envs)
    return _enumerate(ports, bounds, interp)


def _enumerate(
    ports: Sequence[Port], bounds: DomainBounds, interp: Interpretation
) -> Iterator[Env]:
    names = [port.name for port in ports]
    for values in itertools.product(*(domain(port.type, bounds) for port in ports)):
        yield Env(dict(zip(names, values)), interp)


# ======================================================================================
# Compilation


class _Run:
    """The mutable state of one evaluation."""

    __slots__ = ('scope', 'interp', 'steps', 'limit')

    def __init__(
        self,
        scope: dict[str, Value],
        interp: Interpretation,
        limit: None | int,
    ) -> None:
        self.scope = scope
        self.interp = interp
        self.steps = 0
        self.limit = limit

    def tick(self) -> None:
        self.steps += 1
        if self.limit is not None and self.steps > self.limit:
            raise BudgetExceeded(self.steps, self.limit)


TermCode: TypeAlias = Callable[[_Run], Value]
FormulaCode: TypeAlias = Callable[[_Run], bool]


def _compile_term(term: Term) -> TermCode:
    if isinstance(term, Var):
        name = term.name

        def variable(run: _Run) -> Value:
            try:
                return run.scope[name]
            except KeyError:
                raise UnboundVariable(name, term) from None
        return variable

    if isinstance(term, Lit):
        value = term.value
        return lambda _: value

    if isinstance(term, Diff):
        left, right = _compile_term(term.left), _compile_term(term.right)

        def difference(run: _Run) -> Value:
            a, b = left(run), right(run)
            if not isinstance(a, frozenset) or not isinstance(b, frozenset):
                raise DomainNotASet(a if not isinstance(a, frozenset) else b)
            return a - b
        return difference

    if isinstance(term, Pair):
        x, y = _compile_term(term.x), _compile_term(term.y)
        return lambda run: (x(run), y(run))  # type: ignore[return-value]

    raise AssertionError(f'not a term: {term!r}')


def _as_set(value: Value) -> frozenset[Value]:
    if not isinstance(value, frozenset):
        raise DomainNotASet(value)
    return value


def _compile_atom(formula: BinaryAtom) -> FormulaCode:
    left, right = _compile_term(formula.left), _compile_term(formula.right)
    test: Callable[[Value, Value, Interpretation], bool]

    if isinstance(formula, In):
        test = lambda a, b, _: a in _as_set(b)
    elif isinstance(formula, SubsetEq):
        test = lambda a, b, _: _as_set(a) <= _as_set(b)
    elif isinstance(formula, Eq):
        test = lambda a, b, _: a == b
    elif isinstance(formula, Neq):
        test = lambda a, b, _: a != b
    elif isinstance(formula, Lt):
        test = lambda a, b, _: a < b  # type: ignore[operator]
    elif isinstance(formula, Leq):
        test = lambda a, b, _: a <= b  # type: ignore[operator]
    elif isinstance(formula, Adjacent):
        test = lambda a, b, i: i.adjacent(a, b)  # type: ignore[arg-type]
    elif isinstance(formula, CardLeq):
        test = lambda a, b, _: len(_as_set(a)) <= len(_as_set(b))
    else:
        raise AssertionError(f'not an atom: {formula!r}')

    def atom(run: _Run) -> bool:
        run.tick()
        return test(left(run), right(run), run.interp)
    return atom


def _compile(formula: Formula) -> FormulaCode:
    if isinstance(formula, Const):
        value = formula.value
        return lambda _: value

    if isinstance(formula, BinaryAtom):
        return _compile_atom(formula)

    if isinstance(formula, ObstacleOracle):
        cell = _compile_term(formula.cell)

        def oracle(run: _Run) -> bool:
            run.tick()
            return run.interp.obstacle(cell(run))  # type: ignore[arg-type]
        return oracle

    if isinstance(formula, Not):
        operand = _compile(formula.operand)
        return lambda run: not operand(run)

    if isinstance(formula, And):
        operands = tuple(_compile(op) for op in formula.operands)
        return lambda run: all(op(run) for op in operands)

    if isinstance(formula, Or):
        operands = tuple(_compile(op) for op in formula.operands)
        return lambda run: any(op(run) for op in operands)

    if isinstance(formula, Implies):
        antecedent = _compile(formula.antecedent)
        consequent = _compile(formula.consequent)
        return lambda run: not antecedent(run) or consequent(run)

    if isinstance(formula, (Forall, Exists)):
        return _compile_quantifier(formula)

    raise AssertionError(f'not a formula: {formula!r}')


_MISSING = object()


def _compile_quantifier(formula: Forall | Exists) -> FormulaCode:
    domain = _compile_term(formula.domain)
    body = _compile(formula.body)
    binder = formula.binder
    universal = isinstance(formula, Forall)

    def bind(scope: dict[str, Value], value: Value) -> None:
        if isinstance(binder, str):
            scope[binder] = value
        else:
            scope[binder[0]], scope[binder[1]] = value  # type: ignore[misc]

    names = (binder,) if isinstance(binder, str) else binder

    def quantifier(run: _Run) -> bool:
        values = _as_set(domain(run))
        scope = run.scope
        saved = [scope.get(name, _MISSING) for name in names]
        try:
            for value in values:
                bind(scope, value)
                if universal:
                    if not body(run):
                        return False
                elif body(run):
                    return True
            return universal
        finally:
            for name, old in zip(names, saved):
                if old is _MISSING:
                    scope.pop(name, None)
                else:
                    scope[name] = old  # type: ignore[assignment]

    return quantifier


@dataclasses.dataclass(frozen=True, slots=True)
class CompiledFormula:
    """A formula compiled into closures, ready for repeated evaluation."""

    formula: Formula
    code: FormulaCode

    def holds(
        self,
        bindings: Mapping[str, Value],
        interp: Interpretation = DEFAULT_INTERPRETATION,
        *,
        budget: None | int = None,
    ) -> bool:
        return self.code(_Run(dict(bindings), interp, budget))

    def __call__(self, env: Env, *, budget: None | int = None) -> bool:
        return self.holds(env.bindings, env.interp, budget=budget)


def compile_formula(formula: Formula) -> CompiledFormula:
    return CompiledFormula(formula, _compile(formula))


def evaluate(formula: Formula, env: Env, *, budget: None | int = None) -> bool:
    """
    Evaluate the formula in the environment under classical two-valued
    semantics. The optional budget limits the number of atom evaluations.

    Raises:
        UnboundVariable: if the formula mentions a variable without binding
        DomainNotASet: if a quantifier ranges over something other than a set
        BudgetExceeded: if evaluation exceeds the budget
    """
    return compile_formula(formula)(env, budget=budget)


def evaluate_term(term: Term, env: Env) -> Value:
    return _compile_term(term)(_Run(dict(env.bindings), env.interp, None))


def format_value(value: Value) -> str:
    """Format a value in the surface syntax, with sets in enumeration order."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, tuple):
        return f'({value[0]}, {value[1]})'
    return '{' + ', '.join(format_value(v) for v in sorted(value, key=value_key)) + '}'


def json_value(value: Value) -> object:
    """Convert a value to JSON: coordinates become lists, sets sorted lists."""
    if isinstance(value, tuple):
        return [value[0], value[1]]
    if isinstance(value, frozenset):
        return [json_value(v) for v in sorted(value, key=value_key)]
    return value
