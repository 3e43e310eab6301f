"""
Typed first-order formulas with bounded quantification.

This module defines the semantic types, the term and formula syntax trees, and
the purely syntactic operations on them: type checking, free variables,
capture-avoiding renaming of free variables, normalization of bound variables,
and alpha-equivalence. All syntax tree nodes are frozen, slotted dataclasses
and hence immutable, hashable, and comparable by structure.

Quantifiers always range over a term that evaluates to a finite set, e.g.,
``forall p in PlanSet . s0 in p``. A binder either is a single name or a pair
of names ``(x, y)`` that destructures the coordinates of a set of coordinates.
"""
import dataclasses
import enum
from collections.abc import Callable, Iterator, Mapping
from typing import TypeAlias

from .errors import TypeMismatch, UnboundVariable


# ======================================================================================
# Semantic Types


class Kind(enum.Enum):
    NAT = 'nat'
    COORD = 'coord'
    BOOL = 'bool'
    SET = 'set'


MAX_SET_DEPTH = 2


@dataclasses.dataclass(frozen=True, slots=True)
class SemType:
    """
    A semantic type. Only sets have an element type. Sets nest at most two
    levels deep, which suffices for sets of plans, i.e., sets of sets of
    coordinates.
    """

    kind: Kind
    element: 'None | SemType' = None

    def __post_init__(self) -> None:
        if (self.kind is Kind.SET) != (self.element is not None):
            raise ValueError(f'{self.kind.value} type with element {self.element}')
        if self.depth > MAX_SET_DEPTH:
            raise ValueError(f'sets nest more than {MAX_SET_DEPTH} levels deep')

    @property
    def depth(self) -> int:
        """The number of nested set constructors."""
        return 0 if self.element is None else 1 + self.element.depth

    @property
    def is_set(self) -> bool:
        return self.kind is Kind.SET

    def __str__(self) -> str:
        if self.element is None:
            return self.kind.value
        return f'set<{self.element}>'


NAT = SemType(Kind.NAT)
COORD = SemType(Kind.COORD)
BOOL = SemType(Kind.BOOL)


def set_of(element: SemType) -> SemType:
    return SemType(Kind.SET, element)


# Runtime values: naturals, coordinates, Booleans, and finite sets thereof.
Value: TypeAlias = 'int | bool | tuple[int, int] | frozenset[Value]'


# ======================================================================================
# Terms


class Term:
    """The base class of terms."""

    __slots__ = ()

    def __str__(self) -> str:
        from .dsl import format_term
        return format_term(self)


@dataclasses.dataclass(frozen=True, slots=True)
class Var(Term):
    name: str


MAX_LITERAL = 2 ** 64 - 1


@dataclasses.dataclass(frozen=True, slots=True)
class Lit(Term):
    """A natural number literal."""
    value: int

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not 0 <= self.value <= MAX_LITERAL:
            raise ValueError(f'literal {self.value!r} is not a 64-bit natural')


@dataclasses.dataclass(frozen=True, slots=True)
class Diff(Term):
    """Set difference."""
    left: Term
    right: Term


@dataclasses.dataclass(frozen=True, slots=True)
class Pair(Term):
    """A coordinate assembled from two naturals."""
    x: Term
    y: Term


# ======================================================================================
# Formulas


Binder: TypeAlias = str | tuple[str, str]


class Formula:
    """The base class of formulas."""

    __slots__ = ()

    def __str__(self) -> str:
        from .dsl import format_formula
        return format_formula(self)


@dataclasses.dataclass(frozen=True, slots=True)
class Const(Formula):
    value: bool


@dataclasses.dataclass(frozen=True, slots=True)
class Quantifier(Formula):
    binder: Binder
    domain: Term
    body: Formula


@dataclasses.dataclass(frozen=True, slots=True)
class Forall(Quantifier):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Exists(Quantifier):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class And(Formula):
    operands: tuple[Formula, ...]

    def __post_init__(self) -> None:
        if len(self.operands) < 2:
            raise ValueError('conjunction with fewer than two operands')


@dataclasses.dataclass(frozen=True, slots=True)
class Or(Formula):
    operands: tuple[Formula, ...]

    def __post_init__(self) -> None:
        if len(self.operands) < 2:
            raise ValueError('disjunction with fewer than two operands')


@dataclasses.dataclass(frozen=True, slots=True)
class Implies(Formula):
    antecedent: Formula
    consequent: Formula


@dataclasses.dataclass(frozen=True, slots=True)
class Not(Formula):
    operand: Formula


@dataclasses.dataclass(frozen=True, slots=True)
class BinaryAtom(Formula):
    left: Term
    right: Term


@dataclasses.dataclass(frozen=True, slots=True)
class In(BinaryAtom):
    """Set membership with the element on the left."""


@dataclasses.dataclass(frozen=True, slots=True)
class SubsetEq(BinaryAtom):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Eq(BinaryAtom):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Neq(BinaryAtom):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Lt(BinaryAtom):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Leq(BinaryAtom):
    pass


@dataclasses.dataclass(frozen=True, slots=True)
class Adjacent(BinaryAtom):
    """Grid adjacency, an interpreted predicate."""


@dataclasses.dataclass(frozen=True, slots=True)
class CardLeq(BinaryAtom):
    """Cardinality comparison ``|left| <= |right|`` of two sets."""


@dataclasses.dataclass(frozen=True, slots=True)
class ObstacleOracle(Formula):
    """The assumed obstacle function, an interpreted predicate."""
    cell: Term


Node: TypeAlias = Formula | Term

TRUE = Const(True)
FALSE = Const(False)


def conjoin(*formulas: Formula) -> Formula:
    """Conjoin the formulas, avoiding degenerate conjunctions."""
    if not formulas:
        return TRUE
    if len(formulas) == 1:
        return formulas[0]
    return And(formulas)


def conjuncts(formula: Formula) -> tuple[Formula, ...]:
    """Split a formula into its top-level conjuncts, flattening nested ones."""
    if isinstance(formula, And):
        return tuple(c for operand in formula.operands for c in conjuncts(operand))
    if formula == TRUE:
        return ()
    return (formula,)


def binder_names(binder: Binder) -> tuple[str, ...]:
    return (binder,) if isinstance(binder, str) else binder


def children(formula: Formula) -> tuple[Formula, ...]:
    """The immediate subformulas."""
    if isinstance(formula, (And, Or)):
        return formula.operands
    if isinstance(formula, Implies):
        return formula.antecedent, formula.consequent
    if isinstance(formula, Not):
        return (formula.operand,)
    if isinstance(formula, Quantifier):
        return (formula.body,)
    return ()


def subformulas(formula: Formula) -> Iterator[Formula]:
    """Iterate over all subformulas in pre-order, including the formula."""
    yield formula
    for child in children(formula):
        yield from subformulas(child)


def formula_size(formula: Formula) -> int:
    return sum(1 for _ in subformulas(formula))


def mentions_oracle(formula: Formula) -> bool:
    return any(isinstance(f, ObstacleOracle) for f in subformulas(formula))


# ======================================================================================
# Names


def _term_names(term: Term) -> Iterator[str]:
    if isinstance(term, Var):
        yield term.name
    elif isinstance(term, Diff):
        yield from _term_names(term.left)
        yield from _term_names(term.right)
    elif isinstance(term, Pair):
        yield from _term_names(term.x)
        yield from _term_names(term.y)


def free_variables(node: Node) -> frozenset[str]:
    """Determine the free variables of a term or formula."""
    if isinstance(node, Term):
        return frozenset(_term_names(node))
    if isinstance(node, Quantifier):
        return free_variables(node.domain) | (
            free_variables(node.body) - frozenset(binder_names(node.binder))
        )
    if isinstance(node, BinaryAtom):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, ObstacleOracle):
        return free_variables(node.cell)
    result: frozenset[str] = frozenset()
    for child in children(node):
        result |= free_variables(child)
    return result


def all_names(formula: Formula) -> set[str]:
    """Collect every variable name, free or bound, occurring in the formula."""
    names: set[str] = set()
    for f in subformulas(formula):
        if isinstance(f, Quantifier):
            names.update(binder_names(f.binder))
            names.update(_term_names(f.domain))
        elif isinstance(f, BinaryAtom):
            names.update(_term_names(f.left))
            names.update(_term_names(f.right))
        elif isinstance(f, ObstacleOracle):
            names.update(_term_names(f.cell))
    return names


def fresh_name(base: str, taken: set[str]) -> str:
    """Create a name derived from base that is not taken and then take it."""
    index = 1
    while (candidate := f'{base}_{index}') in taken:
        index += 1
    taken.add(candidate)
    return candidate


# ======================================================================================
# Renaming


def _rename_term(term: Term, mapping: Mapping[str, str]) -> Term:
    if isinstance(term, Var):
        name = mapping.get(term.name)
        return term if name is None else Var(name)
    if isinstance(term, Diff):
        return Diff(_rename_term(term.left, mapping), _rename_term(term.right, mapping))
    if isinstance(term, Pair):
        return Pair(_rename_term(term.x, mapping), _rename_term(term.y, mapping))
    return term


def _rename_binder(binder: Binder, mapping: Mapping[str, str]) -> Binder:
    if isinstance(binder, str):
        return mapping.get(binder, binder)
    x, y = binder
    return mapping.get(x, x), mapping.get(y, y)


def _rebuild(formula: Formula, transform: Callable[[Formula], Formula]) -> Formula:
    # Rebuild a non-quantifier formula by transforming its operands.
    if isinstance(formula, And):
        return And(tuple(transform(op) for op in formula.operands))
    if isinstance(formula, Or):
        return Or(tuple(transform(op) for op in formula.operands))
    if isinstance(formula, Implies):
        return Implies(transform(formula.antecedent), transform(formula.consequent))
    if isinstance(formula, Not):
        return Not(transform(formula.operand))
    raise AssertionError(f'not a connective: {formula!r}')


def _rename(formula: Formula, mapping: Mapping[str, str], taken: set[str]) -> Formula:
    if not mapping:
        return formula

    if isinstance(formula, Quantifier):
        domain = _rename_term(formula.domain, mapping)
        names = binder_names(formula.binder)
        inner = {k: v for k, v in mapping.items() if k not in names}

        # A bound name that is also a renaming target would capture it.
        targets = set(inner.values())
        captures = {name: fresh_name(name, taken) for name in names if name in targets}
        binder = _rename_binder(formula.binder, captures)
        inner.update(captures)

        return type(formula)(binder, domain, _rename(formula.body, inner, taken))

    if isinstance(formula, BinaryAtom):
        return type(formula)(
            _rename_term(formula.left, mapping), _rename_term(formula.right, mapping)
        )
    if isinstance(formula, ObstacleOracle):
        return ObstacleOracle(_rename_term(formula.cell, mapping))
    if isinstance(formula, Const):
        return formula
    return _rebuild(formula, lambda f: _rename(f, mapping, taken))


def rename_free(formula: Formula, mapping: Mapping[str, str]) -> Formula:
    """
    Rename the free variables of the formula according to the mapping. Bound
    variables that would capture a new name are renamed to fresh names first.
    """
    taken = all_names(formula) | set(mapping.values()) | set(mapping.keys())
    return _rename(formula, mapping, taken)


def _rebind(
    formula: Formula,
    mapping: dict[str, str],
    fresh: Callable[[str], str],
) -> Formula:
    if isinstance(formula, Quantifier):
        domain = _rename_term(formula.domain, mapping)
        names = binder_names(formula.binder)
        renames = {name: fresh(name) for name in names}
        inner = mapping | renames
        return type(formula)(
            _rename_binder(formula.binder, renames),
            domain,
            _rebind(formula.body, inner, fresh),
        )
    if isinstance(formula, BinaryAtom):
        return type(formula)(
            _rename_term(formula.left, mapping), _rename_term(formula.right, mapping)
        )
    if isinstance(formula, ObstacleOracle):
        return ObstacleOracle(_rename_term(formula.cell, mapping))
    if isinstance(formula, Const):
        return formula
    return _rebuild(formula, lambda f: _rebind(f, mapping, fresh))


def normalize(formula: Formula, reserved: frozenset[str] = frozenset()) -> Formula:
    """
    Rename every bound variable to a fresh name, so that no quantifier shadows
    another and no bound variable shares its name with a free one.
    """
    taken = all_names(formula) | set(reserved)
    return _rebind(formula, {}, lambda name: fresh_name(name, taken))


def canonical(formula: Formula) -> Formula:
    """
    Rename bound variables to positional names. Two formulas are
    alpha-equivalent exactly when their canonical forms are equal. The
    positional names are not identifiers of the surface syntax.
    """
    counter = 0

    def positional(_: str) -> str:
        nonlocal counter
        counter += 1
        return f'#{counter}'

    return _rebind(formula, {}, positional)


def alpha_equal(formula1: Formula, formula2: Formula) -> bool:
    return canonical(formula1) == canonical(formula2)


# ======================================================================================
# Type Checking


def type_of(term: Term, env: Mapping[str, SemType]) -> SemType:
    """Determine the type of the term under the environment."""
    if isinstance(term, Var):
        try:
            return env[term.name]
        except KeyError:
            raise UnboundVariable(term.name, term) from None
    if isinstance(term, Lit):
        return NAT
    if isinstance(term, Pair):
        for part in (term.x, term.y):
            if (actual := type_of(part, env)) != NAT:
                raise TypeMismatch(part, NAT, actual)
        return COORD
    if isinstance(term, Diff):
        left = type_of(term.left, env)
        if not left.is_set:
            raise TypeMismatch(term.left, 'a set type', left)
        right = type_of(term.right, env)
        if right != left:
            raise TypeMismatch(term.right, left, right)
        return left
    raise AssertionError(f'not a term: {term!r}')


def _expect(term: Term, expected: SemType, env: Mapping[str, SemType]) -> None:
    if (actual := type_of(term, env)) != expected:
        raise TypeMismatch(term, expected, actual)


def _expect_set(term: Term, env: Mapping[str, SemType]) -> SemType:
    actual = type_of(term, env)
    if not actual.is_set:
        raise TypeMismatch(term, 'a set type', actual)
    return actual


def _check(formula: Formula, env: Mapping[str, SemType]) -> None:
    if isinstance(formula, Const):
        return
    if isinstance(formula, Quantifier):
        domain = _expect_set(formula.domain, env)
        element = domain.element
        assert element is not None
        if isinstance(formula.binder, str):
            scope = {**env, formula.binder: element}
        else:
            x, y = formula.binder
            if element != COORD:
                raise TypeMismatch(formula.domain, set_of(COORD), domain)
            if x == y:
                raise TypeMismatch(formula, 'two distinct binder names', f'({x}, {y})')
            scope = {**env, x: NAT, y: NAT}
        _check(formula.body, scope)
        return
    if isinstance(formula, In):
        collection = _expect_set(formula.right, env)
        assert collection.element is not None
        _expect(formula.left, collection.element, env)
        return
    if isinstance(formula, (SubsetEq, CardLeq)):
        left = _expect_set(formula.left, env)
        _expect(formula.right, left, env)
        return
    if isinstance(formula, (Eq, Neq)):
        _expect(formula.right, type_of(formula.left, env), env)
        return
    if isinstance(formula, (Lt, Leq)):
        _expect(formula.left, NAT, env)
        _expect(formula.right, NAT, env)
        return
    if isinstance(formula, Adjacent):
        _expect(formula.left, COORD, env)
        _expect(formula.right, COORD, env)
        return
    if isinstance(formula, ObstacleOracle):
        _expect(formula.cell, COORD, env)
        return
    for child in children(formula):
        _check(child, env)


def typecheck_formula(formula: Formula, env: Mapping[str, SemType]) -> SemType:
    """
    Type check the formula under the environment of free variable types. The
    result is always :data:`BOOL`; ill-typed formulas raise
    :class:`~contractchain.errors.TypeMismatch` or
    :class:`~contractchain.errors.UnboundVariable`.
    """
    _check(formula, env)
    return BOOL
