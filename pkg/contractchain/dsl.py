"""
The textual surface syntax for contracts and system graphs.

Contract files (``.agc``) declare components::

    component Agent {
      in PlanSet : set<set<coord>>;
      out plan : set<coord>;
      assume true;
      guarantee plan in PlanSet and (forall q in PlanSet . card_leq(plan, q));
    }

System files (``.sys``) link the components of a contract file::

    link Detection -> Planner equal;
    link Planner.PlanSet -> Agent.PlanSet subset;
    focus Agent;

A link without explicit ports pairs every downstream input with the upstream
output of the same name. The grammar lives in ``contracts.lark`` next to this
module. Comments start with ``#`` and extend to the end of the line.

Parsing either returns well-typed values or raises a
:class:`~contractchain.errors.ContractChainError` with a source span. The
printer is the parser's inverse: parsing printed contracts yields structurally
equal contracts.
"""
from collections.abc import Sequence
import dataclasses
import functools
import logging
from pathlib import Path
from typing import Any, NoReturn

import lark
from lark.exceptions import (
    UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken, VisitError
)

from .contract import (
    Contract, Direction, Link, LinkKind, Port, SystemGraph, same_named_ports,
    validate_graph,
)
from .errors import (
    ContractChainError, DuplicateComponent, GraphError, LiteralOutOfRange,
    ParseError, SourceSpan, UnknownComponent,
)
from .logic import (
    Adjacent, And, BOOL, BinaryAtom, CardLeq, COORD, Const, Diff, Eq, Exists,
    Forall, Formula, Implies, In, Leq, Lit, Lt, MAX_LITERAL, NAT, Neq, Not,
    ObstacleOracle, Or, Pair, Quantifier, SemType, SubsetEq, Term, Var, set_of,
)


log = logging.getLogger(__name__)


@functools.cache
def _parser() -> lark.Lark:
    return lark.Lark.open(
        'contracts.lark',
        rel_to=__file__,
        start=['contracts', 'system'],
        parser='lalr',
        propagate_positions=True,
    )


# ======================================================================================
# Source Positions


class _Text:
    """Source text with helpers for creating spans that lie within the text."""

    def __init__(self, text: str, source: str) -> None:
        self.source = source
        self.lines = text.split('\n')

    def clamp(self, line: int, column: int) -> tuple[int, int]:
        if line < 1 or line > len(self.lines):
            return len(self.lines), len(self.lines[-1]) + 1
        return line, min(max(column, 1), len(self.lines[line - 1]) + 1)

    def span(
        self,
        line: int,
        column: int,
        end_line: None | int = None,
        end_column: None | int = None,
    ) -> SourceSpan:
        start = self.clamp(line, column)
        end = start if end_line is None or end_column is None else self.clamp(
            end_line, end_column
        )
        if end < start:
            end = start
        return SourceSpan(self.source, *start, *end)

    def of(self, meta: Any) -> SourceSpan:
        if getattr(meta, 'empty', True):
            return self.span(1, 1)
        return self.span(meta.line, meta.column, meta.end_line, meta.end_column)


# ======================================================================================
# From Parse Trees to Values


@dataclasses.dataclass(slots=True)
class _Declaration:
    """A component declaration before validation."""

    name: str
    span: SourceSpan
    inputs: list[Port] = dataclasses.field(default_factory=list)
    outputs: list[Port] = dataclasses.field(default_factory=list)
    assumption: None | Formula = None
    guarantee: None | Formula = None


@dataclasses.dataclass(frozen=True, slots=True)
class _Endpoint:
    component: str
    ports: tuple[str, ...]


@lark.v_args(meta=True, inline=True)
class _Builder(lark.Transformer[lark.Token, Any]):
    """Turn parse trees into syntax trees while recording source spans."""

    def __init__(self, text: _Text) -> None:
        super().__init__()
        self.text = text
        # Keyed by object identity; the node is kept to pin the identity.
        self.spans: dict[int, tuple[object, SourceSpan]] = {}

    def _record[T](self, meta: Any, node: T) -> T:
        self.spans[id(node)] = (node, self.text.of(meta))
        return node

    # --- Contracts

    def contracts(self, meta: Any, *components: _Declaration) -> list[_Declaration]:
        return list(components)

    def component(self, meta: Any, name: lark.Token, *members: Any) -> _Declaration:
        declaration = _Declaration(str(name), self.text.of(meta))
        for kind, value, span in members:
            if kind == 'port':
                port: Port = value
                ports = (
                    declaration.inputs
                    if port.direction is Direction.INPUT
                    else declaration.outputs
                )
                ports.append(port)
            elif kind == 'assume':
                if declaration.assumption is not None:
                    raise ParseError(span, f'{name} has more than one assumption')
                declaration.assumption = value
            else:
                if declaration.guarantee is not None:
                    raise ParseError(span, f'{name} has more than one guarantee')
                declaration.guarantee = value
        return declaration

    def port(
        self, meta: Any, direction: lark.Tree[lark.Token], name: lark.Token, type: SemType
    ) -> tuple[str, Port, SourceSpan]:
        token = str(direction.children[0])
        return 'port', Port(str(name), type, Direction(token)), self.text.of(meta)

    def assume(self, meta: Any, formula: Formula) -> tuple[str, Formula, SourceSpan]:
        return 'assume', formula, self.text.of(meta)

    def guarantee(self, meta: Any, formula: Formula) -> tuple[str, Formula, SourceSpan]:
        return 'guarantee', formula, self.text.of(meta)

    def nat_type(self, meta: Any) -> SemType:
        return NAT

    def coord_type(self, meta: Any) -> SemType:
        return COORD

    def bool_type(self, meta: Any) -> SemType:
        return BOOL

    def set_type(self, meta: Any, element: SemType) -> SemType:
        try:
            return set_of(element)
        except ValueError as x:
            raise ParseError(self.text.of(meta), str(x)) from x

    # --- Formulas

    def implies(self, meta: Any, antecedent: Formula, consequent: Formula) -> Formula:
        return self._record(meta, Implies(antecedent, consequent))

    def forall(self, meta: Any, binder: Any, domain: Term, body: Formula) -> Formula:
        return self._record(meta, Forall(binder, domain, body))

    def exists(self, meta: Any, binder: Any, domain: Term, body: Formula) -> Formula:
        return self._record(meta, Exists(binder, domain, body))

    def name_binder(self, meta: Any, name: lark.Token) -> str:
        return str(name)

    def pair_binder(self, meta: Any, x: lark.Token, y: lark.Token) -> tuple[str, str]:
        return str(x), str(y)

    def or_(self, meta: Any, *operands: Formula) -> Formula:
        return self._record(meta, Or(operands))

    def and_(self, meta: Any, *operands: Formula) -> Formula:
        return self._record(meta, And(operands))

    def not_(self, meta: Any, operand: Formula) -> Formula:
        return self._record(meta, Not(operand))

    def true(self, meta: Any) -> Formula:
        return self._record(meta, Const(True))

    def false(self, meta: Any) -> Formula:
        return self._record(meta, Const(False))

    def _atom(self, meta: Any, kind: type[BinaryAtom], left: Term, right: Term) -> Formula:
        return self._record(meta, kind(left, right))

    def in_(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, In, left, right)

    def subset(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, SubsetEq, left, right)

    def eq(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, Eq, left, right)

    def neq(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, Neq, left, right)

    def lt(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, Lt, left, right)

    def leq(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, Leq, left, right)

    def adjacent(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, Adjacent, left, right)

    def card_leq(self, meta: Any, left: Term, right: Term) -> Formula:
        return self._atom(meta, CardLeq, left, right)

    def obstacle(self, meta: Any, cell: Term) -> Formula:
        return self._record(meta, ObstacleOracle(cell))

    def obstacle_xy(self, meta: Any, x: Term, y: Term) -> Formula:
        return self._record(meta, ObstacleOracle(self._record(meta, Pair(x, y))))

    # --- Terms

    def var(self, meta: Any, name: lark.Token) -> Term:
        return self._record(meta, Var(str(name)))

    def nat(self, meta: Any, digits: lark.Token) -> Term:
        value = int(digits)
        if value > MAX_LITERAL:
            raise LiteralOutOfRange(self.text.of(meta), f'literal {digits} exceeds 64 bits')
        return self._record(meta, Lit(value))

    def diff(self, meta: Any, left: Term, right: Term) -> Term:
        return self._record(meta, Diff(left, right))

    def pair(self, meta: Any, x: Term, y: Term) -> Term:
        return self._record(meta, Pair(x, y))

    # --- Systems

    def system(self, meta: Any, *statements: Any) -> list[Any]:
        return list(statements)

    def link(
        self,
        meta: Any,
        source: _Endpoint,
        target: _Endpoint,
        kind: lark.Tree[lark.Token],
    ) -> tuple[str, SourceSpan, _Endpoint, _Endpoint, LinkKind]:
        token = str(kind.children[0])
        return 'link', self.text.of(meta), source, target, LinkKind(token)

    def focus(self, meta: Any, name: lark.Token) -> tuple[str, SourceSpan, str]:
        return 'focus', self.text.of(meta), str(name)

    def endpoint(self, meta: Any, component: lark.Token, *ports: lark.Token) -> _Endpoint:
        return _Endpoint(str(component), tuple(str(p) for p in ports))


def _describe(terminal: str) -> str:
    try:
        definition = _parser().get_terminal(terminal)
    except KeyError:
        return terminal.lower()
    if definition.pattern.type == 'str':
        return f'"{definition.pattern.value}"'
    return terminal.lower()


def _syntax_error(x: UnexpectedInput, text: _Text) -> NoReturn:
    if isinstance(x, UnexpectedCharacters):
        span = text.span(x.line, x.column, x.line, x.column + 1)
        message = f'unexpected character {x.char!r}'
        expected = sorted(_describe(t) for t in x.allowed or ())
    elif isinstance(x, UnexpectedToken):
        token = x.token
        if token.type == '$END':
            span = text.span(len(text.lines), len(text.lines[-1]) + 1)
            message = 'unexpected end of input'
        else:
            span = text.span(
                token.line or 1,
                token.column or 1,
                token.end_line,
                token.end_column,
            )
            message = f'unexpected "{token}"'
        expected = sorted(_describe(t) for t in x.accepts or x.expected)
    elif isinstance(x, UnexpectedEOF):
        span = text.span(len(text.lines), len(text.lines[-1]) + 1)
        message = 'unexpected end of input'
        expected = sorted(_describe(t) for t in x.expected)
    else:
        span = text.span(getattr(x, 'line', 1), getattr(x, 'column', 1))
        message = 'syntax error'
        expected = []

    if expected:
        message += f', expected {" or ".join(expected[:8])}'
        if len(expected) > 8:
            message += ' or ...'
    raise ParseError(span, message, expected) from None


def _transform(text: str, source: str, start: str) -> tuple[Any, _Builder]:
    contents = _Text(text, source)
    try:
        tree = _parser().parse(text, start=start)
    except UnexpectedInput as x:
        _syntax_error(x, contents)

    builder = _Builder(contents)
    try:
        return builder.transform(tree), builder
    except VisitError as x:
        if isinstance(x.orig_exc, ContractChainError):
            raise x.orig_exc from None
        raise ParseError(contents.span(1, 1), str(x.orig_exc)) from x.orig_exc
    except RecursionError:
        raise ParseError(contents.span(1, 1), 'input nests too deeply') from None


def _error_span(builder: _Builder, error: ContractChainError) -> None | SourceSpan:
    node = getattr(error, 'node', None)
    entry = None if node is None else builder.spans.get(id(node))
    return None if entry is None else entry[1]


def parse_contract_file(text: str, source: str = '<string>') -> list[Contract]:
    """
    Parse the text of a contract file.

    Raises:
        ParseError: for syntax errors, with the span of the offending token
        TypeCheckError: for ill-typed formulas, with the span of the offending
            term or formula
        ContractDefinitionError: for invalid contracts, with the span of the
            component declaration
    """
    declarations: list[_Declaration]
    declarations, builder = _transform(text, source, 'contracts')

    contracts: list[Contract] = []
    seen: set[str] = set()
    for declaration in declarations:
        if declaration.name in seen:
            raise DuplicateComponent(declaration.name).at(declaration.span)
        seen.add(declaration.name)

        try:
            contract = Contract(
                declaration.name,
                tuple(declaration.inputs),
                tuple(declaration.outputs),
                declaration.assumption or Const(True),
                declaration.guarantee or Const(True),
            )
        except ContractChainError as x:
            raise x.at(_error_span(builder, x) or declaration.span)
        contracts.append(contract)

    log.debug('parsed %d contracts from %s', len(contracts), source)
    return contracts


def _link_ports(
    span: SourceSpan, upstream: Contract, downstream: Contract,
    source: _Endpoint, target: _Endpoint,
) -> tuple[tuple[str, str], ...]:
    if not source.ports and not target.ports:
        pairs = same_named_ports(upstream, downstream)
        if not pairs:
            raise ParseError(
                span, f'{upstream.name} and {downstream.name} share no port names'
            )
        return tuple(pairs)
    outputs = source.ports or target.ports
    inputs = target.ports or source.ports
    if len(outputs) != len(inputs):
        raise ParseError(span, 'link connects different numbers of ports')
    return tuple(zip(outputs, inputs))


def parse_system_file(
    text: str, contracts: Sequence[Contract], source: str = '<string>'
) -> SystemGraph:
    """
    Parse the text of a system file, resolving component names against the
    given contracts, and validate the resulting system graph.
    """
    statements: list[Any]
    statements, _ = _transform(text, source, 'system')

    by_name = {c.name: c for c in contracts}

    def lookup(name: str, span: SourceSpan) -> Contract:
        try:
            return by_name[name]
        except KeyError:
            raise UnknownComponent(name).at(span) from None

    links: list[Link] = []
    spans: list[SourceSpan] = []
    focus: None | str = None
    for statement in statements:
        if statement[0] == 'focus':
            _, span, name = statement
            if focus is not None:
                raise ParseError(span, 'system declares more than one focus')
            lookup(name, span)
            focus = name
            continue

        _, span, source_end, target_end, kind = statement
        upstream = lookup(source_end.component, span)
        downstream = lookup(target_end.component, span)
        ports = _link_ports(span, upstream, downstream, source_end, target_end)
        links.append(Link(upstream.name, downstream.name, ports, kind))
        spans.append(span)

    graph = SystemGraph(tuple(contracts), tuple(links), focus)
    try:
        validate_graph(graph)
    except GraphError as x:
        raise x.at(_graph_error_span(x, links, spans))
    return graph


def _graph_error_span(
    error: GraphError, links: list[Link], spans: list[SourceSpan]
) -> None | SourceSpan:
    link = getattr(error, 'link', None)
    component = getattr(error, 'component', None)
    for candidate, span in zip(links, spans):
        if candidate is link or component in (candidate.source, candidate.target):
            return span
    return None


def load_contracts(path: str | Path) -> list[Contract]:
    path = Path(path)
    return parse_contract_file(path.read_text(encoding='utf8'), str(path))


def load_system(path: str | Path, contracts: Sequence[Contract]) -> SystemGraph:
    path = Path(path)
    return parse_system_file(path.read_text(encoding='utf8'), contracts, str(path))


# ======================================================================================
# Printing


def format_type(type: SemType) -> str:
    return str(type)


def format_term(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Lit):
        return str(term.value)
    if isinstance(term, Diff):
        return f'diff({format_term(term.left)}, {format_term(term.right)})'
    if isinstance(term, Pair):
        return f'({format_term(term.x)}, {format_term(term.y)})'
    raise AssertionError(f'not a term: {term!r}')


def format_binder(binder: str | tuple[str, str]) -> str:
    return binder if isinstance(binder, str) else f'({binder[0]}, {binder[1]})'


_OPERATORS: dict[type[BinaryAtom], str] = {
    In: 'in', SubsetEq: 'subset', Eq: '=', Neq: '!=', Lt: '<', Leq: '<=',
}

_FUNCTIONS: dict[type[BinaryAtom], str] = {
    Adjacent: 'adjacent', CardLeq: 'card_leq',
}

# Binding strength, from loosest to tightest.
_QUANTIFIED, _DISJUNCTION, _CONJUNCTION, _NEGATION = range(4)


def _parenthesize(text: str, needed: bool) -> str:
    return f'({text})' if needed else text


def _quantifier_head(formula: Quantifier) -> str:
    keyword = 'forall' if isinstance(formula, Forall) else 'exists'
    return f'{keyword} {format_binder(formula.binder)} in {format_term(formula.domain)} .'


def _format(formula: Formula, strength: int) -> str:
    if isinstance(formula, Const):
        return 'true' if formula.value else 'false'
    if isinstance(formula, BinaryAtom):
        left, right = format_term(formula.left), format_term(formula.right)
        if (function := _FUNCTIONS.get(type(formula))) is not None:
            return f'{function}({left}, {right})'
        return f'{left} {_OPERATORS[type(formula)]} {right}'
    if isinstance(formula, ObstacleOracle):
        cell = formula.cell
        if isinstance(cell, Pair):
            return f'obstacle({format_term(cell.x)}, {format_term(cell.y)})'
        return f'obstacle({format_term(cell)})'
    if isinstance(formula, Not):
        return 'not ' + _format(formula.operand, _NEGATION)
    if isinstance(formula, And):
        text = ' and '.join(_format(op, _NEGATION) for op in formula.operands)
        return _parenthesize(text, strength > _CONJUNCTION)
    if isinstance(formula, Or):
        text = ' or '.join(_format(op, _CONJUNCTION) for op in formula.operands)
        return _parenthesize(text, strength > _DISJUNCTION)
    if isinstance(formula, Implies):
        text = (
            f'{_format(formula.antecedent, _DISJUNCTION)} => '
            f'{_format(formula.consequent, _QUANTIFIED)}'
        )
        return _parenthesize(text, strength > _QUANTIFIED)
    if isinstance(formula, Quantifier):
        text = f'{_quantifier_head(formula)} {_format(formula.body, _QUANTIFIED)}'
        return _parenthesize(text, strength > _QUANTIFIED)
    raise AssertionError(f'not a formula: {formula!r}')


def format_formula(formula: Formula) -> str:
    """Format the formula on a single line."""
    return _format(formula, _QUANTIFIED)


def format_block(formula: Formula, indent: int = 0) -> str:
    """
    Format the formula across several lines, placing each conjunct of a
    top-level conjunction or of a quantifier's conjunctive body on its own line.
    The first line is not indented.
    """
    pad = ' ' * indent
    if isinstance(formula, And):
        return f'\n{pad}and '.join(_format(op, _NEGATION) for op in formula.operands)
    if isinstance(formula, Quantifier) and isinstance(formula.body, And):
        body = format_block(formula.body, indent + 2)
        return f'{_quantifier_head(formula)}\n{pad}  {body}'
    return format_formula(formula)


_WIDTH = 80


def _clause(keyword: str, formula: Formula) -> str:
    text = format_formula(formula)
    if len(text) + len(keyword) + 4 <= _WIDTH:
        return f'  {keyword} {text};'
    return f'  {keyword}\n    {format_block(formula, 4)};'


def print_contract(contract: Contract) -> str:
    """Print the contract in the surface syntax."""
    lines = [f'component {contract.name} {{']
    for port in contract.inputs:
        lines.append(f'  in {port.name} : {format_type(port.type)};')
    for port in contract.outputs:
        lines.append(f'  out {port.name} : {format_type(port.type)};')
    lines.append(_clause('assume', contract.assumption))
    lines.append(_clause('guarantee', contract.guarantee))
    lines.append('}')
    return '\n'.join(lines) + '\n'


def print_contracts(contracts: Sequence[Contract]) -> str:
    return '\n'.join(print_contract(c) for c in contracts)


def _format_ports(ports: Sequence[str]) -> str:
    return ports[0] if len(ports) == 1 else f'({", ".join(ports)})'


def print_system(graph: SystemGraph) -> str:
    """Print the system graph's links and focus in the surface syntax."""
    lines: list[str] = []
    for link in graph.links:
        upstream = graph.component(link.source)
        downstream = graph.component(link.target)
        if list(link.ports) == same_named_ports(upstream, downstream):
            lines.append(f'link {link.source} -> {link.target} {link.kind.value};')
        else:
            lines.append(
                f'link {link.source}.{_format_ports(link.outputs)} -> '
                f'{link.target}.{_format_ports(link.inputs)} {link.kind.value};'
            )
    if graph.focus is not None:
        lines.append(f'focus {graph.focus};')
    return '\n'.join(lines) + ('\n' if lines else '')

