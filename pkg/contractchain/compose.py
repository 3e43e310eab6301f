"""
Composition of contracts along the links of a system graph.

Two proof rules justify composing an upstream component with a downstream one.
PR1 applies to equal links, where the downstream input is the upstream output.
PR2 applies to subset links, where the downstream input is some subset of the
upstream output. Both rules require that the upstream guarantee entails the
downstream assumption. That entailment is a proof obligation, one per link,
which this module generates and discharges over finite domains. Once all
obligations are discharged, the system contract ``A_source => ◊ G_sink``
follows, with ◊ read as "holds when the sink completes".
"""
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
import dataclasses
import enum
import functools
import logging
import time

from .contract import Contract, Link, LinkKind, Port, SystemGraph, validate_graph
from .errors import BudgetExceeded, ObligationNotDischarged, UnsupportedTopology
from .evaluate import (
    DomainBounds, Env, Interpretation, Value, adjacency, compile_formula,
    enumerate_envs, estimate_envs, format_value,
)
from .logic import (
    COORD, FALSE, Formula, Implies, SemType, SubsetEq, Var, canonical, conjoin,
    conjuncts, free_variables, mentions_oracle, rename_free, set_of, typecheck_formula,
)


log = logging.getLogger(__name__)


# The pseudo-variable standing for the obstacle oracle inside obligations.
ORACLE = 'obstacle()'


class Rule(enum.Enum):
    PR1 = 'PR1'
    PR2 = 'PR2'

    @classmethod
    def for_link(cls, link: Link) -> 'Rule':
        return cls.PR1 if link.kind is LinkKind.EQUAL else cls.PR2


class Status(enum.Enum):
    DISCHARGED = 'discharged'
    REFUTED = 'refuted'
    EXHAUSTED = 'exhausted'


class Method(enum.Enum):
    SYNTACTIC = 'syntactic'
    ENUMERATION = 'enumeration'


@dataclasses.dataclass(frozen=True, slots=True)
class Obligation:
    """
    The entailment ``antecedent => consequent`` to be discharged for a link,
    universally quantified over the variables.
    """

    id: str
    link: Link
    variables: tuple[Port, ...]
    antecedent: Formula
    consequent: Formula
    bounds: DomainBounds = DomainBounds()

    @property
    def formula(self) -> Formula:
        return Implies(self.antecedent, self.consequent)

    @property
    def rule(self) -> Rule:
        return Rule.for_link(self.link)

    @property
    def uses_oracle(self) -> bool:
        return any(v.name == ORACLE for v in self.variables)

    def types(self) -> dict[str, SemType]:
        return {v.name: v.type for v in self.variables if v.name != ORACLE}

    def env(self, bindings: Mapping[str, Value], connectivity: int = 4) -> Env:
        """
        Turn bindings for the obligation's variables into an environment. The
        binding for the oracle pseudo-variable becomes the obstacle predicate.
        """
        obstacles = bindings.get(ORACLE)
        values = {k: v for k, v in bindings.items() if k != ORACLE}
        if isinstance(obstacles, frozenset):
            return Env(values, Interpretation.of(
                connectivity=connectivity,
                obstacles=obstacles,  # type: ignore[arg-type]
            ))
        return Env(values, Interpretation.of(connectivity=connectivity))

    def __str__(self) -> str:
        variables = ', '.join(f'{v.name} : {v.type}' for v in self.variables)
        return f'forall {variables} . {self.formula}'


@dataclasses.dataclass(frozen=True, slots=True)
class Verdict:
    """The outcome of discharging an obligation."""

    obligation: str
    status: Status
    method: Method
    counterexample: None | Mapping[str, Value] = None
    envs_checked: int = 0
    estimate: int = 0
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        if (self.status is Status.REFUTED) != (self.counterexample is not None):
            raise ValueError('counterexample must be present exactly when refuted')

    @property
    def discharged(self) -> bool:
        return self.status is Status.DISCHARGED


@dataclasses.dataclass(frozen=True, slots=True)
class RuleApplication:
    rule: Rule
    link: str

    def __str__(self) -> str:
        return f'{self.rule.value} {self.link}'


@dataclasses.dataclass(frozen=True, slots=True)
class DerivedContract:
    """The system contract ``A_source => ◊ G_sink`` and how it was derived."""

    source: str
    sink: str
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    assumption: Formula
    guarantee: Formula
    provenance: tuple[RuleApplication, ...] = ()

    def __str__(self) -> str:
        return f'A_{self.source} ⇒ ◊ G_{self.sink}'


# ======================================================================================
# Generating Obligations


def obligation_for(
    graph: SystemGraph, link: Link, bounds: DomainBounds = DomainBounds()
) -> Obligation:
    """Generate the obligation for one link of the system graph."""
    id = graph.link_ids()[link]
    upstream = graph.component(link.source)
    downstream = graph.component(link.target)

    renaming: dict[str, str] = {}
    premises: list[Formula] = []
    fresh: list[Port] = []

    for output, input in link.ports:
        if link.kind is LinkKind.EQUAL:
            renaming[input] = output
        else:
            name = f'{downstream.name}.{input}'
            renaming[input] = name
            premises.append(SubsetEq(Var(name), Var(output)))
            fresh.append(Port(name, downstream.input(input).type))

    for port in downstream.inputs:
        if port.name not in renaming:
            name = f'{downstream.name}.{port.name}'
            renaming[port.name] = name
            fresh.append(Port(name, port.type))

    antecedent = conjoin(upstream.guarantee, *premises)
    consequent = rename_free(downstream.assumption, renaming)
    body = Implies(antecedent, consequent)

    free = free_variables(body)
    candidates = [Port(name, type) for name, type in upstream.guarantee_types().items()]
    variables = [p for p in candidates + fresh if p.name in free]
    if mentions_oracle(body):
        variables.append(Port(ORACLE, set_of(COORD)))

    obligation = Obligation(id, link, tuple(variables), antecedent, consequent, bounds)
    typecheck_formula(body, obligation.types())
    return obligation


def generate_obligations(
    graph: SystemGraph, bounds: DomainBounds = DomainBounds()
) -> list[Obligation]:
    """
    Generate one obligation per link of the validated system graph. For an
    equal link, the obligation is ``G_up => A_down[input := output]``. For a
    subset link, the downstream inputs become fresh variables constrained to be
    subsets of the upstream outputs: ``G_up and input' subset output =>
    A_down[input := input']``. Downstream inputs fed by other links are
    universally quantified as ``Component.port``.
    """
    validate_graph(graph)
    obligations = [obligation_for(graph, link, bounds) for link in graph.links]
    log.info('generated %d obligations for %d links', len(obligations), len(graph.links))
    return obligations


# ======================================================================================
# Discharging Obligations


def entails_syntactically(antecedent: Formula, consequent: Formula) -> bool:
    """
    Determine whether every conjunct of the consequent is alpha-equivalent to
    some conjunct of the antecedent, which makes the implication valid.
    """
    premises = {canonical(c) for c in conjuncts(antecedent)}
    if FALSE in premises:
        return True
    return all(canonical(c) in premises for c in conjuncts(consequent))


def discharge(
    obligation: Obligation,
    *,
    syntactic: bool = True,
    connectivity: int = 4,
) -> Verdict:
    """
    Discharge the obligation. If enabled, syntactic entailment is tried first.
    Otherwise, all environments within bounds are enumerated in order, and the
    first falsifying environment becomes the counterexample. If the number of
    environments exceeds the budget, the verdict is exhausted.
    """
    started = time.perf_counter()
    estimate = estimate_envs(obligation.variables, obligation.bounds)

    def verdict(
        status: Status,
        method: Method,
        checked: int = 0,
        counterexample: None | Mapping[str, Value] = None,
    ) -> Verdict:
        elapsed = time.perf_counter() - started
        result = Verdict(
            obligation.id, status, method, counterexample, checked, estimate, elapsed
        )
        log.info(
            'obligation %s %s by %s after %d environments in %.3fs',
            obligation.id, status.value, method.value, checked, elapsed,
        )
        return result

    if syntactic and entails_syntactically(obligation.antecedent, obligation.consequent):
        return verdict(Status.DISCHARGED, Method.SYNTACTIC)

    try:
        envs = enumerate_envs(obligation.variables, obligation.bounds)
    except BudgetExceeded as x:
        log.info('obligation %s: %s', obligation.id, x)
        return verdict(Status.EXHAUSTED, Method.ENUMERATION)

    predicate = compile_formula(obligation.formula)
    obstacles: list[frozenset[Value]] = [frozenset()]
    interp = Interpretation(adjacency(connectivity), lambda cell: cell in obstacles[0])
    uses_oracle = obligation.uses_oracle

    checked = 0
    for env in envs:
        checked += 1
        bindings = env.bindings
        if uses_oracle:
            obstacles[0] = bindings[ORACLE]  # type: ignore[assignment]
        if not predicate.holds(bindings, interp):
            return verdict(Status.REFUTED, Method.ENUMERATION, checked, dict(bindings))

    return verdict(Status.DISCHARGED, Method.ENUMERATION, checked)


def discharge_all(
    obligations: Sequence[Obligation],
    *,
    syntactic: bool = True,
    connectivity: int = 4,
    jobs: int = 1,
) -> list[Verdict]:
    """Discharge the obligations, in a pool of processes if jobs exceeds one."""
    task = functools.partial(discharge, syntactic=syntactic, connectivity=connectivity)
    if jobs <= 1 or len(obligations) <= 1:
        return [task(o) for o in obligations]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(task, obligations))


def replay(obligation: Obligation, verdict: Verdict, connectivity: int = 4) -> bool:
    """Evaluate the obligation under the verdict's counterexample."""
    if verdict.counterexample is None:
        raise ValueError(f'verdict for {verdict.obligation} has no counterexample')
    env = obligation.env(verdict.counterexample, connectivity)
    return compile_formula(obligation.formula)(env)


# ======================================================================================
# Deriving the System Contract


def _sink(graph: SystemGraph) -> str:
    sinks = graph.sinks()
    if graph.focus is not None:
        if graph.focus not in sinks:
            raise UnsupportedTopology(f'focus {graph.focus} is not a sink')
        return graph.focus
    if len(sinks) != 1:
        raise UnsupportedTopology(f'{len(sinks)} sinks and no focus')
    return sinks[0]


def derive_system_contract(
    graph: SystemGraph, verdicts: Sequence[Verdict]
) -> DerivedContract:
    """
    Derive ``A_source => ◊ G_sink`` for the path from the only source to the
    only (or focus) sink. Every link's obligation must be discharged.

    Raises:
        ObligationNotDischarged: if some obligation is refuted, exhausted, or
            lacks a verdict
        UnsupportedTopology: for fan-in or for several sinks without focus
    """
    ids = graph.link_ids()
    by_id = {v.obligation: v for v in verdicts}
    for link in graph.links:
        verdict = by_id.get(ids[link])
        if verdict is None:
            raise ObligationNotDischarged(ids[link], 'missing')
        if not verdict.discharged:
            raise ObligationNotDischarged(ids[link], verdict.status.value)

    for name in graph.names:
        producers = {link.source for link in graph.incoming(name)}
        if len(producers) > 1:
            raise UnsupportedTopology(
                f'{name} has {len(producers)} upstream components'
            )

    sink = _sink(graph)
    path: list[Link] = []
    current = sink
    while incoming := graph.incoming(current):
        path[0:0] = incoming
        current = incoming[0].source

    source: Contract = graph.component(current)
    target: Contract = graph.component(sink)
    return DerivedContract(
        source.name,
        target.name,
        source.inputs,
        target.outputs,
        source.assumption,
        target.guarantee,
        tuple(RuleApplication(Rule.for_link(link), ids[link]) for link in path),
    )


# ======================================================================================
# Reporting


def format_bindings(bindings: Mapping[str, Value]) -> str:
    return ', '.join(f'{name} = {format_value(value)}' for name, value in bindings.items())


def format_report(
    obligations: Sequence[Obligation],
    verdicts: Sequence[Verdict],
    derived: None | DerivedContract,
    *,
    failure: None | str = None,
    timings: bool = False,
) -> str:
    """
    Format the composition report, one record per obligation followed by the
    derived contract. Without timings, the report depends only on its inputs.
    """
    by_id = {v.obligation: v for v in verdicts}
    bounds = obligations[0].bounds if obligations else DomainBounds()
    lines = ['# contractchain composition report', f'bounds: {bounds}']

    for obligation in obligations:
        verdict = by_id.get(obligation.id)
        lines.append('')
        lines.append(f'obligation {obligation.id}')
        lines.append(f'  rule: {obligation.rule.value}')
        lines.append(
            '  variables: '
            + ', '.join(f'{v.name} : {v.type}' for v in obligation.variables)
        )
        if verdict is None:
            lines.append('  status: pending')
            continue
        lines.append(f'  status: {verdict.status.value}')
        lines.append(f'  method: {verdict.method.value}')
        lines.append(f'  envs_checked: {verdict.envs_checked}')
        lines.append(f'  estimate: {verdict.estimate}')
        lines.append(
            '  counterexample: '
            + ('-' if verdict.counterexample is None else format_bindings(verdict.counterexample))
        )
        if timings:
            lines.append(f'  elapsed: {verdict.elapsed:.3f}s')

    lines.append('')
    if derived is None:
        lines.append(f'derived: none ({failure or "not derived"})')
    else:
        lines.append(f'derived {derived}')
        lines.append(f'  source: {derived.source}')
        lines.append(f'  sink: {derived.sink}')
        lines.append(
            '  provenance: '
            + (', '.join(str(p) for p in derived.provenance) or '-')
        )
        lines.append(f'  assume: {derived.assumption}')
        lines.append(f'  guarantee: {derived.guarantee}')

    return '\n'.join(lines) + '\n'
