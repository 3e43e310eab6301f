"""
Mutation operators for formulas.

A mutant changes a formula in exactly one position. Mutating the downstream
assumption of a link and discharging the resulting obligation checks whether
the bounds are large enough to tell the mutant apart from the original.
"""
from collections import Counter
from collections.abc import Iterator, Mapping, Sequence
import dataclasses
import enum
import logging
import random

from .compose import Status, Verdict, discharge, obligation_for
from .contract import SystemGraph
from .errors import TypeCheckError
from .evaluate import DomainBounds
from .logic import (
    And, BinaryAtom, Eq, Exists, Forall, Formula, Implies, In, Leq, Lt, Neq, Not,
    Or, Quantifier, SemType, SubsetEq, canonical, children, typecheck_formula,
)


log = logging.getLogger(__name__)


class Operator(enum.Enum):
    FLIP_COMPARISON = 'flip-comparison'
    SWAP_QUANTIFIER = 'swap-quantifier'
    NEGATE_ATOM = 'negate-atom'
    DROP_CONJUNCT = 'drop-conjunct'
    SWAP_ARGUMENTS = 'swap-arguments'
    SWAP_CONNECTIVE = 'swap-connective'


Path = tuple[int, ...]


@dataclasses.dataclass(frozen=True, slots=True)
class Mutant:
    operator: Operator
    path: Path
    formula: Formula

    def __str__(self) -> str:
        position = '.'.join(str(i) for i in self.path) or 'root'
        return f'{self.operator.value}@{position}'


def at_path(formula: Formula, path: Path) -> Formula:
    """Look up the subformula at the path of child indices."""
    for index in path:
        formula = children(formula)[index]
    return formula


def replace_at(formula: Formula, path: Path, replacement: Formula) -> Formula:
    """Replace the subformula at the path."""
    if not path:
        return replacement

    index, rest = path[0], path[1:]
    if isinstance(formula, (And, Or)):
        operands = list(formula.operands)
        operands[index] = replace_at(operands[index], rest, replacement)
        return type(formula)(tuple(operands))
    if isinstance(formula, Implies):
        if index == 0:
            return Implies(replace_at(formula.antecedent, rest, replacement), formula.consequent)
        return Implies(formula.antecedent, replace_at(formula.consequent, rest, replacement))
    if isinstance(formula, Not):
        return Not(replace_at(formula.operand, rest, replacement))
    if isinstance(formula, Quantifier):
        return type(formula)(
            formula.binder, formula.domain, replace_at(formula.body, rest, replacement)
        )
    raise IndexError(f'no child {index} in {formula}')


def _positions(formula: Formula, path: Path = ()) -> Iterator[tuple[Path, Formula]]:
    yield path, formula
    for index, child in enumerate(children(formula)):
        yield from _positions(child, path + (index,))


_FLIPS: dict[type[BinaryAtom], type[BinaryAtom]] = {
    Lt: Leq, Leq: Lt, Eq: Neq, Neq: Eq,
}


def _local_mutants(formula: Formula) -> Iterator[tuple[Operator, Formula]]:
    if isinstance(formula, BinaryAtom):
        flipped = _FLIPS.get(type(formula))
        if flipped is not None:
            yield Operator.FLIP_COMPARISON, flipped(formula.left, formula.right)
        if isinstance(formula, (In, SubsetEq)):
            yield Operator.SWAP_ARGUMENTS, type(formula)(formula.right, formula.left)
        yield Operator.NEGATE_ATOM, Not(formula)
    elif isinstance(formula, Quantifier):
        swapped = Exists if isinstance(formula, Forall) else Forall
        yield Operator.SWAP_QUANTIFIER, swapped(formula.binder, formula.domain, formula.body)
    elif isinstance(formula, (And, Or)):
        for index in range(len(formula.operands)):
            rest = formula.operands[:index] + formula.operands[index + 1:]
            if isinstance(formula, And):
                yield Operator.DROP_CONJUNCT, rest[0] if len(rest) == 1 else And(rest)
        swapped = Or if isinstance(formula, And) else And
        yield Operator.SWAP_CONNECTIVE, swapped(formula.operands)


def mutants(
    formula: Formula, types: None | Mapping[str, SemType] = None
) -> list[Mutant]:
    """
    Generate all single-position mutants of the formula in pre-order. With
    types for the free variables, mutants that fail to type check are
    discarded. Mutants alpha-equivalent to the original or to an earlier mutant
    are discarded as well.
    """
    seen = {canonical(formula)}
    result: list[Mutant] = []
    for path, subformula in _positions(formula):
        for operator, replacement in _local_mutants(subformula):
            mutated = replace_at(formula, path, replacement)
            key = canonical(mutated)
            if key in seen:
                continue
            if types is not None:
                try:
                    typecheck_formula(mutated, types)
                except TypeCheckError:
                    continue
            seen.add(key)
            result.append(Mutant(operator, path, mutated))
    return result


def sample_mutants(
    formula: Formula,
    count: int,
    seed: int,
    types: None | Mapping[str, SemType] = None,
) -> list[Mutant]:
    """Select up to count mutants at random, reproducibly for the seed."""
    candidates = mutants(formula, types)
    if count >= len(candidates):
        return candidates
    chosen = sorted(random.Random(seed).sample(range(len(candidates)), count))
    return [candidates[i] for i in chosen]


# ======================================================================================
# Mutation Campaigns


@dataclasses.dataclass(frozen=True, slots=True)
class MutationResult:
    obligation: str
    mutant: Mutant
    verdict: Verdict

    @property
    def killed(self) -> bool:
        return self.verdict.status is Status.REFUTED


def mutate_assumption(graph: SystemGraph, component: str, assumption: Formula) -> SystemGraph:
    """Replace the assumption of the component."""
    return dataclasses.replace(graph, components=tuple(
        dataclasses.replace(c, assumption=assumption) if c.name == component else c
        for c in graph.components
    ))


def mutation_campaign(
    graph: SystemGraph,
    count: int,
    seed: int,
    bounds: DomainBounds = DomainBounds(),
    *,
    connectivity: int = 4,
) -> list[MutationResult]:
    """
    For every link, mutate the downstream assumption up to count times and
    discharge the resulting obligations without syntactic entailment. A mutant
    is killed if its obligation is refuted.
    """
    results: list[MutationResult] = []
    for link in graph.links:
        downstream = graph.component(link.target)
        for mutant in sample_mutants(
            downstream.assumption, count, seed, downstream.input_types()
        ):
            mutated = mutate_assumption(graph, downstream.name, mutant.formula)
            obligation = obligation_for(mutated, link, bounds)
            verdict = discharge(obligation, syntactic=False, connectivity=connectivity)
            results.append(MutationResult(obligation.id, mutant, verdict))

    killed = sum(1 for r in results if r.killed)
    log.info('%d of %d mutants killed', killed, len(results))
    return results


def format_mutations(results: Sequence[MutationResult]) -> str:
    """Summarize the campaign per obligation, listing the surviving mutants."""
    lines = ['', 'mutants']
    by_obligation: dict[str, list[MutationResult]] = {}
    for result in results:
        by_obligation.setdefault(result.obligation, []).append(result)

    for id, group in by_obligation.items():
        counts = Counter(r.verdict.status for r in group)
        lines.append(
            f'  {id}: {len(group)} generated, {counts[Status.REFUTED]} killed, '
            f'{counts[Status.DISCHARGED]} survived, {counts[Status.EXHAUSTED]} exhausted'
        )
        for result in group:
            if not result.killed:
                lines.append(f'    {result.mutant} {result.verdict.status.value}')
    return '\n'.join(lines) + '\n'
