"""
Confidence in a system from the verification techniques applied to it.

Verification techniques fall into three categories: testing, simulation-based
testing, and formal methods. A :class:`ConfidenceLedger` records which
techniques were applied to which component, together with references to the
evidence. A component's score is the fraction of categories applied; the
system's score is the score of its weakest component. The metric is a
placeholder and not normative.
"""
from collections.abc import Iterable, Sequence
import dataclasses
import enum
from fractions import Fraction
import logging
from pathlib import Path
import tomllib
from typing import cast

from .contract import SystemGraph
from .errors import ConfigError, UnknownComponent
from .styling import SYMBOLS, Styler


log = logging.getLogger(__name__)


class Technique(enum.Enum):
    TESTING = 'testing'
    SIMULATION = 'simulation-based-testing'
    FORMAL_METHODS = 'formal-methods'

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Technique.TESTING: 'Testing',
    Technique.SIMULATION: 'Simulation-based testing',
    Technique.FORMAL_METHODS: 'Formal methods',
}


@dataclasses.dataclass(frozen=True, slots=True)
class Evidence:
    component: str
    technique: Technique
    ref: str


@dataclasses.dataclass(frozen=True, slots=True)
class ConfidenceLedger:
    """
    An immutable record of the techniques applied to the components of a
    system. Recording returns a new ledger.
    """

    components: tuple[str, ...]
    evidence: tuple[Evidence, ...] = ()

    @classmethod
    def for_system(cls, graph: SystemGraph) -> 'ConfidenceLedger':
        return cls(graph.names)

    def record(
        self, component: str, technique: Technique, ref: str
    ) -> 'ConfidenceLedger':
        """
        Record that the technique was applied to the component. Recording the
        same evidence again leaves the ledger unchanged.

        Raises:
            UnknownComponent: if the component is not part of the system
        """
        if component not in self.components:
            raise UnknownComponent(component)
        entry = Evidence(component, technique, ref)
        if entry in self.evidence:
            return self
        return dataclasses.replace(self, evidence=self.evidence + (entry,))

    def techniques(self, component: str) -> frozenset[Technique]:
        return frozenset(e.technique for e in self.evidence if e.component == component)

    def refs(self, component: str, technique: Technique) -> tuple[str, ...]:
        return tuple(
            e.ref for e in self.evidence
            if e.component == component and e.technique is technique
        )

    @property
    def entries(self) -> dict[str, frozenset[Technique]]:
        return {name: self.techniques(name) for name in self.components}


def record(
    ledger: ConfidenceLedger, component: str, technique: Technique, ref: str
) -> ConfidenceLedger:
    return ledger.record(component, technique, ref)


def load_ledger(path: str | Path, graph: SystemGraph) -> ConfidenceLedger:
    """Load a ledger file, which is written in TOML, for the system."""
    with open(path, mode='rb') as file:
        return parse_ledger(file.read().decode('utf8'), graph)


def parse_ledger(text: str, graph: SystemGraph) -> ConfidenceLedger:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as x:
        raise ConfigError(f'malformed ledger: {x}') from None

    entries = data.get('evidence', [])
    if not isinstance(entries, list):
        raise ConfigError('ledger "evidence" is not an array of tables')

    ledger = ConfidenceLedger.for_system(graph)
    for entry in cast(list[object], entries):
        if not isinstance(entry, dict):
            raise ConfigError(f'ledger entry {entry!r} is not a table')
        entry = cast(dict[str, object], entry)
        component, technique, ref = (
            entry.get('component'), entry.get('technique'), entry.get('ref', '')
        )
        if not isinstance(component, str) or not isinstance(ref, str):
            raise ConfigError(f'malformed ledger entry {entry!r}')
        try:
            kind = Technique(technique)
        except ValueError:
            raise ConfigError(f'unknown technique {technique!r}') from None
        ledger = ledger.record(component, kind, ref)

    log.debug('loaded %d pieces of evidence', len(ledger.evidence))
    return ledger


# ======================================================================================
# Reporting


@dataclasses.dataclass(frozen=True, slots=True)
class ComponentConfidence:
    component: str
    techniques: frozenset[Technique]
    evidence: tuple[Evidence, ...]

    @property
    def score(self) -> Fraction:
        return Fraction(len(self.techniques), len(Technique))


@dataclasses.dataclass(frozen=True, slots=True)
class ConfidenceReport:
    rows: tuple[ComponentConfidence, ...]

    @property
    def system_score(self) -> Fraction:
        """The weakest component's score, or zero for an empty system."""
        return min((row.score for row in self.rows), default=Fraction(0))

    def row(self, component: str) -> ComponentConfidence:
        for row in self.rows:
            if row.component == component:
                return row
        raise UnknownComponent(component)


def report(ledger: ConfidenceLedger, graph: SystemGraph) -> ConfidenceReport:
    """Compute the confidence report for the system's components."""
    for entry in ledger.evidence:
        if entry.component not in graph.names:
            raise UnknownComponent(entry.component)
    return ConfidenceReport(tuple(
        ComponentConfidence(
            name,
            ledger.techniques(name),
            tuple(e for e in ledger.evidence if e.component == name),
        )
        for name in graph.names
    ))


def _table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> list[list[str]]:
    body = [list(header), *(list(row) for row in rows)]
    widths = [max(len(row[i]) for row in body) for i in range(len(header))]
    return [[cell.ljust(width) for cell, width in zip(row, widths)] for row in body]


def format_confidence(
    confidence: ConfidenceReport, styler: None | Styler = None
) -> str:
    """
    Format the report as a matrix of check marks and crosses, one row per
    component and one column per technique, followed by scores and evidence.
    """
    styler = styler or Styler()
    techniques = list(Technique)
    cells = _table(
        ['Component', *(t.label for t in techniques), 'Score'],
        (
            [
                row.component,
                *(SYMBOLS.check if t in row.techniques else SYMBOLS.cross for t in techniques),
                str(row.score),
            ]
            for row in confidence.rows
        ),
    )

    lines = [styler.strong('  '.join(cells[0]).rstrip())]
    for line, row in zip(cells[1:], confidence.rows):
        rendered = [line[0]]
        for cell, technique in zip(line[1:-1], techniques):
            if styler.enabled:
                mark = cell.strip()
                cell = cell.replace(mark, styler.mark(technique in row.techniques), 1)
            rendered.append(cell)
        rendered.append(line[-1])
        lines.append('  '.join(rendered).rstrip())

    lines.append('')
    lines.append(
        f'system score (weakest link, non-normative): {confidence.system_score}'
    )
    lines.append('')
    lines.append('evidence:')
    if not any(row.evidence for row in confidence.rows):
        lines.append('  -')
    for row in confidence.rows:
        for entry in row.evidence:
            lines.append(f'  {entry.component} {entry.technique.value}: {entry.ref}')
    return '\n'.join(lines) + '\n'
