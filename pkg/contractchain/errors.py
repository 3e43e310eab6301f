"""
The exception hierarchy for contractchain.

All exceptions raised on purpose by this package derive from
:class:`ContractChainError`. Exceptions that stem from text, i.e., contract or
system files, may carry a :class:`SourceSpan`, which the command line tool uses
for diagnostics of the form ``file:line:col: message``.
"""
import dataclasses
from typing import TYPE_CHECKING, Any, Sequence

if TYPE_CHECKING:
    from .contract import Link
    from .monitor import MonitorEvent


@dataclasses.dataclass(frozen=True, slots=True)
class SourceSpan:
    """A region of source text with 1-based lines and columns."""

    file: str
    start_line: int
    start_column: int
    end_line: int
    end_column: int

    def __post_init__(self) -> None:
        if (self.start_line, self.start_column) > (self.end_line, self.end_column):
            raise ValueError(f'span starts after it ends: {self}')

    def __str__(self) -> str:
        return f'{self.file}:{self.start_line}:{self.start_column}'


class ContractChainError(Exception):
    """The base class of all contractchain errors."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message
        self.span: None | SourceSpan = None

    def at(self, span: None | SourceSpan) -> 'ContractChainError':
        """Attach the span unless the error already has one."""
        if self.span is None:
            self.span = span
        return self

    def __str__(self) -> str:
        return self.message if self.span is None else f'{self.span}: {self.message}'


class ConfigError(ContractChainError):
    """A usage problem, i.e., a bad flag value or configuration file."""


# --------------------------------------------------------------------------------------
# Type Checking


class TypeCheckError(ContractChainError):
    pass


class UnboundVariable(TypeCheckError):
    def __init__(self, name: str, node: Any = None) -> None:
        super().__init__(f'unbound variable "{name}"')
        self.name = name
        self.node = node


class TypeMismatch(TypeCheckError):
    def __init__(self, node: Any, expected: object, actual: object) -> None:
        super().__init__(f'expected {expected} but found {actual}')
        self.node = node
        self.expected = expected
        self.actual = actual


# --------------------------------------------------------------------------------------
# Contracts and System Graphs


class ContractDefinitionError(ContractChainError):
    pass


class DuplicatePort(ContractDefinitionError):
    def __init__(self, component: str, port: str, direction: str) -> None:
        super().__init__(f'{component} declares {direction} port "{port}" twice')
        self.component = component
        self.port = port


class AssumptionReferencesOutput(ContractDefinitionError):
    def __init__(self, component: str, port: str) -> None:
        super().__init__(f'assumption of {component} references output "{port}"')
        self.component = component
        self.port = port


class PassThroughTypeMismatch(ContractDefinitionError):
    def __init__(self, component: str, port: str) -> None:
        super().__init__(
            f'{component} declares "{port}" as input and output with different types'
        )
        self.component = component
        self.port = port


class GraphError(ContractChainError):
    pass


class CycleDetected(GraphError):
    def __init__(self, components: Sequence[str]) -> None:
        super().__init__(f'dataflow cycle through {" -> ".join(components)}')
        self.components = tuple(components)


class PortTypeMismatch(GraphError):
    def __init__(self, link: 'Link', detail: str) -> None:
        super().__init__(f'link {link.label}: {detail}')
        self.link = link


class UnlinkedInput(GraphError):
    def __init__(self, component: str, port: str) -> None:
        super().__init__(f'input "{port}" of {component} is not covered by any link')
        self.component = component
        self.port = port


class DuplicateLink(GraphError):
    def __init__(self, component: str, port: str) -> None:
        super().__init__(f'input "{port}" of {component} is covered by more than one link')
        self.component = component
        self.port = port


class DuplicateComponent(GraphError):
    def __init__(self, name: str) -> None:
        super().__init__(f'component "{name}" declared more than once')
        self.name = name


class UnknownComponent(GraphError):
    def __init__(self, name: str) -> None:
        super().__init__(f'unknown component "{name}"')
        self.name = name


class UnknownPort(GraphError):
    def __init__(self, component: str, port: str, direction: str) -> None:
        super().__init__(f'{component} has no {direction} port "{port}"')
        self.component = component
        self.port = port
        self.direction = direction


# --------------------------------------------------------------------------------------
# Surface Syntax


class ParseError(ContractChainError):
    def __init__(
        self, span: SourceSpan, message: str, expected: Sequence[str] = ()
    ) -> None:
        if not message:
            raise ValueError('parse error without message')
        super().__init__(message)
        self.span = span
        self.expected = tuple(expected)


class LiteralOutOfRange(ParseError):
    pass


# --------------------------------------------------------------------------------------
# Evaluation


class EvaluationError(ContractChainError):
    pass


class DomainNotASet(EvaluationError):
    def __init__(self, value: object) -> None:
        super().__init__(f'quantifier domain evaluates to {value!r}, not a set')
        self.value = value


class BudgetExceeded(EvaluationError):
    def __init__(self, estimate: int, limit: int) -> None:
        super().__init__(f'{estimate:,} environments exceed budget of {limit:,}')
        self.estimate = estimate
        self.limit = limit


# --------------------------------------------------------------------------------------
# Composition


class CompositionError(ContractChainError):
    pass


class ObligationNotDischarged(CompositionError):
    def __init__(self, obligation: str, status: object) -> None:
        super().__init__(f'obligation {obligation} is {status}, not discharged')
        self.obligation = obligation
        self.status = status


class UnsupportedTopology(CompositionError):
    def __init__(self, reason: str) -> None:
        super().__init__(f'unsupported topology: {reason}')
        self.reason = reason


# --------------------------------------------------------------------------------------
# Monitoring


class MonitorError(ContractChainError):
    pass


class BodyFailure(MonitorError):
    def __init__(
        self,
        component: str,
        cause: BaseException,
        events: 'Sequence[MonitorEvent]' = (),
    ) -> None:
        super().__init__(f'body of {component} failed: {cause}')
        self.component = component
        self.cause = cause
        self.events = tuple(events)


# --------------------------------------------------------------------------------------
# Case Study


class CaseStudyError(ContractChainError):
    pass


class EnumerationCapExceeded(CaseStudyError):
    def __init__(self, cap: int, what: str = 'candidate plans') -> None:
        super().__init__(f'exceeded cap of {cap:,} {what}')
        self.cap = cap


class EmptyPlanSet(CaseStudyError):
    def __init__(self) -> None:
        super().__init__('agent received an empty plan set; no plan exists')


class InvalidWorld(CaseStudyError):
    def __init__(self, reason: str) -> None:
        super().__init__(f'invalid world: {reason}')
        self.reason = reason


class InvalidFault(CaseStudyError):
    def __init__(self, reason: str) -> None:
        super().__init__(f'invalid fault: {reason}')
        self.reason = reason
