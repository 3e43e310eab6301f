"""
Runtime monitors generated from contracts.

A monitored component checks its assumption on the inputs before running the
component body and its guarantee on inputs and outputs after the body
completes. Every check appends a :class:`MonitorEvent` to an
:class:`EventLog`, which also writes each event as a line of JSON. Completion
is the deadline for the eventually in ``A => ◊ G``, i.e., the guarantee must
hold when the body returns.
"""
from collections.abc import Callable, Iterator, Mapping
import dataclasses
import enum
import json
import logging
import threading
import time
from typing import TextIO, TypeAlias

from .contract import Contract, LinkKind, SystemGraph, validate_graph
from .errors import BodyFailure, MonitorError
from .evaluate import (
    DEFAULT_INTERPRETATION, CompiledFormula, Interpretation, Value, compile_formula,
    json_value,
)
from .logic import TRUE, Formula, SubsetEq, Var, conjoin


log = logging.getLogger(__name__)


Bindings: TypeAlias = Mapping[str, Value]
Body: TypeAlias = Callable[[Bindings], Bindings]


class Phase(enum.Enum):
    INPUT_CHECKED = 'InputChecked'
    OUTPUT_CHECKED = 'OutputChecked'


class Outcome(enum.Enum):
    PASS = 'Pass'
    VIOLATION = 'Violation'


class Policy(enum.Enum):
    """What to do after a violation."""

    HALT_ON_VIOLATION = 'halt'
    LOG_AND_CONTINUE = 'log'


@dataclasses.dataclass(frozen=True, slots=True)
class MonitorEvent:
    seq: int
    timestamp: float
    component: str
    phase: Phase
    verdict: Outcome
    formula: str
    bindings: Bindings

    @property
    def is_violation(self) -> bool:
        return self.verdict is Outcome.VIOLATION

    def to_json(self) -> str:
        return json.dumps({
            'seq': self.seq,
            'timestamp': round(self.timestamp, 6),
            'component': self.component,
            'phase': self.phase.value,
            'verdict': self.verdict.value,
            'formula': self.formula,
            'bindings': {k: json_value(v) for k, v in self.bindings.items()},
        }, ensure_ascii=False)

    def __str__(self) -> str:
        return f'#{self.seq} {self.component} {self.phase.value} {self.verdict.value} {self.formula}'


class EventLog:
    """
    An append-only log of monitor events. Appending is safe across threads.
    If the log has a stream, each event is written and flushed before
    :meth:`append` returns.
    """

    def __init__(
        self,
        stream: None | TextIO = None,
        clock: Callable[[], float] = time.monotonic,
    ) -> None:
        self._stream = stream
        self._clock = clock
        self._start = clock()
        self._lock = threading.Lock()
        self._events: list[MonitorEvent] = []

    def append(
        self,
        component: str,
        phase: Phase,
        verdict: Outcome,
        formula: str,
        bindings: Bindings,
    ) -> MonitorEvent:
        with self._lock:
            event = MonitorEvent(
                len(self._events) + 1,
                self._clock() - self._start,
                component,
                phase,
                verdict,
                formula,
                dict(bindings),
            )
            self._events.append(event)
            if self._stream is not None:
                self._stream.write(event.to_json())
                self._stream.write('\n')
                self._stream.flush()
        if event.is_violation:
            log.warning('violation of %s by %s', formula, component)
        return event

    @property
    def events(self) -> tuple[MonitorEvent, ...]:
        with self._lock:
            return tuple(self._events)

    def violations(self) -> list[MonitorEvent]:
        return [e for e in self.events if e.is_violation]

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[MonitorEvent]:
        return iter(self.events)


# ======================================================================================
# Monitored Components


@dataclasses.dataclass(frozen=True, slots=True)
class Step:
    """The result of running one monitored component."""

    component: str
    outputs: None | Bindings
    halted: None | Phase = None


def _call_with_timeout(
    name: str, body: Body, inputs: Bindings, timeout: float
) -> Bindings:
    # The worker is a daemon thread so that a body which never returns does not
    # keep the interpreter alive after the run has failed.
    outputs: list[Bindings] = []
    failures: list[Exception] = []

    def work() -> None:
        try:
            outputs.append(body(inputs))
        except Exception as x:
            failures.append(x)

    worker = threading.Thread(target=work, name=f'body-{name}', daemon=True)
    worker.start()
    worker.join(timeout)
    if worker.is_alive():
        raise TimeoutError(f'no result after {timeout} seconds')
    if failures:
        raise failures[0]
    return outputs[0]


@dataclasses.dataclass(slots=True)
class MonitoredComponent:
    """A component body wrapped with monitors for its contract."""

    contract: Contract
    body: Body
    policy: Policy
    interp: Interpretation = DEFAULT_INTERPRETATION
    timeout: None | float = None
    _assumption: CompiledFormula = dataclasses.field(init=False, repr=False)
    _guarantee: CompiledFormula = dataclasses.field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._assumption = compile_formula(self.contract.assumption)
        self._guarantee = compile_formula(self.contract.guarantee)

    @property
    def name(self) -> str:
        return self.contract.name

    def _invoke(self, inputs: Bindings, events: EventLog) -> Bindings:
        try:
            if self.timeout is None:
                return self.body(inputs)
            return _call_with_timeout(self.name, self.body, inputs, self.timeout)
        except Exception as x:
            raise BodyFailure(self.name, x, events.events) from x

    def run(
        self,
        inputs: Bindings,
        events: EventLog,
        *,
        premise: Formula = TRUE,
        context: None | Bindings = None,
    ) -> Step:
        """
        Run the component. The premise is checked together with the
        assumption; the context binds any extra variables it mentions.

        Raises:
            BodyFailure: if the body raises an exception, exceeds the timeout,
                or returns outputs that do not bind exactly the output ports
        """
        contract = self.contract
        scope = {**(context or {}), **inputs}

        if premise == TRUE:
            accepted = self._assumption.holds(scope, self.interp)
        else:
            accepted = compile_formula(conjoin(contract.assumption, premise)).holds(
                scope, self.interp
            )
        events.append(
            self.name,
            Phase.INPUT_CHECKED,
            Outcome.PASS if accepted else Outcome.VIOLATION,
            contract.assumption_id,
            scope,
        )
        if not accepted and self.policy is Policy.HALT_ON_VIOLATION:
            return Step(self.name, None, Phase.INPUT_CHECKED)

        outputs = self._invoke(inputs, events)
        expected = {port.name for port in contract.outputs}
        if set(outputs) != expected:
            cause = ValueError(
                f'outputs bind {", ".join(sorted(outputs)) or "nothing"} '
                f'instead of {", ".join(sorted(expected))}'
            )
            raise BodyFailure(self.name, cause, events.events)

        merged = {**inputs, **outputs}
        delivered = self._guarantee.holds(merged, self.interp)
        events.append(
            self.name,
            Phase.OUTPUT_CHECKED,
            Outcome.PASS if delivered else Outcome.VIOLATION,
            contract.guarantee_id,
            merged,
        )
        if not delivered and self.policy is Policy.HALT_ON_VIOLATION:
            return Step(self.name, outputs, Phase.OUTPUT_CHECKED)
        return Step(self.name, outputs)


def wrap(
    contract: Contract,
    body: Body,
    policy: Policy,
    *,
    interp: Interpretation = DEFAULT_INTERPRETATION,
    timeout: None | float = None,
) -> MonitoredComponent:
    """Wrap the body with monitors for the contract."""
    return MonitoredComponent(contract, body, policy, interp, timeout)


# ======================================================================================
# Pipelines


@dataclasses.dataclass(frozen=True, slots=True)
class Halted:
    component: str
    phase: Phase

    def __str__(self) -> str:
        return f'halted at {self.component} after {self.phase.value}'


@dataclasses.dataclass(frozen=True, slots=True)
class PipelineResult:
    final: Bindings
    halted: None | Halted
    events: tuple[MonitorEvent, ...]

    @property
    def violations(self) -> list[MonitorEvent]:
        return [e for e in self.events if e.is_violation]

    @property
    def ok(self) -> bool:
        return self.halted is None and not self.violations


def run_pipeline(
    graph: SystemGraph,
    bodies: Mapping[str, Body],
    inputs: Bindings,
    policy: Policy,
    *,
    events: None | EventLog = None,
    interp: Interpretation = DEFAULT_INTERPRETATION,
    timeout: None | float = None,
) -> PipelineResult:
    """
    Run the monitored components of the system in topological order. Outputs
    are threaded along links to downstream inputs. Over a subset link, the
    downstream component receives the full upstream value and the premise
    ``input subset Upstream.output`` is checked with its assumption. Under
    :attr:`Policy.HALT_ON_VIOLATION`, the pipeline stops at the first
    violation, before propagating any values downstream.

    The final environment merges the inputs and outputs of every component
    that ran.
    """
    validate_graph(graph)
    for name in graph.names:
        if name not in bodies:
            raise MonitorError(f'no body for component {name}')

    events = EventLog() if events is None else events
    produced: dict[str, Bindings] = {}
    final: dict[str, Value] = {}

    def result(halted: None | Halted = None) -> PipelineResult:
        return PipelineResult(final, halted, events.events)

    for name in graph.topological_order():
        contract = graph.component(name)
        component_inputs: dict[str, Value] = {}
        context: dict[str, Value] = {}
        premises: list[Formula] = []

        for link in graph.incoming(name):
            for output, input in link.ports:
                value = produced[link.source][output]
                component_inputs[input] = value
                if link.kind is LinkKind.SUBSET:
                    upstream = f'{link.source}.{output}'
                    context[upstream] = value
                    premises.append(SubsetEq(Var(input), Var(upstream)))

        for port in contract.inputs:
            if port.name not in component_inputs:
                if port.name not in inputs:
                    raise MonitorError(f'input does not bind {port.name} of {name}')
                component_inputs[port.name] = inputs[port.name]

        monitored = wrap(contract, bodies[name], policy, interp=interp, timeout=timeout)
        step = monitored.run(
            component_inputs, events, premise=conjoin(*premises), context=context
        )

        final.update(component_inputs)
        if step.outputs is not None:
            final.update(step.outputs)
            produced[name] = step.outputs
        if step.halted is not None:
            log.warning('pipeline halted at %s after %s', name, step.halted.value)
            return result(Halted(name, step.halted))

    return result()
