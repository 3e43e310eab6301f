"""
Assume-guarantee contracts and the system graphs that wire them together.

A :class:`Contract` names a component, declares its typed input and output
ports, and states the component's assumption over its inputs and guarantee
over its inputs and outputs. A name may be declared both as input and as output
of the same component, as long as both declarations have the same type. Such a
pass-through port forwards its input value downstream. Consequently, the
guarantee is evaluated over the inputs overlaid by the outputs.

A :class:`SystemGraph` connects components with :class:`Link`\\ s. Each link
connects one upstream component to one downstream component through one or more
pairs of ports. Equal links copy values, whereas subset links only promise that
the downstream input is a subset of the upstream output.
"""
from collections import Counter
from collections.abc import Iterator, Sequence
import dataclasses
import enum
import logging

import networkx as nx

from .errors import (
    AssumptionReferencesOutput,
    CycleDetected,
    DuplicateComponent,
    DuplicateLink,
    DuplicatePort,
    PassThroughTypeMismatch,
    PortTypeMismatch,
    UnknownComponent,
    UnknownPort,
    UnlinkedInput,
)
from .logic import Formula, SemType, TRUE, free_variables, typecheck_formula


log = logging.getLogger(__name__)


class Direction(enum.Enum):
    INPUT = 'in'
    OUTPUT = 'out'

    def __str__(self) -> str:
        return 'input' if self is Direction.INPUT else 'output'


@dataclasses.dataclass(frozen=True, slots=True)
class Port:
    name: str
    type: SemType
    direction: Direction = Direction.INPUT


@dataclasses.dataclass(frozen=True, slots=True)
class Contract:
    """
    A component's contract.

    Creating a contract validates it: port names must be unique per direction,
    pass-through ports must agree on their types, the assumption must only
    mention inputs, and both formulas must type check.
    """

    name: str
    inputs: tuple[Port, ...] = ()
    outputs: tuple[Port, ...] = ()
    assumption: Formula = TRUE
    guarantee: Formula = TRUE

    def __post_init__(self) -> None:
        for ports, direction in ((self.inputs, Direction.INPUT), (self.outputs, Direction.OUTPUT)):
            seen: set[str] = set()
            for port in ports:
                if port.direction is not direction:
                    raise ValueError(f'{port.name} listed as {direction} but is {port.direction}')
                if port.name in seen:
                    raise DuplicatePort(self.name, port.name, str(direction))
                seen.add(port.name)

        inputs = self.input_types()
        for port in self.outputs:
            if port.name in inputs and inputs[port.name] != port.type:
                raise PassThroughTypeMismatch(self.name, port.name)

        outputs_only = {p.name for p in self.outputs} - inputs.keys()
        if offending := free_variables(self.assumption) & outputs_only:
            raise AssumptionReferencesOutput(self.name, min(offending))

        typecheck_formula(self.assumption, inputs)
        typecheck_formula(self.guarantee, self.guarantee_types())

    @property
    def assumption_id(self) -> str:
        return f'A_{self.name}'

    @property
    def guarantee_id(self) -> str:
        return f'G_{self.name}'

    def input_types(self) -> dict[str, SemType]:
        return {p.name: p.type for p in self.inputs}

    def output_types(self) -> dict[str, SemType]:
        return {p.name: p.type for p in self.outputs}

    def guarantee_types(self) -> dict[str, SemType]:
        """The types of the guarantee's variables, i.e., inputs overlaid by outputs."""
        return self.input_types() | self.output_types()

    def input(self, name: str) -> Port:
        for port in self.inputs:
            if port.name == name:
                return port
        raise UnknownPort(self.name, name, 'input')

    def output(self, name: str) -> Port:
        for port in self.outputs:
            if port.name == name:
                return port
        raise UnknownPort(self.name, name, 'output')


class LinkKind(enum.Enum):
    """How a link relates the downstream input to the upstream output."""
    EQUAL = 'equal'
    SUBSET = 'subset'


@dataclasses.dataclass(frozen=True, slots=True)
class Link:
    """
    A link from an upstream component's outputs to a downstream component's
    inputs. Each port pair is ``(output, input)``.
    """

    source: str
    target: str
    ports: tuple[tuple[str, str], ...]
    kind: LinkKind = LinkKind.EQUAL

    def __post_init__(self) -> None:
        if not self.ports:
            raise ValueError(f'link {self.source}->{self.target} connects no ports')

    @property
    def label(self) -> str:
        return f'{self.source}->{self.target}'

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(o for o, _ in self.ports)

    @property
    def inputs(self) -> tuple[str, ...]:
        return tuple(i for _, i in self.ports)


@dataclasses.dataclass(frozen=True, slots=True)
class SystemGraph:
    """
    Components and the links between them. The optional focus names the sink
    whose guarantee the derived system contract promises.
    """

    components: tuple[Contract, ...]
    links: tuple[Link, ...] = ()
    focus: None | str = None

    def component(self, name: str) -> Contract:
        for contract in self.components:
            if contract.name == name:
                return contract
        raise UnknownComponent(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.components)

    def link_ids(self) -> dict[Link, str]:
        """
        Map each link to its identifier, which is its label. Repeated labels
        carry a ``#k`` suffix, counting from 2.
        """
        seen: Counter[str] = Counter()
        ids: dict[Link, str] = {}
        for link in self.links:
            seen[link.label] += 1
            count = seen[link.label]
            ids[link] = link.label if count == 1 else f'{link.label}#{count}'
        return ids

    def incoming(self, name: str) -> tuple[Link, ...]:
        return tuple(link for link in self.links if link.target == name)

    def outgoing(self, name: str) -> tuple[Link, ...]:
        return tuple(link for link in self.links if link.source == name)

    def sources(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if not self.incoming(n))

    def sinks(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if not self.outgoing(n))

    def dataflow(self) -> 'nx.DiGraph[str]':
        graph: 'nx.DiGraph[str]' = nx.DiGraph()
        graph.add_nodes_from(self.names)
        graph.add_edges_from((link.source, link.target) for link in self.links)
        return graph

    def topological_order(self) -> list[str]:
        """
        Order components so that every link points forward. Ties are broken by
        declaration order, which makes the order deterministic.
        """
        position = {name: index for index, name in enumerate(self.names)}
        return list(nx.lexicographical_topological_sort(
            self.dataflow(), key=lambda name: position[name]
        ))

    def __iter__(self) -> Iterator[Contract]:
        return iter(self.components)


def _check_link_types(graph: SystemGraph, link: Link) -> None:
    source = graph.component(link.source)
    target = graph.component(link.target)
    for output_name, input_name in link.ports:
        output = source.output(output_name)
        input = target.input(input_name)
        if link.kind is LinkKind.EQUAL:
            if output.type != input.type:
                raise PortTypeMismatch(
                    link, f'{output_name} : {output.type} feeds {input_name} : {input.type}'
                )
        elif not (output.type.is_set and output.type == input.type):
            raise PortTypeMismatch(
                link,
                f'subset link requires equal set types, not '
                f'{output.type} and {input.type}',
            )


def validate_graph(graph: SystemGraph) -> None:
    """
    Validate the system graph. Links must name declared components and ports,
    linked ports must have matching types, the dataflow must be acyclic, and
    every input of a component with incoming links must be covered by exactly
    one link.
    """
    for name, count in Counter(graph.names).items():
        if count > 1:
            raise DuplicateComponent(name)

    for link in graph.links:
        _check_link_types(graph, link)

    coverage: Counter[tuple[str, str]] = Counter(
        (link.target, input) for link in graph.links for input in link.inputs
    )
    for (component, port), count in coverage.items():
        if count > 1:
            raise DuplicateLink(component, port)

    try:
        cycle = nx.find_cycle(graph.dataflow())
    except nx.NetworkXNoCycle:
        pass
    else:
        raise CycleDetected([edge[0] for edge in cycle] + [cycle[-1][1]])

    for contract in graph.components:
        if not graph.incoming(contract.name):
            continue
        for port in contract.inputs:
            if (contract.name, port.name) not in coverage:
                raise UnlinkedInput(contract.name, port.name)

    if graph.focus is not None:
        graph.component(graph.focus)

    log.debug(
        'validated %d components and %d links', len(graph.components), len(graph.links)
    )


def same_named_ports(upstream: Contract, downstream: Contract) -> list[tuple[str, str]]:
    """Pair every downstream input with the upstream output of the same name."""
    outputs = upstream.output_types()
    return [(p.name, p.name) for p in downstream.inputs if p.name in outputs]


def system_of(contracts: Sequence[Contract], *links: Link) -> SystemGraph:
    """Create and validate a system graph."""
    graph = SystemGraph(tuple(contracts), tuple(links))
    validate_graph(graph)
    return graph
