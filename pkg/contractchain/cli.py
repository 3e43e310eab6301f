"""
The command line tool.

Its subcommands check contract files, compose a system by discharging its
proof obligations, run the monitored rover in a simulated world, report the
confidence in a system, and pretty-print contract files. Exit status 0 means
success, 1 a verification failure, and 2 a usage or I/O problem.
"""
import argparse
from collections.abc import Mapping, Sequence
import dataclasses
import logging
import os
from pathlib import Path
import sys
import tomllib
from typing import Any, TextIO, cast

from . import __version__
from .compose import (
    DerivedContract, discharge_all, derive_system_contract, format_report,
    generate_obligations,
)
from .confidence import format_confidence, load_ledger, report
from .contract import Contract, Port, SystemGraph
from .dsl import format_type, load_contracts, load_system, print_contracts
from .errors import (
    BodyFailure, CaseStudyError, CompositionError, ConfigError, ContractChainError,
    EnumerationCapExceeded, EmptyPlanSet,
)
from .evaluate import DomainBounds, adjacency, format_value
from .monitor import EventLog, Policy, run_pipeline
from .mutate import format_mutations, mutation_campaign
from .rover import (
    Plan, bfs_oracle, data_path, format_plan, load_world, rover_bodies, rover_inputs,
)
from .styling import SYMBOLS, Styler


log = logging.getLogger(__name__)


OUT_VARIABLE = 'CONTRACTCHAIN_OUT'

SUCCESS = 0
FAILURE = 1
USAGE = 2


# ======================================================================================
# Configuration


@dataclasses.dataclass(frozen=True, slots=True)
class RunConfig:
    """The configuration of one command, from flags, a file, and environment."""

    contracts: Path
    system: Path
    world: Path
    ledger: Path
    goal: bool = False
    bounds: DomainBounds = DomainBounds()
    policy: Policy = Policy.HALT_ON_VIOLATION
    out: Path = Path('out')
    seed: int = 0
    adjacency: int = 4
    jobs: int = 1
    timeout: None | float = None
    mutants: int = 0
    syntactic: bool = True
    timings: bool = False


CONFIG_KEYS = frozenset((
    'contracts', 'system', 'world', 'ledger', 'goal', 'bounds', 'policy', 'out',
    'seed', 'adjacency', 'jobs', 'timeout', 'mutants', 'syntactic', 'timings',
))


def _read_config_file(path: str) -> dict[str, Any]:
    try:
        with open(path, mode='rb') as file:
            data = tomllib.load(file)
    except OSError as x:
        raise ConfigError(f'cannot read configuration "{path}": {x.strerror}') from None
    except tomllib.TOMLDecodeError as x:
        raise ConfigError(f'malformed configuration "{path}": {x}') from None

    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f'unknown configuration keys {", ".join(unknown)}')
    log.debug('read configuration %s with keys %s', path, ', '.join(sorted(data)))
    return data


def _expect[T](value: object, kind: type[T], key: str) -> T:
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f'configuration "{key}" must be {kind.__name__}')
    return value


def _bounds(value: object) -> DomainBounds:
    if isinstance(value, DomainBounds):
        return value
    if isinstance(value, str):
        return DomainBounds.parse(value)
    if isinstance(value, dict):
        return DomainBounds.from_mapping(cast(Mapping[str, object], value))
    raise ConfigError('configuration "bounds" must be a string or table')


def _policy(value: object) -> Policy:
    try:
        return Policy(value)
    except ValueError:
        raise ConfigError(f'policy must be "halt" or "log", not {value!r}') from None


def load_config(
    options: argparse.Namespace, environ: Mapping[str, str] = os.environ
) -> RunConfig:
    """
    Assemble the configuration. Flags come first, a configuration file given
    with ``--config`` overrides them, and the environment supplies the output
    directory if neither does.
    """
    settings: dict[str, Any] = {
        key: value for key in CONFIG_KEYS
        if (value := getattr(options, key, None)) is not None
    }
    if getattr(options, 'config', None):
        settings.update(_read_config_file(options.config))
    if 'out' not in settings and environ.get(OUT_VARIABLE):
        settings['out'] = environ[OUT_VARIABLE]

    goal = _expect(settings.get('goal', False), bool, 'goal')
    suffix = '_goal' if goal else ''

    def path(key: str, default: str) -> Path:
        return Path(_expect(settings.get(key, str(data_path(default))), str, key))

    timeout = settings.get('timeout')
    if timeout is not None:
        if isinstance(timeout, bool) or not isinstance(timeout, (int, float)) or timeout <= 0:
            raise ConfigError('timeout must be a positive number of seconds')
        timeout = float(timeout)

    config = RunConfig(
        contracts=path('contracts', f'rover{suffix}.agc'),
        system=path('system', f'rover{suffix}.sys'),
        world=path('world', 'w2_center_block.world'),
        ledger=path('ledger', 'table1.ledger'),
        goal=goal,
        bounds=_bounds(settings.get('bounds', DomainBounds())),
        policy=_policy(settings.get('policy', Policy.HALT_ON_VIOLATION.value)),
        out=Path(_expect(settings.get('out', 'out'), str, 'out')),
        seed=_expect(settings.get('seed', 0), int, 'seed'),
        adjacency=_expect(settings.get('adjacency', 4), int, 'adjacency'),
        jobs=_expect(settings.get('jobs', 1), int, 'jobs'),
        timeout=timeout,
        mutants=_expect(settings.get('mutants', 0), int, 'mutants'),
        syntactic=_expect(settings.get('syntactic', True), bool, 'syntactic'),
        timings=_expect(settings.get('timings', False), bool, 'timings'),
    )
    adjacency(config.adjacency)
    if config.jobs < 1 or config.mutants < 0 or config.seed < 0:
        raise ConfigError('jobs must be positive, mutants and seed not negative')
    return config


# ======================================================================================
# Command Line Parser


def _bounds_flag(text: str) -> DomainBounds:
    try:
        return DomainBounds.parse(text)
    except ConfigError as x:
        raise argparse.ArgumentTypeError(str(x)) from None


def create_parser() -> argparse.ArgumentParser:
    """Create a command line argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--contracts', metavar='PATH',
        help='use the contracts file (default: bundled rover contracts)',
    )
    common.add_argument(
        '--system', metavar='PATH',
        help='use the system file (default: bundled rover system)',
    )
    common.add_argument(
        '--goal', action='store_const', const=True,
        help='use the rover contracts with explicit goal cell',
    )
    common.add_argument(
        '--out', metavar='DIR',
        help=f'write output files to the directory (default: ${OUT_VARIABLE} or out)',
    )
    common.add_argument(
        '--config', metavar='PATH',
        help='read configuration from the TOML file, overriding flags',
    )
    common.add_argument(
        '--adjacency', type=int, choices=(4, 8),
        help='treat cells as adjacent with 4- or 8-connectivity (default: 4)',
    )
    common.add_argument(
        '--bounds', type=_bounds_flag, metavar='n=3,card=4,plans=3,envs=1000000',
        help='bound the domains for discharging obligations',
    )
    common.add_argument(
        '--seed', type=int,
        help='seed the random number generator (default: 0)',
    )
    common.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='log progress; repeat for debugging output',
    )

    parser = argparse.ArgumentParser(
        prog='contractchain',
        description="""
            Check assume-guarantee contracts for components, compose them into
            system contracts by discharging proof obligations over finite
            domains, and monitor contracts at runtime.
        """,
    )
    parser.add_argument('--version', action='version', version=__version__)
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    check_command = commands.add_parser(
        'check', parents=[common], help='parse and type check contracts',
    )
    check_command.set_defaults(handler=cmd_check)

    compose_command = commands.add_parser(
        'compose', parents=[common], help='discharge obligations and derive system contract',
    )
    compose_command.add_argument(
        '--jobs', type=int, metavar='K',
        help='discharge obligations in K processes (default: 1)',
    )
    compose_command.add_argument(
        '--mutants', type=int, metavar='N',
        help='also discharge N mutants of every downstream assumption',
    )
    compose_command.add_argument(
        '--no-syntactic', action='store_const', const=False, dest='syntactic',
        help='always enumerate, without trying syntactic entailment first',
    )
    compose_command.add_argument(
        '--timings', action='store_const', const=True,
        help='include elapsed times in the report',
    )
    compose_command.set_defaults(handler=cmd_compose)

    run_command = commands.add_parser(
        'run', parents=[common], help='run the monitored rover in a world',
    )
    run_command.add_argument(
        '--world', metavar='PATH',
        help='use the world file (default: bundled 3x3 world with center obstacle)',
    )
    run_command.add_argument(
        '--policy', choices=('halt', 'log'),
        help='halt on the first violation or log and continue (default: halt)',
    )
    run_command.add_argument(
        '--timeout', type=float, metavar='SECONDS',
        help='limit the running time of each component',
    )
    run_command.set_defaults(handler=cmd_run)

    report_command = commands.add_parser(
        'report', parents=[common], help='report confidence from verification ledger',
    )
    report_command.add_argument(
        '--ledger', metavar='PATH',
        help='use the ledger file (default: bundled ledger for the rover)',
    )
    report_command.set_defaults(handler=cmd_report)

    print_command = commands.add_parser(
        'print', parents=[common], help='pretty-print contracts',
    )
    print_command.set_defaults(handler=cmd_print)

    return parser


# ======================================================================================
# Commands


@dataclasses.dataclass(frozen=True, slots=True)
class Console:
    """Standard output and error with styling."""

    out: TextIO
    err: TextIO
    styler: Styler
    verbose: int = 0

    def println(self, text: str = '') -> None:
        self.out.write(text)
        self.out.write('\n')

    def error(self, text: str) -> None:
        self.err.write(text)
        self.err.write('\n')


def _signature(ports: Sequence[Port]) -> str:
    return ', '.join(f'{p.name} : {format_type(p.type)}' for p in ports)


def _load(config: RunConfig) -> tuple[list[Contract], SystemGraph]:
    contracts = load_contracts(config.contracts)
    return contracts, load_system(config.system, contracts)


def _write(config: RunConfig, name: str, text: str) -> Path:
    config.out.mkdir(parents=True, exist_ok=True)
    path = config.out / name
    path.write_text(text, encoding='utf8')
    return path


def cmd_check(config: RunConfig, console: Console) -> int:
    contracts = load_contracts(config.contracts)
    for contract in contracts:
        if console.verbose:
            console.println(
                f'{contract.name}({_signature(contract.inputs)}) '
                f'-> ({_signature(contract.outputs)})'
            )
    console.println(console.styler.passed(
        f'{config.contracts}: {len(contracts)} contracts ok'
    ))
    return SUCCESS


def cmd_compose(config: RunConfig, console: Console) -> int:
    _, graph = _load(config)
    obligations = generate_obligations(graph, config.bounds)
    verdicts = discharge_all(
        obligations,
        syntactic=config.syntactic,
        connectivity=config.adjacency,
        jobs=config.jobs,
    )

    derived: None | DerivedContract = None
    failure: None | str = None
    try:
        derived = derive_system_contract(graph, verdicts)
    except CompositionError as x:
        failure = str(x)

    text = format_report(
        obligations, verdicts, derived, failure=failure, timings=config.timings
    )
    if config.mutants:
        text += format_mutations(mutation_campaign(
            graph, config.mutants, config.seed, config.bounds,
            connectivity=config.adjacency,
        ))
    path = _write(config, 'obligations.txt', text)

    styler = console.styler
    for verdict in verdicts:
        line = f'{verdict.obligation}: {styler.outcome(verdict.status.value)}'
        line += f' by {verdict.method.value}'
        if verdict.counterexample is not None:
            bindings = ', '.join(
                f'{k} = {format_value(v)}' for k, v in verdict.counterexample.items()
            )
            line += f'\n    counterexample: {bindings}'
        console.println(line)

    if derived is None:
        console.error(styler.failed(f'no system contract: {failure}'))
        console.println(f'report written to {path}')
        return FAILURE

    console.println(styler.strong(
        f'derived A_{derived.source} ⇒ {SYMBOLS.eventually} G_{derived.sink}'
    ))
    console.println(f'report written to {path}')
    return SUCCESS


def cmd_run(config: RunConfig, console: Console) -> int:
    world = load_world(config.world)
    _, graph = _load(config)
    bodies = rover_bodies(world, goal=config.goal, connectivity=config.adjacency)
    styler = console.styler

    config.out.mkdir(parents=True, exist_ok=True)
    with open(config.out / 'events.log', mode='w', encoding='utf8') as stream:
        events = EventLog(stream)
        try:
            result = run_pipeline(
                graph,
                bodies,
                rover_inputs(world, goal=config.goal),
                config.policy,
                events=events,
                interp=world.interpretation(config.adjacency),
                timeout=config.timeout,
            )
        except BodyFailure as x:
            for event in x.events:
                console.println(f'{event}')
            console.error(styler.failed(str(x)))
            return FAILURE

    for event in result.events:
        console.println(
            f'#{event.seq} {event.component} {event.phase.value} '
            f'{styler.outcome(event.verdict.value)} {event.formula}'
        )

    plan = cast(None | Plan, result.final.get('plan'))
    shortest = None
    if world.goal is not None:
        shortest = bfs_oracle(
            world.grid, world.obstacles, world.start, world.goal, config.adjacency
        )
    _write(config, 'plan.txt', format_plan(world, plan, shortest))

    if plan is not None:
        console.println(f'plan: {format_value(plan)} (cardinality {len(plan)})')
    if result.halted is not None:
        console.error(styler.failed(str(result.halted)))
    for event in result.violations:
        console.error(f'violation: {event.to_json()}')
    if plan is not None and not plan and result.violations:
        console.error('agent received an empty plan set; no plan exists')

    return SUCCESS if result.ok else FAILURE


def cmd_report(config: RunConfig, console: Console) -> int:
    _, graph = _load(config)
    confidence = report(load_ledger(config.ledger, graph), graph)
    _write(config, 'confidence.txt', format_confidence(confidence))
    console.out.write(format_confidence(confidence, console.styler))
    return SUCCESS


def cmd_print(config: RunConfig, console: Console) -> int:
    console.out.write(print_contracts(load_contracts(config.contracts)))
    return SUCCESS


# ======================================================================================


def _log_level(verbose: int) -> int:
    if verbose >= 2:
        return logging.DEBUG
    return logging.INFO if verbose == 1 else logging.WARNING


def main(argv: None | Sequence[str] = None) -> int:
    parser = create_parser()
    options = parser.parse_args(argv)
    logging.basicConfig(
        level=_log_level(options.verbose),
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )

    console = Console(
        sys.stdout, sys.stderr, Styler.for_stream(sys.stdout), options.verbose
    )
    try:
        config = load_config(options)
        return options.handler(config, console)
    except ConfigError as x:
        console.error(f'contractchain: {x}')
        return USAGE
    except (EnumerationCapExceeded, EmptyPlanSet) as x:
        console.error(f'contractchain: {x}')
        return FAILURE
    except CaseStudyError as x:
        # Invalid worlds and faults are bad configuration.
        console.error(f'contractchain: {x}')
        return USAGE
    except ContractChainError as x:
        console.error(str(x))
        return FAILURE
    except (OSError, UnicodeDecodeError) as x:
        console.error(f'contractchain: {x}')
        return USAGE
