"""
Terminal styling for the command line tool.

Styling is limited to the few SGR attributes that make verdicts stand out:
bold, dimmed, and colors for passing and failing outcomes. Whether to style
at all is determined from the stream and the environment, honoring the
``NO_COLOR`` and ``FORCE_COLOR`` conventions. Files written by the tool are
never styled.
"""
import dataclasses
import enum
import os
from typing import TextIO


class Fidelity(enum.IntEnum):
    """The color fidelity of a terminal, from none at all to 256 colors."""

    PLAIN = 0
    ANSI = 1
    EIGHT_BIT = 2


def _defined(*variables: str) -> bool:
    return any(variable in os.environ for variable in variables)


def environment_fidelity(is_tty: bool) -> Fidelity:
    """
    Determine the fidelity for a stream based on the environment variables of
    this process. The ``is_tty`` argument indicates whether the stream is a
    TTY.
    """
    if os.environ.get('NO_COLOR'):
        return Fidelity.PLAIN

    force = os.environ.get('FORCE_COLOR')
    if force is not None and force != 'false' and force != '0':
        return Fidelity.EIGHT_BIT if force in ('2', '3') else Fidelity.ANSI

    if not is_tty:
        return Fidelity.PLAIN

    term = os.environ.get('TERM')
    if term == 'dumb':
        return Fidelity.PLAIN
    if _defined('CI'):
        return Fidelity.ANSI
    if os.environ.get('COLORTERM') in ('truecolor', '24bit'):
        return Fidelity.EIGHT_BIT
    if term and (term.endswith('-256') or term.endswith('-256color')):
        return Fidelity.EIGHT_BIT
    return Fidelity.ANSI


@dataclasses.dataclass(frozen=True, slots=True)
class Symbols:
    check: str
    cross: str
    rule: str
    eventually: str


UNICODE_SYMBOLS = Symbols('✓', '✗', '─', '◊')
ASCII_SYMBOLS = Symbols('+', 'x', '-', '<>')
SYMBOLS = ASCII_SYMBOLS if os.name == 'nt' else UNICODE_SYMBOLS


class Styler:
    """Apply SGR styles to text, if the fidelity permits."""

    def __init__(self, fidelity: Fidelity = Fidelity.PLAIN) -> None:
        self.fidelity = fidelity

    @classmethod
    def for_stream(cls, stream: TextIO) -> 'Styler':
        try:
            is_tty = stream.isatty()
        except (AttributeError, ValueError):
            is_tty = False
        return cls(environment_fidelity(is_tty))

    @property
    def enabled(self) -> bool:
        return self.fidelity is not Fidelity.PLAIN

    def sgr(self, ansi: str, eight_bit: str, text: str) -> str:
        if self.fidelity is Fidelity.PLAIN:
            return text
        ps = eight_bit if self.fidelity is Fidelity.EIGHT_BIT else ansi
        return f'\x1b[{ps}m{text}\x1b[0m'

    def strong(self, text: str) -> str:
        return self.sgr('1', '1', text)

    def light(self, text: str) -> str:
        return self.sgr('2', '38;5;243', text)

    def passed(self, text: str) -> str:
        return self.sgr('1;32', '1;38;5;28', text)

    def failed(self, text: str) -> str:
        return self.sgr('1;31', '1;38;5;160', text)

    def warned(self, text: str) -> str:
        return self.sgr('1;33', '1;38;5;172', text)

    def banner(self, text: str, ok: bool) -> str:
        """Highlight a one-line summary as success or failure."""
        if ok:
            return self.sgr('1;42', '1;48;5;119', text)
        return self.sgr('1;97;41', '1;38;5;255;48;5;88', text)

    def mark(self, present: bool) -> str:
        """Render a check mark or a cross."""
        if present:
            return self.passed(SYMBOLS.check)
        return self.failed(SYMBOLS.cross)

    def outcome(self, text: str) -> str:
        """Color the name of a verdict or monitor outcome."""
        if text in ('discharged', 'Pass'):
            return self.passed(text)
        if text in ('refuted', 'Violation'):
            return self.failed(text)
        if text == 'exhausted':
            return self.warned(text)
        return text

    def rule(self, text: str, width: int = 70) -> str:
        """Render a heading as a horizontal rule with embedded text."""
        length = max(width - len(text) - 5, 3)
        return f'{SYMBOLS.rule * 3} {self.strong(text)} {SYMBOLS.rule * length}'
