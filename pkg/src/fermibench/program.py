"""Parsing and rendering of estimation programs.

A program is a set of statements. Computation statements bind a question id
to either an operator over other questions (``Q0 -> Mul(Q1, Q2)``) or a
value justified by a fact (``Q1 -> A1 because F1``; ``|`` is an accepted
synonym for ``because``). Support statements declare question text
(``Q1: How many days...?``), fact text (``F1: A person uses...``), and
values (``A1: 18 L``). ``P`` is an alias for the root question Q0 and may
be written with either ``:`` or ``->`` in front of a computation body.

Statements are separated by newlines, or by commas when the comma is
directly followed by another statement head (so commas inside question or
fact prose survive; a fact whose prose itself contains something shaped
like ", Q2:" cannot be comma-separated on one line, which is an inherent
ambiguity of the surface syntax).

Parsing is order-insensitive: Program equality compares the statement set,
exact duplicate statements collapse silently, and re-declaring an id with
a different body raises DuplicateDefinition. render_program emits a
canonical layout (question decls, value decls, fact decls, then
computations, each sorted by index) that parses back to an equal Program.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FermiError
from .units import NUMBER_RE

OPERATORS = ("Add", "Sub", "Mul", "Div")

_KIND_PREFIX = {"question": "Q", "fact": "F", "value": "A"}
_PREFIX_KIND = {"Q": "question", "F": "fact", "A": "value"}


class ProgramError(FermiError):
    """Base for program text errors."""


class ProgramSyntaxError(ProgramError):
    """Statement text that does not match the grammar."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, col {col}: {message}"
        super().__init__(message)


class DuplicateDefinition(ProgramError):
    """The same id declared twice with conflicting bodies."""


@dataclass(frozen=True, order=True)
class Identifier:
    kind: str  # "question" | "fact" | "value"
    index: int

    def __str__(self) -> str:
        return f"{_KIND_PREFIX[self.kind]}{self.index}"


@dataclass(frozen=True)
class MathExpr:
    op: str
    args: tuple  # Identifier (question kind) or float literals

    def __post_init__(self) -> None:
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")
        object.__setattr__(self, "args", tuple(self.args))
        for arg in self.args:
            if isinstance(arg, Identifier):
                if arg.kind != "question":
                    raise ValueError(f"operator argument {arg} must be a question id")
            elif not isinstance(arg, float):
                raise ValueError(f"operator argument {arg!r} must be a question id or float")


@dataclass(frozen=True)
class ValueRef:
    value: Identifier
    because: Identifier

    def __post_init__(self) -> None:
        if self.value.kind != "value" or self.because.kind != "fact":
            raise ValueError("value expression must pair a value id with a fact id")


@dataclass(frozen=True)
class CompExpr:
    target: Identifier
    body: "MathExpr | ValueRef"

    def __post_init__(self) -> None:
        if self.target.kind != "question":
            raise ValueError("computation target must be a question id")


@dataclass(frozen=True)
class QuestionDecl:
    ident: Identifier
    text: str


@dataclass(frozen=True)
class FactDecl:
    ident: Identifier
    text: str


@dataclass(frozen=True)
class ValueDecl:
    ident: Identifier
    quantity_text: str


Statement = CompExpr | QuestionDecl | FactDecl | ValueDecl

ROOT = Identifier("question", 0)


def _statement_key(stmt: Statement) -> tuple:
    if isinstance(stmt, CompExpr):
        return ("comp", stmt.target)
    return (type(stmt).__name__, stmt.ident)


@dataclass(frozen=True, eq=False)
class Program:
    """An immutable statement set; root is always Q0.

    statements keep first-seen order for fidelity, but equality and hashing
    semantics treat a Program as the keyed set of its statements, so
    statement order never distinguishes two programs.
    """

    statements: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "statements", tuple(self.statements))
        by_key: dict[tuple, Statement] = {}
        deduped = []
        for stmt in self.statements:
            key = _statement_key(stmt)
            prior = by_key.get(key)
            if prior is None:
                by_key[key] = stmt
                deduped.append(stmt)
            elif prior != stmt:
                kind, ident = key
                raise DuplicateDefinition(f"{ident} is defined twice with conflicting bodies")
        object.__setattr__(self, "statements", tuple(deduped))
        object.__setattr__(self, "_by_key", by_key)

    @property
    def root(self) -> Identifier:
        return ROOT

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return self._by_key == other._by_key

    def __ne__(self, other: object) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None  # type: ignore[assignment]

    def __str__(self) -> str:
        return render_program(self)

    def computations(self) -> dict[Identifier, "MathExpr | ValueRef"]:
        return {s.target: s.body for s in self.statements if isinstance(s, CompExpr)}

    def question_decls(self) -> dict[Identifier, str]:
        return {s.ident: s.text for s in self.statements if isinstance(s, QuestionDecl)}

    def fact_decls(self) -> dict[Identifier, str]:
        return {s.ident: s.text for s in self.statements if isinstance(s, FactDecl)}

    def value_decls(self) -> dict[Identifier, str]:
        return {s.ident: s.quantity_text for s in self.statements if isinstance(s, ValueDecl)}


_HEAD_AHEAD = r"(?:[QFA]\d+|P)\s*(?:->|:)"
_COMMA_SPLIT_RE = re.compile(rf",(?=\s*{_HEAD_AHEAD})")
_STATEMENT_RE = re.compile(r"^(?P<id>[QFA]\d+|P)\s*(?P<sep>->|:)\s*(?P<body>.*?)\s*$")
_MATH_RE = re.compile(r"^(?P<op>[A-Za-z_]\w*)\s*\((?P<args>.*)\)$")
_VALUE_REF_RE = re.compile(r"^(?P<val>A\d+)(?:\s+because\s+|\s*\|\s*)(?P<fact>F\d+)$")
_QUESTION_ARG_RE = re.compile(r"^Q\d+$")
_ANY_ID_RE = re.compile(r"^[QFA]\d+$")


def _statement_chunks(text: str) -> list[tuple[str, int, int]]:
    """Cut source text into (statement text, line, col) triples, 1-based."""
    chunks: list[tuple[str, int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        pos = 0
        spans = [(m.start(), m.end()) for m in _COMMA_SPLIT_RE.finditer(line)]
        for start, end in spans + [(len(line), len(line))]:
            seg = line[pos:start]
            stripped = seg.strip()
            if stripped:
                col = pos + (len(seg) - len(seg.lstrip())) + 1
                chunks.append((stripped, lineno, col))
            pos = end
    return chunks


def _parse_identifier(token: str) -> Identifier:
    return Identifier(_PREFIX_KIND[token[0]], int(token[1:]))


def _parse_comp_body(body: str, line: int, col: int) -> MathExpr | ValueRef:
    m = _MATH_RE.match(body)
    if m is not None:
        op = m.group("op")
        if op not in OPERATORS:
            raise ProgramSyntaxError(f"unknown operator {op!r}", line, col)
        raw_args = [a.strip() for a in m.group("args").split(",")]
        if raw_args == [""]:
            raw_args = []
        args: list[Identifier | float] = []
        for raw in raw_args:
            if _QUESTION_ARG_RE.match(raw):
                args.append(_parse_identifier(raw))
            elif NUMBER_RE.fullmatch(raw):
                args.append(float(raw))
            elif _ANY_ID_RE.match(raw):
                raise ProgramSyntaxError(
                    f"operator arguments must be question ids or numbers, got {raw!r}",
                    line,
                    col,
                )
            else:
                raise ProgramSyntaxError(f"bad operator argument {raw!r}", line, col)
        if op in ("Sub", "Div") and len(args) != 2:
            raise ProgramSyntaxError(f"{op} takes exactly 2 arguments, got {len(args)}", line, col)
        if op in ("Add", "Mul") and len(args) < 2:
            raise ProgramSyntaxError(f"{op} takes at least 2 arguments, got {len(args)}", line, col)
        return MathExpr(op, tuple(args))
    m = _VALUE_REF_RE.match(body)
    if m is not None:
        return ValueRef(_parse_identifier(m.group("val")), _parse_identifier(m.group("fact")))
    raise ProgramSyntaxError(
        f"expected Op(args) or 'A# because F#' after the arrow, got {body!r}", line, col
    )


def _parse_statement(text: str, line: int, col: int) -> Statement:
    m = _STATEMENT_RE.match(text)
    if m is None:
        raise ProgramSyntaxError(f"not a statement: {text!r}", line, col)
    head, sep, body = m.group("id"), m.group("sep"), m.group("body")
    if head == "P":
        # Root alias: either separator, body must be a computation.
        return CompExpr(ROOT, _parse_comp_body(body, line, col))
    ident = _parse_identifier(head)
    if sep == "->":
        if ident.kind != "question":
            raise ProgramSyntaxError(f"only question ids can be computed, got {head}", line, col)
        return CompExpr(ident, _parse_comp_body(body, line, col))
    if not body:
        raise ProgramSyntaxError(f"empty declaration body for {head}", line, col)
    if ident.kind == "question":
        return QuestionDecl(ident, body)
    if ident.kind == "fact":
        return FactDecl(ident, body)
    if NUMBER_RE.match(body) is None:
        raise ProgramSyntaxError(
            f"value declaration {head} must start with a number, got {body!r}", line, col
        )
    return ValueDecl(ident, body)


def parse_program(text: str) -> Program:
    """Parse program text into a Program; see module docstring for grammar."""
    statements = [_parse_statement(chunk, line, col) for chunk, line, col in _statement_chunks(text)]
    return Program(tuple(statements))


def _render_literal(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _render_body(body: MathExpr | ValueRef) -> str:
    if isinstance(body, ValueRef):
        return f"{body.value} because {body.because}"
    args = ", ".join(str(a) if isinstance(a, Identifier) else _render_literal(a) for a in body.args)
    return f"{body.op}({args})"


def render_program(program: Program) -> str:
    """Canonical text form; parse_program(render_program(p)) == p."""
    questions = sorted(
        (s for s in program.statements if isinstance(s, QuestionDecl)), key=lambda s: s.ident
    )
    values = sorted(
        (s for s in program.statements if isinstance(s, ValueDecl)), key=lambda s: s.ident
    )
    facts = sorted(
        (s for s in program.statements if isinstance(s, FactDecl)), key=lambda s: s.ident
    )
    comps = sorted(
        (s for s in program.statements if isinstance(s, CompExpr)), key=lambda s: s.target
    )
    lines = [f"{s.ident}: {s.text}" for s in questions]
    lines += [f"{s.ident}: {s.quantity_text}" for s in values]
    lines += [f"{s.ident}: {s.text}" for s in facts]
    lines += [f"{s.target} -> {_render_body(s.body)}" for s in comps]
    return "\n".join(lines)


def used_fact_ids(program: Program) -> frozenset[Identifier]:
    """Fact ids cited by value expressions (the facts the program leans on)."""
    return frozenset(
        body.because for body in program.computations().values() if isinstance(body, ValueRef)
    )
