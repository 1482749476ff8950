"""Executing estimation programs down to a single Quantity.

Evaluation starts at the root question Q0 and walks the computation graph
depth-first with memoization, so shared sub-questions evaluate once and the
trace lists each question exactly once in evaluation order. The walk is
iterative (explicit stack), which keeps pathologically deep chains from
hitting the interpreter recursion limit, and an on-stack set turns cycles
into a reported error instead of a hang.

Two unit modes:
  strict  - unknown units, dimension-mismatched add/sub, and citing an
            undeclared fact are all errors.
  lenient - those become warnings (unknown units read as dimensionless,
            add/sub keeps the left operand's dimension, an uncited fact id
            is assumed to live in external context). Lenient is the default
            because predicted programs legitimately cite context facts that
            are provided alongside the question rather than re-declared
            inline.

Execution never raises for bad programs; it returns an ExecutionResult
whose error field carries a machine-readable kind and the id where the
problem lives.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .program import (
    CompExpr,
    Identifier,
    MathExpr,
    Program,
    ProgramError,
    ProgramSyntaxError,
    ValueRef,
    parse_program,
)
from .units import (
    DimensionMismatch,
    DivisionByZero,
    NonFiniteResult,
    Quantity,
    UnitRegistry,
    UnknownUnit,
    UnparsableNumber,
    quantity_arith,
    parse_quantity,
)

_OP_NAMES = {"Add": "add", "Sub": "sub", "Mul": "mul", "Div": "div"}


class ErrorKind(str, Enum):
    SYNTAX = "syntax_error"
    DUPLICATE_DEFINITION = "duplicate_definition"
    MISSING_ROOT = "missing_root"
    UNDEFINED_REFERENCE = "undefined_reference"
    CYCLIC_DEPENDENCY = "cyclic_dependency"
    DIVISION_BY_ZERO = "division_by_zero"
    DIMENSION_MISMATCH = "dimension_mismatch"
    UNKNOWN_UNIT = "unknown_unit"
    UNPARSABLE_VALUE = "unparsable_value"
    NON_FINITE = "non_finite_result"
    MISSING_PROGRAM = "missing_program"


@dataclass(frozen=True)
class ExecutionError:
    kind: ErrorKind
    location: str
    message: str


@dataclass(frozen=True)
class ExecutionResult:
    value: Quantity | None
    error: ExecutionError | None = None
    warnings: tuple = ()
    trace: tuple = ()  # (Identifier, Quantity) pairs in evaluation order

    @property
    def ok(self) -> bool:
        return self.error is None


class _Abort(Exception):
    def __init__(self, kind: ErrorKind, location: Identifier | str, message: str):
        self.error = ExecutionError(kind, str(location), message)
        super().__init__(message)


def execute(
    program: Program, mode: str = "lenient", registry: UnitRegistry | None = None
) -> ExecutionResult:
    """Evaluate a parsed Program to its root answer."""
    if mode not in ("lenient", "strict"):
        raise ValueError(f"mode must be 'lenient' or 'strict', got {mode!r}")
    comps = program.computations()
    values = program.value_decls()
    declared_facts = set(program.fact_decls())
    warnings: list[str] = []
    trace: list[tuple[Identifier, Quantity]] = []
    cited: set[Identifier] = set()

    if program.root not in comps:
        return ExecutionResult(
            None,
            ExecutionError(ErrorKind.MISSING_ROOT, "Q0", "no computation defines the root Q0"),
        )

    memo: dict[Identifier, Quantity] = {}
    onstack: set[Identifier] = set()
    try:
        stack: list[tuple[Identifier, int]] = [(program.root, 0)]
        while stack:
            qid, phase = stack.pop()
            if phase == 0:
                if qid in memo:
                    continue
                if qid in onstack:
                    raise _Abort(
                        ErrorKind.CYCLIC_DEPENDENCY, qid, f"{qid} depends on itself"
                    )
                body = comps.get(qid)
                if body is None:
                    raise _Abort(
                        ErrorKind.UNDEFINED_REFERENCE, qid, f"{qid} is used but never computed"
                    )
                onstack.add(qid)
                stack.append((qid, 1))
                if isinstance(body, MathExpr):
                    for arg in reversed(body.args):
                        if isinstance(arg, Identifier):
                            stack.append((arg, 0))
            else:
                value = _evaluate_body(
                    qid, comps[qid], values, declared_facts, memo, cited, mode, registry, warnings
                )
                memo[qid] = value
                trace.append((qid, value))
                onstack.discard(qid)
    except _Abort as abort:
        return ExecutionResult(None, abort.error, warnings=tuple(warnings))

    _warn_unreachable(program, memo, cited, warnings)
    return ExecutionResult(memo[program.root], warnings=tuple(warnings), trace=tuple(trace))


def _evaluate_body(
    qid: Identifier,
    body,
    values: dict[Identifier, str],
    declared_facts: set[Identifier],
    memo: dict[Identifier, Quantity],
    cited: set[Identifier],
    mode: str,
    registry: UnitRegistry | None,
    warnings: list[str],
) -> Quantity:
    if isinstance(body, ValueRef):
        cited.add(body.value)
        cited.add(body.because)
        if body.because not in declared_facts:
            if mode == "strict":
                raise _Abort(
                    ErrorKind.UNDEFINED_REFERENCE,
                    body.because,
                    f"{body.because} is cited but never declared",
                )
            warnings.append(f"{body.because} is cited but not declared; assuming external context")
        text = values.get(body.value)
        if text is None:
            raise _Abort(
                ErrorKind.UNDEFINED_REFERENCE, body.value, f"{body.value} is cited but never declared"
            )
        try:
            return parse_quantity(
                text,
                registry,
                on_unknown_unit=("dimensionless" if mode == "lenient" else "error"),
                warnings=warnings,
            )
        except UnparsableNumber as exc:
            raise _Abort(ErrorKind.UNPARSABLE_VALUE, body.value, str(exc)) from None
        except UnknownUnit as exc:
            raise _Abort(ErrorKind.UNKNOWN_UNIT, body.value, str(exc)) from None

    op = _OP_NAMES[body.op]
    operands = [
        memo[arg] if isinstance(arg, Identifier) else Quantity(arg) for arg in body.args
    ]
    acc = operands[0]
    for operand in operands[1:]:
        try:
            acc = quantity_arith(op, acc, operand, mode=mode, warnings=warnings)
        except DivisionByZero as exc:
            raise _Abort(ErrorKind.DIVISION_BY_ZERO, qid, str(exc)) from None
        except DimensionMismatch as exc:
            raise _Abort(ErrorKind.DIMENSION_MISMATCH, qid, str(exc)) from None
        except NonFiniteResult as exc:
            raise _Abort(ErrorKind.NON_FINITE, qid, str(exc)) from None
    return acc


def _warn_unreachable(
    program: Program,
    memo: dict[Identifier, Quantity],
    cited: set[Identifier],
    warnings: list[str],
) -> None:
    declared: set[Identifier] = set(program.computations()) | set(program.question_decls())
    declared |= set(program.value_decls()) | set(program.fact_decls())
    reached = set(memo) | cited
    unreachable = sorted(declared - reached)
    if unreachable:
        names = ", ".join(str(i) for i in unreachable)
        warnings.append(f"unreachable statements ignored: {names}")


def run_program_text(
    text: str, mode: str = "lenient", registry: UnitRegistry | None = None
) -> ExecutionResult:
    """Parse then execute, folding parse failures into the result error."""
    try:
        program = parse_program(text)
    except ProgramSyntaxError as exc:
        location = f"line {exc.line}" if exc.line is not None else "input"
        return ExecutionResult(None, ExecutionError(ErrorKind.SYNTAX, location, str(exc)))
    except ProgramError as exc:
        return ExecutionResult(
            None, ExecutionError(ErrorKind.DUPLICATE_DEFINITION, "input", str(exc))
        )
    return execute(program, mode=mode, registry=registry)


def check_validity(text: str, registry: UnitRegistry | None = None) -> int:
    """1 if the text parses and executes to a number under lenient mode, else 0."""
    return 1 if run_program_text(text, mode="lenient", registry=registry).ok else 0
