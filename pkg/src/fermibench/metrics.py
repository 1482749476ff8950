"""Order-of-magnitude scoring for Fermi estimates.

fp_score gives full credit at the exact answer and decays linearly in
log10 space, hitting zero at three orders of magnitude off:

    fp_score = max(0, 1 - |log10(predicted) - log10(gold)| / 3)

Comparison uses SI magnitudes only. A prediction whose dimension disagrees
with the gold still scores on magnitude (with a warning note); a
non-positive prediction scores 0; a non-positive gold is a data error.

A full prediction is scored on four axes: answer_score for the directly
predicted number, validity for whether the predicted program executes,
pans_score for the executed program's answer, and fact_f1 for citing
exactly the gold facts. fact_f1 only applies when gold facts were part of
the task input; otherwise it is None and excluded from aggregation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import FermiError
from .executor import ErrorKind, run_program_text
from .program import ProgramError, parse_program, used_fact_ids
from .units import Quantity, UnitRegistry


class InvalidGold(FermiError):
    """Gold answers must be strictly positive."""


class EmptyInput(FermiError):
    """Aggregation over zero scores is undefined."""


def _magnitude(value: "Quantity | float") -> float:
    return value.magnitude if isinstance(value, Quantity) else float(value)


def fp_score(
    predicted: "Quantity | float",
    gold: "Quantity | float",
    warnings: list[str] | None = None,
) -> float:
    """Score in [0,1]; see module docstring for the formula."""
    p = _magnitude(predicted)
    g = _magnitude(gold)
    if not (g > 0) or not math.isfinite(g):
        raise InvalidGold(f"gold magnitude must be positive and finite, got {g!r}")
    if (
        warnings is not None
        and isinstance(predicted, Quantity)
        and isinstance(gold, Quantity)
        and predicted.dimension != gold.dimension
    ):
        warnings.append(
            f"dimension mismatch scored on magnitude: predicted "
            f"{predicted.dimension.si_unit() or '1'} vs gold {gold.dimension.si_unit() or '1'}"
        )
    if p <= 0 or not math.isfinite(p):
        return 0.0
    # Difference of logs rather than log of the ratio: algebraically the
    # same for positive finite inputs, but immune to p/g overflowing.
    off = abs(math.log10(p) - math.log10(g))
    return max(0.0, 1.0 - off / 3.0)


def fact_f1(used, gold) -> float:
    """F1 between cited and gold fact ids; both empty -> 1, one empty -> 0."""
    used_set = {str(i) for i in used}
    gold_set = {str(i) for i in gold}
    if not used_set and not gold_set:
        return 1.0
    if not used_set or not gold_set:
        return 0.0
    hits = len(used_set & gold_set)
    precision = hits / len(used_set)
    recall = hits / len(gold_set)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class QuestionScore:
    answer_score: float
    validity: int
    pans_score: float
    fact_f1: float | None  # None when gold facts were not part of the task input
    error_kind: str | None = None
    notes: tuple = ()


def score_prediction(
    pred_answer: "Quantity | float | None",
    pred_program_text: str | None,
    gold,
    gold_fact_ids=None,
    registry: UnitRegistry | None = None,
) -> QuestionScore:
    """Score one prediction against one gold record.

    gold may be a Quantity or any object with an `answer` Quantity
    attribute. gold_fact_ids None means fact citation is not applicable
    (no facts were given with the task); pass a set, possibly empty, when
    it is. All failure paths fold into zero components plus notes; this
    function does not raise for bad predictions (only for a bad gold).
    """
    gold_answer = getattr(gold, "answer", gold)
    notes: list[str] = []

    if pred_answer is not None:
        answer_score = fp_score(pred_answer, gold_answer, warnings=notes)
    else:
        answer_score = 0.0
        notes.append("no direct answer predicted")

    validity = 0
    pans_score = 0.0
    error_kind: str | None = None
    if pred_program_text:
        result = run_program_text(pred_program_text, mode="lenient", registry=registry)
        if result.ok:
            validity = 1
            pans_score = fp_score(result.value, gold_answer, warnings=notes)
        else:
            error_kind = result.error.kind.value
            notes.append(f"program error at {result.error.location}: {result.error.message}")
    else:
        error_kind = ErrorKind.MISSING_PROGRAM.value
        notes.append("no program predicted")

    f1: float | None = None
    if gold_fact_ids is not None:
        used: frozenset = frozenset()
        if pred_program_text:
            try:
                used = used_fact_ids(parse_program(pred_program_text))
            except ProgramError:
                used = frozenset()
        f1 = fact_f1(used, gold_fact_ids)

    return QuestionScore(answer_score, validity, pans_score, f1, error_kind, tuple(notes))


@dataclass(frozen=True)
class AggregateReport:
    split: str
    count: int
    answer_score: float
    validity: float
    pans_score: float
    fact_f1: float | None  # None when no scored record had applicable facts
    fact_f1_count: int
    error_counts: dict = field(default_factory=dict)  # "ok" + executor error kinds


def aggregate(scores, split: str = "all") -> AggregateReport:
    """Full-precision arithmetic means; rounding happens only at display."""
    scores = list(scores)
    if not scores:
        raise EmptyInput("cannot aggregate zero scores")
    n = len(scores)
    f1_values = [s.fact_f1 for s in scores if s.fact_f1 is not None]
    error_counts: dict[str, int] = {}
    for s in scores:
        key = s.error_kind if s.error_kind is not None else "ok"
        error_counts[key] = error_counts.get(key, 0) + 1
    return AggregateReport(
        split=split,
        count=n,
        answer_score=sum(s.answer_score for s in scores) / n,
        validity=sum(s.validity for s in scores) / n,
        pans_score=sum(s.pans_score for s in scores) / n,
        fact_f1=(sum(f1_values) / len(f1_values)) if f1_values else None,
        fact_f1_count=len(f1_values),
        error_counts=error_counts,
    )


REPORT_FORMAT = "fermi-report"
REPORT_VERSION = 1


def render_report_text(reports) -> str:
    """One `metric split value count` line per metric, 2-decimal display."""
    lines = [f"{REPORT_FORMAT} {REPORT_VERSION}"]
    for r in reports:
        lines.append(f"answer_score {r.split} {r.answer_score:.2f} {r.count}")
        lines.append(f"validity {r.split} {r.validity:.2f} {r.count}")
        lines.append(f"pans_score {r.split} {r.pans_score:.2f} {r.count}")
        f1 = "n/a" if r.fact_f1 is None else f"{r.fact_f1:.2f}"
        lines.append(f"fact_f1 {r.split} {f1} {r.fact_f1_count}")
        for kind in sorted(r.error_counts):
            lines.append(f"error_count {r.split} {kind} {r.error_counts[kind]}")
    return "\n".join(lines) + "\n"


def report_to_json(reports) -> dict:
    """Machine-readable report: full precision, no display rounding."""
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "splits": [
            {
                "split": r.split,
                "count": r.count,
                "answer_score": r.answer_score,
                "validity": r.validity,
                "pans_score": r.pans_score,
                "fact_f1": r.fact_f1,
                "fact_f1_count": r.fact_f1_count,
                "error_counts": dict(sorted(r.error_counts.items())),
            }
            for r in reports
        ],
    }
