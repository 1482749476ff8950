"""Shared test utilities: random-program generation and scrambled rendering.

The generator builds structurally valid Programs; the scrambler renders
them with randomized surface syntax (statement order, comma vs newline
separation, "because" vs "|", P vs Q0 root spelling, spacing) so parser
round-trip properties get exercised across the whole accepted surface.
"""
from __future__ import annotations

import random

from fermibench.program import (
    ROOT,
    CompExpr,
    FactDecl,
    Identifier,
    MathExpr,
    OPERATORS,
    Program,
    QuestionDecl,
    ValueDecl,
    ValueRef,
)

_WORDS = (
    "water", "the", "house", "many", "holds", "per", "day", "uses", "big",
    "tank", "room", "total", "filled", "count", "share", "level", "crew",
    "spends", "weekly", "rough", "boxes", "stacked", "deep", "near", "town",
)

_UNITS = ("", "L", "m**3", "kg", "km", "h", "GB", "USD", "kcal", "kg m**-3", "ft**3", "mi")


def random_prose(rng: random.Random) -> str:
    words = [rng.choice(_WORDS) for _ in range(rng.randint(2, 6))]
    if len(words) > 3 and rng.random() < 0.3:
        words[1] += ","  # commas inside prose must survive statement splitting
    return " ".join(words)


def random_value_text(rng: random.Random) -> str:
    style = rng.random()
    if style < 0.4:
        number = str(rng.randint(1, 99999))
    elif style < 0.8:
        number = f"{rng.uniform(0.001, 900.0):.{rng.randint(1, 4)}f}"
    else:
        number = f"{rng.uniform(1.0, 9.9):.2f}e+{rng.randint(1, 14):02d}"
    unit = rng.choice(_UNITS)
    return f"{number} {unit}".strip()


def random_literal(rng: random.Random) -> float:
    if rng.random() < 0.6:
        return float(rng.randint(1, 500))
    return round(rng.uniform(0.1, 9.0), 2)


def random_program(rng: random.Random, max_depth: int = 3) -> Program:
    statements: list = []
    next_ids = {"question": 1, "value": 1, "fact": 1}

    def fresh(kind: str) -> Identifier:
        ident = Identifier(kind, next_ids[kind])
        next_ids[kind] += 1
        return ident

    pending: list[tuple[Identifier, int]] = [(ROOT, 0)]
    while pending:
        qid, depth = pending.pop(0)
        if depth >= max_depth or (depth > 0 and rng.random() < 0.45):
            aid = fresh("value")
            fid = fresh("fact")
            statements.append(CompExpr(qid, ValueRef(aid, fid)))
            statements.append(ValueDecl(aid, random_value_text(rng)))
            if rng.random() < 0.9:  # sometimes cite a fact without declaring it
                statements.append(FactDecl(fid, random_prose(rng)))
        else:
            op = rng.choice(OPERATORS)
            nargs = 2 if op in ("Sub", "Div") else rng.randint(2, 3)
            args: list = []
            for _ in range(nargs):
                if rng.random() < 0.2:
                    args.append(random_literal(rng))
                else:
                    child = fresh("question")
                    pending.append((child, depth + 1))
                    args.append(child)
            if not any(isinstance(a, Identifier) for a in args):
                child = fresh("question")
                pending.append((child, depth + 1))
                args[0] = child
            statements.append(CompExpr(qid, MathExpr(op, tuple(args))))
        if rng.random() < 0.5:
            statements.append(QuestionDecl(qid, random_prose(rng)))
    return Program(tuple(statements))


def _render_body_scrambled(rng: random.Random, body) -> str:
    if isinstance(body, ValueRef):
        style = rng.randrange(3)
        if style == 0:
            return f"{body.value} because {body.because}"
        if style == 1:
            return f"{body.value} | {body.because}"
        return f"{body.value}|{body.because}"
    joiner = rng.choice((", ", ",", " , "))
    args = joiner.join(
        str(a) if isinstance(a, Identifier) else ("%g" % a) for a in body.args
    )
    gap = rng.choice(("", " "))
    return f"{body.op}{gap}({args})"


def scrambled_render(rng: random.Random, program: Program) -> str:
    parts = []
    for stmt in program.statements:
        if isinstance(stmt, CompExpr):
            body = _render_body_scrambled(rng, stmt.body)
            arrow = rng.choice(("->", " -> ", " ->"))
            if stmt.target == ROOT and rng.random() < 0.5:
                head = rng.choice((f"P{arrow}", "P: ", "P : "))
            else:
                head = f"{stmt.target}{arrow}"
            parts.append(f"{head}{body}")
        elif isinstance(stmt, ValueDecl):
            parts.append(f"{stmt.ident}{rng.choice((': ', ':', ' : '))}{stmt.quantity_text}")
        elif isinstance(stmt, QuestionDecl):
            parts.append(f"{stmt.ident}{rng.choice((': ', ':'))}{stmt.text}")
        else:
            parts.append(f"{stmt.ident}{rng.choice((': ', ':'))}{stmt.text}")
    rng.shuffle(parts)
    lines = []
    current: list[str] = []
    for part in parts:
        current.append(part)
        if rng.random() < 0.65:
            lines.append(rng.choice((", ", ",")).join(current))
            current = []
    if current:
        lines.append(rng.choice((", ", ",")).join(current))
    if rng.random() < 0.3:
        lines.insert(rng.randrange(len(lines) + 1), "")  # blank lines are fine
    return "\n".join(lines)
