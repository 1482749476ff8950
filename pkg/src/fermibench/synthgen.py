"""Synthetic Fermi problem generation from the knowledge base.

Twelve question templates pair a natural-language pattern with an arithmetic
formula over object attributes. Instantiating a template picks concrete
objects (and an integer k where the pattern asks for one), renders the
question, and emits an explanation program whose leaves quote the knowledge
base verbatim. The stored answer is computed by a closed-form walk of the
bound formula tree, independent of the program executor, so the two can be
checked against each other bit for bit.

A generated record can additionally be decomposed: one attribute leaf is
rewritten as ratio * pivot-attribute against a third object, which deepens
the program by one sub-question while leaving the answer unchanged up to
float rounding.

Template texts are kept as close to their published form as typography
allows; three patterns needed stray quotes or missing parentheses repaired
and the halving templates keep their published formula even though it halves
the other slot than the question text suggests.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

from .errors import FermiError
from .kb import KnowledgeBase, objects_with
from .program import (
    CompExpr,
    FactDecl,
    Identifier,
    MathExpr,
    Program,
    QuestionDecl,
    ValueDecl,
    ValueRef,
    render_program,
)
from .tasks import FermiRecord
from .units import DIMENSIONLESS, Dimension, Quantity

K_RANGE = (2, 100)

_SEED_SPAN = 2**63


class NoEligibleObjects(FermiError):
    """No object in the KB carries the attributes a template slot needs."""

    def __init__(self, template_id: int, slot: str, attr: str):
        self.template_id = template_id
        self.slot = slot
        self.attr = attr
        super().__init__(
            f"template {template_id}: no object with {attr!r} for slot ${slot}"
        )


class SlotCollision(FermiError):
    """Cannot pick distinct objects for the template's slots."""

    def __init__(self, template_id: int, slot: str):
        self.template_id = template_id
        self.slot = slot
        super().__init__(
            f"template {template_id}: slot ${slot} has no object left once "
            "earlier slots are bound"
        )


class NoPivotObject(FermiError):
    """Decomposition found no third object carrying the pivot attribute."""

    def __init__(self, attr: str):
        self.attr = attr
        super().__init__(f"no unbound object with attribute {attr!r} to pivot on")


class KbTooSmall(FermiError):
    """The KB cannot support the requested dataset size without duplicates."""


# ---------------------------------------------------------------------------
# Template definitions

# Formula trees are nested tuples:
#   ("attr", slot, attribute)     one KB lookup, becomes a program leaf
#   ("k",)                        the sampled integer, inlined as a literal
#   ("num", value)                a fixed literal
#   (op, question_pattern, *args) an operator node; non-root nodes carry a
#                                 question pattern for their sub-question decl


@dataclass(frozen=True)
class Template:
    id: int
    question_pattern: str
    formula: tuple
    formula_text: str
    required_attrs: Mapping[str, str]
    uses_k: bool
    k_range: tuple[int, int] = K_RANGE


def _scan(formula) -> tuple[dict, bool]:
    kind = formula[0]
    if kind == "attr":
        return {formula[1]: formula[2]}, False
    if kind == "k":
        return {}, True
    if kind == "num":
        return {}, False
    attrs: dict = {}
    uses_k = False
    for arg in formula[2:]:
        sub_attrs, sub_k = _scan(arg)
        attrs.update(sub_attrs)
        uses_k = uses_k or sub_k
    return attrs, uses_k


def _formula_text(formula) -> str:
    kind = formula[0]
    if kind == "attr":
        return f"${formula[1]}.{formula[2]}"
    if kind == "k":
        return "$k"
    if kind == "num":
        value = formula[1]
        return str(int(value)) if float(value).is_integer() else str(value)
    args = ", ".join(_formula_text(arg) for arg in formula[2:])
    return f"{formula[0]}({args})"


def _template(tid: int, question: str, formula: tuple) -> Template:
    attrs, uses_k = _scan(formula)
    uses_k = uses_k or "$k" in question
    return Template(
        id=tid,
        question_pattern=question,
        formula=formula,
        formula_text=_formula_text(formula),
        required_attrs=attrs,
        uses_k=uses_k,
    )


TEMPLATES: tuple[Template, ...] = (
    _template(
        1,
        "How many $x fit in $y?",
        ("Div", None, ("attr", "y", "volume"), ("attr", "x", "volume")),
    ),
    _template(
        2,
        "How many $x have the same length as $y?",
        ("Div", None, ("attr", "y", "length"), ("attr", "x", "length")),
    ),
    _template(
        3,
        "How many $x fit on $y?",
        ("Div", None, ("attr", "y", "area"), ("attr", "x", "area")),
    ),
    _template(
        4,
        "How many $y put together contain the same information as $k of $x?",
        (
            "Mul",
            None,
            ("k",),
            (
                "Div",
                "How many $y hold the same information as one $x?",
                ("attr", "x", "data"),
                ("attr", "y", "data"),
            ),
        ),
    ),
    _template(
        5,
        "How long does it take for $x to travel across $y?",
        ("Div", None, ("attr", "y", "length"), ("attr", "x", "speed")),
    ),
    _template(
        6,
        "Assume $y's volume is half its value. How many $x fit in $y?",
        (
            "Div",
            None,
            ("attr", "y", "volume"),
            ("Div", "What is half the volume of $x?", ("attr", "x", "volume"), ("num", 2)),
        ),
    ),
    _template(
        7,
        "Assume $y's length is half its value. How many $x have the same length as $y?",
        (
            "Div",
            None,
            ("attr", "y", "length"),
            ("Div", "What is half the length of $x?", ("attr", "x", "length"), ("num", 2)),
        ),
    ),
    _template(
        8,
        "Assume $y's area is half its value. How many $x fit on $y?",
        (
            "Div",
            None,
            ("attr", "y", "area"),
            ("Div", "What is half the area of $x?", ("attr", "x", "area"), ("num", 2)),
        ),
    ),
    _template(
        9,
        "How many $x make up $k kgs?",
        ("Div", None, ("k",), ("attr", "x", "weight")),
    ),
    _template(
        10,
        "How many $x can $k of $y buy?",
        (
            "Mul",
            None,
            ("attr", "y", "cost"),
            (
                "Div",
                "How many $x does $k USD buy?",
                ("k",),
                ("attr", "x", "cost"),
            ),
        ),
    ),
    _template(
        11,
        "How long to digest $k grams of $x?",
        (
            "Mul",
            None,
            ("k",),
            (
                "Div",
                "How long does it take to digest one $x?",
                ("attr", "x", "calories"),
                ("num", 65),
            ),
        ),
    ),
    _template(
        12,
        "If $k of $x were to have the same density as $y, how much would it weigh?",
        (
            "Mul",
            None,
            ("k",),
            (
                "Mul",
                "What would one $x weigh with the density of $y?",
                ("attr", "y", "density"),
                ("attr", "x", "volume"),
            ),
        ),
    ),
)

TEMPLATE_BY_ID: Mapping[int, Template] = {t.id: t for t in TEMPLATES}


def _substitute(pattern: str, bindings: Mapping[str, str], k: int | None) -> str:
    text = pattern
    if k is not None:
        text = text.replace("$k", str(k))
    for slot in ("x", "y"):
        if slot in bindings:
            text = text.replace(f"${slot}", bindings[slot])
    return text


# ---------------------------------------------------------------------------
# Bound formula trees


@dataclass
class _Leaf:
    question: str
    fact: str
    value_text: str
    quantity: Quantity
    object_name: str | None = None
    attr: str | None = None


@dataclass
class _Node:
    op: str
    question: str | None
    args: list  # _Node | _Leaf | float


def _attr_leaf(kb: KnowledgeBase, name: str, attr: str) -> _Leaf:
    obj = kb.objects[name]
    raw = obj.raw[attr]
    return _Leaf(
        question=f"What is the {attr} of {name}?",
        fact=f"The {attr} of {name} is {raw}.",
        value_text=raw,
        quantity=obj.attributes[attr],
        object_name=name,
        attr=attr,
    )


def _bind(
    formula,
    kb: KnowledgeBase,
    bindings: Mapping[str, str],
    k: int | None,
):
    kind = formula[0]
    if kind == "attr":
        return _attr_leaf(kb, bindings[formula[1]], formula[2])
    if kind == "k":
        return float(k)
    if kind == "num":
        return float(formula[1])
    question = formula[1]
    if question is not None:
        question = _substitute(question, bindings, k)
    return _Node(
        op=kind,
        question=question,
        args=[_bind(arg, kb, bindings, k) for arg in formula[2:]],
    )


def _number_nodes(root: _Node) -> list:
    """Breadth-first numbering; index in the returned list is the id."""
    ordered: list = [root]
    cursor = 0
    while cursor < len(ordered):
        node = ordered[cursor]
        cursor += 1
        if isinstance(node, _Node):
            ordered.extend(arg for arg in node.args if not isinstance(arg, float))
    return ordered


def _tree_to_program(root: _Node) -> tuple[str, tuple[tuple[str, str], ...]]:
    ordered = _number_nodes(root)
    ids = {id(node): i for i, node in enumerate(ordered)}
    statements: list = []
    facts: list[tuple[str, str]] = []
    for i, node in enumerate(ordered):
        qid = Identifier("question", i)
        if isinstance(node, _Node):
            if node.question is not None and i > 0:
                statements.append(QuestionDecl(qid, node.question))
            args = tuple(
                arg if isinstance(arg, float) else Identifier("question", ids[id(arg)])
                for arg in node.args
            )
            statements.append(CompExpr(qid, MathExpr(node.op, args)))
        else:
            statements.append(QuestionDecl(qid, node.question))
            statements.append(FactDecl(Identifier("fact", i), node.fact))
            statements.append(ValueDecl(Identifier("value", i), node.value_text))
            statements.append(
                CompExpr(qid, ValueRef(Identifier("value", i), Identifier("fact", i)))
            )
            facts.append((f"F{i}", node.fact))
    return render_program(Program(tuple(statements))), tuple(facts)


def _eval_tree(node) -> tuple[float, Dimension]:
    """Closed-form answer: plain float arithmetic, no executor involved."""
    if isinstance(node, float):
        return node, DIMENSIONLESS
    if isinstance(node, _Leaf):
        return node.quantity.magnitude, node.quantity.dimension
    magnitude, dim = _eval_tree(node.args[0])
    for arg in node.args[1:]:
        other, other_dim = _eval_tree(arg)
        if node.op == "Mul":
            magnitude, dim = magnitude * other, dim * other_dim
        elif node.op == "Div":
            magnitude, dim = magnitude / other, dim / other_dim
        elif node.op == "Add":
            magnitude = magnitude + other
        else:
            magnitude = magnitude - other
    return magnitude, dim


# ---------------------------------------------------------------------------
# Instantiation


@dataclass(frozen=True)
class GeneratedRecord:
    """A dataset record plus the generation metadata that produced it."""

    record: FermiRecord
    template_id: int
    bindings: Mapping[str, str]
    k: int | None
    decomposed: bool
    seed: int


def _record_from_tree(
    root: _Node,
    template: Template,
    bindings: Mapping[str, str],
    k: int | None,
    record_id: str,
    seed: int,
    decomposed: bool,
) -> GeneratedRecord:
    program_text, facts = _tree_to_program(root)
    magnitude, dim = _eval_tree(root)
    record = FermiRecord(
        id=record_id,
        question=_substitute(template.question_pattern, bindings, k),
        answer_value=magnitude,
        answer_unit=dim.si_unit(),
        facts=facts,
        program=program_text,
        source="synth",
        split="train",
    )
    return GeneratedRecord(
        record=record,
        template_id=template.id,
        bindings=dict(bindings),
        k=k,
        decomposed=decomposed,
        seed=seed,
    )


def instantiate(
    template: Template,
    kb: KnowledgeBase,
    rng_seed: int,
    record_id: str = "synth-00000",
) -> GeneratedRecord:
    """Draw objects (and k) for one template and build the full record.

    Slots are filled in x, y order from sorted candidate pools, so the
    outcome is a pure function of (template, kb, rng_seed).
    """
    rng = random.Random(rng_seed)
    bindings: dict[str, str] = {}
    for slot in ("x", "y"):
        if slot not in template.required_attrs:
            continue
        attr = template.required_attrs[slot]
        pool = sorted(objects_with(kb, {attr}))
        if not pool:
            raise NoEligibleObjects(template.id, slot, attr)
        pool = [name for name in pool if name not in bindings.values()]
        if not pool:
            raise SlotCollision(template.id, slot)
        bindings[slot] = rng.choice(pool)
    k = rng.randint(*template.k_range) if template.uses_k else None
    root = _bind(template.formula, kb, bindings, k)
    return _record_from_tree(
        root, template, bindings, k, record_id, rng_seed, decomposed=False
    )


def decompose(
    generated: GeneratedRecord,
    kb: KnowledgeBase,
    rng_seed: int,
) -> GeneratedRecord:
    """Rewrite one attribute leaf as ratio * the same attribute of a pivot.

    The pivot is a third object outside the record's bindings. The answer is
    recomputed from the rewritten tree, so the executor still reproduces it
    exactly; against the original answer it agrees to float rounding.
    """
    if generated.decomposed:
        raise ValueError(f"record {generated.record.id} is already decomposed")
    template = TEMPLATE_BY_ID[generated.template_id]
    root = _bind(template.formula, kb, generated.bindings, generated.k)
    rng = random.Random(rng_seed)

    leaves = [n for n in _number_nodes(root) if isinstance(n, _Leaf)]
    leaf = leaves[rng.randrange(len(leaves))]
    pool = sorted(
        objects_with(kb, {leaf.attr}) - set(generated.bindings.values())
    )
    if not pool:
        raise NoPivotObject(leaf.attr)
    pivot = rng.choice(pool)

    pivot_leaf = _attr_leaf(kb, pivot, leaf.attr)
    ratio = leaf.quantity.magnitude / pivot_leaf.quantity.magnitude
    ratio_text = repr(ratio)
    phrase = f"the ratio of the {leaf.attr} of {leaf.object_name} and that of {pivot}"
    ratio_leaf = _Leaf(
        question=f"What is {phrase}?",
        fact=f"The {phrase[4:]} is {ratio_text}.",
        value_text=ratio_text,
        quantity=Quantity(ratio),
    )
    rewritten = _Node(op="Mul", question=leaf.question, args=[ratio_leaf, pivot_leaf])

    def swap(node):
        if isinstance(node, _Node):
            node.args = [rewritten if arg is leaf else swap(arg) for arg in node.args]
        return node

    swap(root)
    result = _record_from_tree(
        root,
        template,
        generated.bindings,
        generated.k,
        generated.record.id,
        generated.seed,
        decomposed=True,
    )
    if generated.record.split != result.record.split:
        result = replace(result, record=replace(result.record, split=generated.record.split))
    return result


# ---------------------------------------------------------------------------
# Dataset assembly


def _template_quota(size: int) -> dict[int, int]:
    base, remainder = divmod(size, len(TEMPLATES))
    return {t.id: base + (1 if i < remainder else 0) for i, t in enumerate(TEMPLATES)}


def _combination_bound(template: Template, kb: KnowledgeBase) -> int:
    """Exact count of distinct (bindings, k) draws a template supports."""
    if "y" in template.required_attrs:
        pool_x = objects_with(kb, {template.required_attrs["x"]})
        pool_y = objects_with(kb, {template.required_attrs["y"]})
        bound = len(pool_x) * len(pool_y) - len(pool_x & pool_y)
    else:
        bound = len(objects_with(kb, {template.required_attrs["x"]}))
    if template.uses_k:
        lo, hi = template.k_range
        bound *= hi - lo + 1
    return bound


@dataclass(frozen=True)
class GenerationResult:
    records: tuple[GeneratedRecord, ...]
    manifest: Mapping[str, object]


def _template_batch(
    kb: KnowledgeBase, template_id: int, need: int, rng_seed: int, id_base: int
) -> list[GeneratedRecord]:
    """Draw `need` distinct records for one template, ids from id_base up."""
    template = TEMPLATE_BY_ID[template_id]
    template_rng = random.Random(rng_seed)
    seen: set = set()
    batch: list[GeneratedRecord] = []
    attempts = 0
    budget = need * 200 + 50
    while len(seen) < need:
        attempts += 1
        if attempts > budget:
            raise KbTooSmall(
                f"template {template_id}: could not draw {need} distinct "
                f"records in {budget} attempts"
            )
        record_seed = template_rng.randrange(_SEED_SPAN)
        candidate = instantiate(
            template, kb, record_seed, record_id=f"synth-{id_base + len(seen):05d}"
        )
        key = (tuple(sorted(candidate.bindings.items())), candidate.k)
        if key in seen:
            continue
        seen.add(key)
        batch.append(candidate)
    return batch


def _template_batch_call(args) -> list[GeneratedRecord]:
    return _template_batch(*args)


def generate_dataset(
    kb: KnowledgeBase,
    size: int,
    decompose_fraction: float,
    rng_seed: int,
    jobs: int = 1,
) -> GenerationResult:
    """Generate `size` records with equal template representation.

    Templates get size/12 records each (the first size%12 templates one
    more). Exactly round(decompose_fraction * size) records are decomposed.
    Splits are 80/10/10 by a seeded shuffle. Everything is a pure function
    of (kb, size, decompose_fraction, rng_seed); `jobs` only spreads the
    per-template batches over processes and never changes the output.
    """
    if size < len(TEMPLATES):
        raise ValueError(f"size must be at least {len(TEMPLATES)}, got {size}")
    if not 0.0 <= decompose_fraction <= 1.0:
        raise ValueError("decompose_fraction must be within [0, 1]")

    master = random.Random(rng_seed)
    template_seeds = {t.id: master.randrange(_SEED_SPAN) for t in TEMPLATES}
    decompose_pick_seed = master.randrange(_SEED_SPAN)
    split_seed = master.randrange(_SEED_SPAN)

    quota = _template_quota(size)
    for template in TEMPLATES:
        if _combination_bound(template, kb) < quota[template.id]:
            raise KbTooSmall(
                f"template {template.id} supports fewer than "
                f"{quota[template.id]} distinct records"
            )
    calls = []
    serial = 0
    for template in TEMPLATES:
        calls.append(
            (kb, template.id, quota[template.id], template_seeds[template.id], serial)
        )
        serial += quota[template.id]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(calls))) as pool:
            batches = list(pool.map(_template_batch_call, calls))
    else:
        batches = [_template_batch(*call) for call in calls]
    generated: list[GeneratedRecord] = [g for batch in batches for g in batch]

    to_decompose = round(decompose_fraction * size)
    if to_decompose:
        pick_rng = random.Random(decompose_pick_seed)
        order = list(range(size))
        pick_rng.shuffle(order)
        done = 0
        for idx in order:
            if done == to_decompose:
                break
            seed = pick_rng.randrange(_SEED_SPAN)
            try:
                generated[idx] = decompose(generated[idx], kb, seed)
            except NoPivotObject:
                continue
            done += 1
        if done < to_decompose:
            raise KbTooSmall(
                f"only {done} of {to_decompose} requested decompositions possible"
            )

    split_rng = random.Random(split_seed)
    order = list(range(size))
    split_rng.shuffle(order)
    n_train = round(0.8 * size)
    n_validation = round(0.1 * size)
    split_of = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            split_of[idx] = "train"
        elif pos < n_train + n_validation:
            split_of[idx] = "validation"
        else:
            split_of[idx] = "test"
    for idx, item in enumerate(generated):
        if item.record.split != split_of[idx]:
            generated[idx] = replace(
                item, record=replace(item.record, split=split_of[idx])
            )

    split_counts = {"train": 0, "validation": 0, "test": 0}
    for item in generated:
        split_counts[item.record.split] += 1
    manifest = {
        "seed": rng_seed,
        "kb_content_hash": kb.content_hash(),
        "size": size,
        "decompose_fraction": decompose_fraction,
        "records_decomposed": sum(1 for g in generated if g.decomposed),
        "template_counts": {str(t.id): quota[t.id] for t in TEMPLATES},
        "split_counts": split_counts,
    }
    return GenerationResult(records=tuple(generated), manifest=manifest)
