"""Dataset records and the three challenge-task views built from them.

A record couples a Fermi question with its gold answer, supporting facts,
and an explanation program. The three views differ only in what the model
gets to see:

  perfect_context    question + exactly the gold facts
  distractor_context question + gold facts hidden among distractors (20 total)
  full               question alone

Distractors for the middle task are harvested from the facts of the most
similar other questions in the corpus. Similarity defaults to tf-idf cosine
over the question texts; callers can substitute any callable on two question
strings, including one backed by precomputed embedding vectors.

On-disk formats are line-delimited JSON with a one-line versioned header.
The model-facing task file never reveals which facts are gold; that mapping
lives in a separate answer-key file.
"""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import FermiError, SchemaError
from .executor import check_validity
from .program import ProgramError, parse_program, used_fact_ids
from .units import Quantity, parse_quantity

RECORDS_FORMAT = "fermi-records"
TASK_FORMAT = "fermi-task"
ANSWER_KEY_FORMAT = "fermi-answer-key"
FORMAT_VERSION = 1

TASKS = ("perfect_context", "distractor_context", "full")
DISTRACTOR_TOTAL = 20

SOURCES = ("real", "synth")
SPLITS = ("train", "validation", "test")

# Published sizes of the human-authored dataset splits, used as a sanity
# check when someone loads that data through this toolkit.
REAL_SPLIT_SIZES = {"train": 185, "validation": 185, "test": 558}

_FACT_ID_RE = re.compile(r"F[0-9]+\Z")


class InsufficientPool(FermiError):
    """Not enough distractor candidates to fill an instance to 20 facts."""

    def __init__(self, record_id: str, needed: int, available: int):
        self.record_id = record_id
        self.needed = needed
        self.available = available
        super().__init__(
            f"record {record_id!r}: needed {needed} distractor facts, "
            f"only {available} available"
        )


# ---------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class FermiRecord:
    """One question with its gold answer, facts, and explanation program.

    `flags` is derived when a file is loaded (never serialized): it marks
    records whose program fails validity or, for real-source data, cites
    facts that are not listed on the record.
    """

    id: str
    question: str
    answer_value: float
    answer_unit: str
    facts: tuple[tuple[str, str], ...]
    program: str
    source: str
    split: str
    flags: tuple[str, ...] = ()

    @property
    def answer(self) -> Quantity:
        """Gold answer as a quantity; unknown units degrade to dimensionless."""
        text = f"{self.answer_value!r} {self.answer_unit}".strip()
        return parse_quantity(text, on_unknown_unit="dimensionless")

    def fact_ids(self) -> tuple[str, ...]:
        return tuple(fid for fid, _ in self.facts)


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _parse_header(line: str, expected_format: str) -> dict:
    try:
        obj = json.loads(line)
    except ValueError:
        raise SchemaError(1, f"expected a {expected_format} header line, got {line!r}")
    if not isinstance(obj, dict) or obj.get("format") != expected_format:
        raise SchemaError(1, f"expected a {expected_format} header line, got {line!r}")
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise SchemaError(1, f"unsupported {expected_format} version {version!r}")
    return obj


def _parse_json_line(raw: str, lineno: int) -> dict:
    try:
        obj = json.loads(raw)
    except ValueError as exc:
        raise SchemaError(lineno, f"invalid JSON: {exc}")
    if not isinstance(obj, dict):
        raise SchemaError(lineno, "expected a JSON object")
    return obj


def _require(obj: dict, key: str, types, lineno: int):
    if key not in obj:
        raise SchemaError(lineno, f"missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise SchemaError(lineno, f"field {key!r} has the wrong type")
    return value


def _record_from_obj(obj: dict, lineno: int) -> FermiRecord:
    rid = _require(obj, "id", str, lineno)
    question = _require(obj, "question", str, lineno)
    answer_value = float(_require(obj, "answer_value", (int, float), lineno))
    answer_unit = _require(obj, "answer_unit", str, lineno)
    raw_facts = _require(obj, "facts", list, lineno)
    program = _require(obj, "program", str, lineno)
    source = _require(obj, "source", str, lineno)
    split = _require(obj, "split", str, lineno)
    if source not in SOURCES:
        raise SchemaError(lineno, f"source must be one of {SOURCES}, got {source!r}")
    if split not in SPLITS:
        raise SchemaError(lineno, f"split must be one of {SPLITS}, got {split!r}")

    facts: list[tuple[str, str]] = []
    seen: set[str] = set()
    for entry in raw_facts:
        if not isinstance(entry, dict) or set(entry) != {"id", "text"}:
            raise SchemaError(lineno, "each fact must be an object with id and text")
        fid, text = entry["id"], entry["text"]
        if not isinstance(fid, str) or not _FACT_ID_RE.match(fid):
            raise SchemaError(lineno, f"bad fact id {fid!r}, expected F<number>")
        if not isinstance(text, str) or not text.strip():
            raise SchemaError(lineno, f"fact {fid} has no text")
        if fid in seen:
            raise SchemaError(lineno, f"duplicate fact id {fid}")
        seen.add(fid)
        facts.append((fid, text))

    flags: list[str] = []
    parsed = None
    try:
        parsed = parse_program(program)
    except ProgramError:
        flags.append("invalid_program")
    if parsed is not None:
        cited = {str(ident) for ident in used_fact_ids(parsed)}
        unlisted = sorted(cited - seen, key=lambda s: int(s[1:]))
        if unlisted:
            if source == "synth":
                raise SchemaError(
                    lineno,
                    "program cites facts not listed on the record: "
                    + ", ".join(unlisted),
                )
            flags.append("program_cites_unlisted_facts")
        if check_validity(program) != 1:
            flags.append("invalid_program")

    return FermiRecord(
        id=rid,
        question=question,
        answer_value=answer_value,
        answer_unit=answer_unit,
        facts=tuple(facts),
        program=program,
        source=source,
        split=split,
        flags=tuple(flags),
    )


def read_records(path: str) -> list[FermiRecord]:
    """Load a fermi-records file, deriving validity flags per record."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(1, "empty file, expected a fermi-records header")
    _parse_header(lines[0], RECORDS_FORMAT)
    records: list[FermiRecord] = []
    seen_ids: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        record = _record_from_obj(_parse_json_line(raw, lineno), lineno)
        if record.id in seen_ids:
            raise SchemaError(lineno, f"duplicate record id {record.id!r}")
        seen_ids.add(record.id)
        records.append(record)
    return records


def write_records(records: Iterable[FermiRecord], path: str) -> None:
    """Write a fermi-records file. Flags are derived state and not stored."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dumps({"format": RECORDS_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for record in records:
            row = {
                "id": record.id,
                "question": record.question,
                "answer_value": record.answer_value,
                "answer_unit": record.answer_unit,
                "facts": [{"id": fid, "text": text} for fid, text in record.facts],
                "program": record.program,
                "source": record.source,
                "split": record.split,
            }
            fh.write(_dumps(row) + "\n")


def real_split_mismatches(records: Sequence[FermiRecord]) -> list[str]:
    """Check real-source records against the published split sizes.

    Returns one message per mismatching split; empty when the counts line
    up or when the input has no real-source records at all.
    """
    real = [r for r in records if r.source == "real"]
    if not real:
        return []
    counts = Counter(r.split for r in real)
    messages = []
    for split in SPLITS:
        expected = REAL_SPLIT_SIZES[split]
        got = counts.get(split, 0)
        if got != expected:
            messages.append(f"{split}: expected {expected} real records, got {got}")
    return messages


# ---------------------------------------------------------------------------
# Question similarity

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class TfidfIndex:
    """Lexical question similarity: cosine over L2-normalized tf-idf vectors.

    Term weights use raw counts times a smoothed idf, ln((1+N)/(1+df)) + 1,
    so tokens outside the corpus still get a finite weight. Questions with
    identical token counts score exactly 1.0.
    """

    def __init__(self, corpus: Sequence[str]):
        self.corpus = list(corpus)
        self._n = len(self.corpus)
        self._counts = [Counter(_tokenize(q)) for q in self.corpus]
        df: Counter[str] = Counter()
        for counts in self._counts:
            df.update(counts.keys())
        self._df = df
        self._vectors = [self._weigh(c) for c in self._counts]
        self._by_text: dict[str, int] = {}
        for i, question in enumerate(self.corpus):
            self._by_text.setdefault(question, i)
        postings: dict[str, list[tuple[int, float]]] = defaultdict(list)
        for i, vec in enumerate(self._vectors):
            for token, weight in vec.items():
                postings[token].append((i, weight))
        self._postings = dict(postings)

    def _idf(self, token: str) -> float:
        return math.log((1 + self._n) / (1 + self._df.get(token, 0))) + 1.0

    def _weigh(self, counts: Counter) -> dict[str, float]:
        vec = {token: tf * self._idf(token) for token, tf in counts.items()}
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm > 0.0:
            vec = {token: w / norm for token, w in vec.items()}
        return vec

    def _vector_for(self, text: str) -> tuple[Counter, dict[str, float]]:
        i = self._by_text.get(text)
        if i is not None:
            return self._counts[i], self._vectors[i]
        counts = Counter(_tokenize(text))
        return counts, self._weigh(counts)

    def __call__(self, q1: str, q2: str) -> float:
        c1, v1 = self._vector_for(q1)
        c2, v2 = self._vector_for(q2)
        if c1 == c2:
            return 1.0
        if len(v2) < len(v1):
            v1, v2 = v2, v1
        return sum(w * v2.get(token, 0.0) for token, w in v1.items())

    def rank_others(self, i: int) -> list[int]:
        """All other corpus indices, most similar first, ties by index."""
        scores: dict[int, float] = defaultdict(float)
        for token, weight in self._vectors[i].items():
            for j, other in self._postings[token]:
                if j != i:
                    scores[j] += weight * other
        for j, counts in enumerate(self._counts):
            if j != i and counts == self._counts[i]:
                scores[j] = 1.0
        return sorted(
            (j for j in range(self._n) if j != i),
            key=lambda j: (-scores[j], j),
        )


class PrecomputedSimilarity:
    """Similarity backed by externally supplied per-question vectors.

    `vectors` maps question text to a vector (for instance a sentence
    embedding). Vectors are L2-normalized on the way in; scores are cosines
    clamped into [0, 1].
    """

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        self._vectors: dict[str, list[float]] = {}
        for text, raw in vectors.items():
            vec = [float(x) for x in raw]
            norm = math.sqrt(sum(x * x for x in vec))
            if norm > 0.0:
                vec = [x / norm for x in vec]
            self._vectors[text] = vec

    def __call__(self, q1: str, q2: str) -> float:
        try:
            v1 = self._vectors[q1]
            v2 = self._vectors[q2]
        except KeyError as exc:
            raise KeyError(f"no precomputed vector for question {exc.args[0]!r}") from None
        if q1 == q2:
            return 1.0
        if len(v1) != len(v2):
            raise ValueError("precomputed vectors differ in length")
        return max(0.0, min(1.0, sum(a * b for a, b in zip(v1, v2))))


SimilarityFn = Callable[[str, str], float]


# ---------------------------------------------------------------------------
# Task views


@dataclass(frozen=True)
class TaskInstance:
    """What the model sees for one record, plus the hidden gold bookkeeping.

    `fact_id_map` translates the ids in `input_facts` back to where each
    sentence came from: "gold:<original id>" or
    "distractor:<record id>:<original id>".
    """

    task: str
    input_question: str
    input_facts: tuple[tuple[str, str], ...]
    gold: FermiRecord
    gold_fact_ids: frozenset[str]
    fact_id_map: Mapping[str, str] = field(default_factory=dict)
    flags: tuple[str, ...] = ()


def _ranked_neighbors(
    records: Sequence[FermiRecord],
    i: int,
    similarity: SimilarityFn,
) -> list[int]:
    if isinstance(similarity, TfidfIndex) and similarity.corpus == [
        r.question for r in records
    ]:
        return similarity.rank_others(i)
    question = records[i].question
    scored = [
        (-similarity(question, records[j].question), j)
        for j in range(len(records))
        if j != i
    ]
    scored.sort()
    return [j for _, j in scored]


def _distractor_instance(
    records: Sequence[FermiRecord],
    i: int,
    similarity: SimilarityFn,
    shuffle_seed: int,
) -> TaskInstance:
    record = records[i]
    gold_texts = {text for _, text in record.facts}
    need = DISTRACTOR_TOTAL - len(record.facts)
    flags: tuple[str, ...] = ()
    pool: list[tuple[str, str, str]] = []
    if need > 0:
        chosen: set[str] = set()
        for j in _ranked_neighbors(records, i, similarity):
            if len(pool) >= need:
                break
            for fid, text in records[j].facts:
                if len(pool) >= need:
                    break
                if text in gold_texts or text in chosen:
                    continue
                chosen.add(text)
                pool.append((records[j].id, fid, text))
        if len(pool) < need:
            raise InsufficientPool(record.id, need, len(pool))
    elif len(record.facts) > DISTRACTOR_TOTAL:
        flags = ("gold_facts_exceed_20",)

    combined = [(f"gold:{fid}", text) for fid, text in record.facts]
    combined += [(f"distractor:{rid}:{fid}", text) for rid, fid, text in pool]
    random.Random(shuffle_seed).shuffle(combined)

    facts: list[tuple[str, str]] = []
    id_map: dict[str, str] = {}
    gold_ids: set[str] = set()
    for k, (origin, text) in enumerate(combined, start=1):
        new_id = f"F{k}"
        facts.append((new_id, text))
        id_map[new_id] = origin
        if origin.startswith("gold:"):
            gold_ids.add(new_id)
    return TaskInstance(
        task="distractor_context",
        input_question=record.question,
        input_facts=tuple(facts),
        gold=record,
        gold_fact_ids=frozenset(gold_ids),
        fact_id_map=id_map,
        flags=flags,
    )


def build_task(
    records: Sequence[FermiRecord],
    task: str,
    similarity: SimilarityFn | None = None,
    rng_seed: int | None = None,
) -> list[TaskInstance]:
    """Build one task view over all records, in record order.

    The distractor task needs `rng_seed`: the fact shuffle per record uses
    a child seed drawn from a master stream, so the output is reproducible
    and independent of how the records are processed.
    """
    records = list(records)
    if not records:
        raise ValueError("records must be non-empty")
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")

    if task == "perfect_context":
        return [
            TaskInstance(
                task=task,
                input_question=r.question,
                input_facts=r.facts,
                gold=r,
                gold_fact_ids=frozenset(r.fact_ids()),
                fact_id_map={fid: f"gold:{fid}" for fid in r.fact_ids()},
            )
            for r in records
        ]
    if task == "full":
        return [
            TaskInstance(
                task=task,
                input_question=r.question,
                input_facts=(),
                gold=r,
                gold_fact_ids=frozenset(r.fact_ids()),
            )
            for r in records
        ]

    if rng_seed is None:
        raise ValueError("distractor_context requires rng_seed")
    if similarity is None:
        similarity = TfidfIndex([r.question for r in records])
    master = random.Random(rng_seed)
    seeds = [master.randrange(2**63) for _ in records]
    return [
        _distractor_instance(records, i, similarity, seeds[i])
        for i in range(len(records))
    ]


# ---------------------------------------------------------------------------
# Task and answer-key files


def _sorted_fact_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=lambda s: int(s[1:]))


def _single_task(instances: Sequence[TaskInstance]) -> str:
    tasks = {inst.task for inst in instances}
    if len(tasks) != 1:
        raise ValueError(f"instances mix tasks: {sorted(tasks)}")
    return tasks.pop()


def write_task_file(instances: Sequence[TaskInstance], path: str) -> None:
    """Write the model-facing inputs: question and (anonymized) facts only."""
    task = _single_task(instances)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": TASK_FORMAT, "version": FORMAT_VERSION, "task": task}
        fh.write(_dumps(header) + "\n")
        for inst in instances:
            row = {
                "id": inst.gold.id,
                "question": inst.input_question,
                "facts": [{"id": fid, "text": text} for fid, text in inst.input_facts],
            }
            fh.write(_dumps(row) + "\n")


def write_answer_key(instances: Sequence[TaskInstance], path: str) -> None:
    """Write the gold side: answers, programs, and the fact-id mapping.

    Fact ids are keyed only for tasks whose input includes facts; the full
    task stores null there, and scorers treat fact F1 as not applicable.
    """
    task = _single_task(instances)
    facts_in_input = task != "full"
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": ANSWER_KEY_FORMAT, "version": FORMAT_VERSION, "task": task}
        fh.write(_dumps(header) + "\n")
        for inst in instances:
            record = inst.gold
            row = {
                "id": record.id,
                "answer_value": record.answer_value,
                "answer_unit": record.answer_unit,
                "program": record.program,
                "gold_fact_ids": (
                    _sorted_fact_ids(inst.gold_fact_ids) if facts_in_input else None
                ),
                "fact_id_map": dict(inst.fact_id_map) if facts_in_input else None,
            }
            fh.write(_dumps(row) + "\n")


@dataclass(frozen=True)
class AnswerKeyEntry:
    id: str
    answer_value: float
    answer_unit: str
    program: str
    gold_fact_ids: frozenset[str] | None
    fact_id_map: Mapping[str, str] | None

    @property
    def answer(self) -> Quantity:
        text = f"{self.answer_value!r} {self.answer_unit}".strip()
        return parse_quantity(text, on_unknown_unit="dimensionless")


@dataclass(frozen=True)
class AnswerKey:
    task: str
    entries: Mapping[str, AnswerKeyEntry]


def read_answer_key(path: str) -> AnswerKey:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(1, "empty file, expected a fermi-answer-key header")
    header = _parse_header(lines[0], ANSWER_KEY_FORMAT)
    task = header.get("task")
    if task not in TASKS:
        raise SchemaError(1, f"header task must be one of {TASKS}, got {task!r}")
    entries: dict[str, AnswerKeyEntry] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        obj = _parse_json_line(raw, lineno)
        rid = _require(obj, "id", str, lineno)
        if rid in entries:
            raise SchemaError(lineno, f"duplicate record id {rid!r}")
        gold_ids = obj.get("gold_fact_ids")
        if gold_ids is not None and not isinstance(gold_ids, list):
            raise SchemaError(lineno, "gold_fact_ids must be a list or null")
        id_map = obj.get("fact_id_map")
        if id_map is not None and not isinstance(id_map, dict):
            raise SchemaError(lineno, "fact_id_map must be an object or null")
        entries[rid] = AnswerKeyEntry(
            id=rid,
            answer_value=float(_require(obj, "answer_value", (int, float), lineno)),
            answer_unit=_require(obj, "answer_unit", str, lineno),
            program=_require(obj, "program", str, lineno),
            gold_fact_ids=frozenset(gold_ids) if gold_ids is not None else None,
            fact_id_map=dict(id_map) if id_map is not None else None,
        )
    return AnswerKey(task=task, entries=entries)


def sniff_format(path: str) -> str | None:
    """Name from a file's header line, or None when there is no header."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    try:
        obj = json.loads(first)
    except ValueError:
        return None
    if isinstance(obj, dict) and isinstance(obj.get("format"), str):
        return obj["format"]
    return None


# ---------------------------------------------------------------------------
# Predictions


@dataclass(frozen=True)
class Prediction:
    """One model output: a direct answer and/or an explanation program."""

    id: str
    answer_value: float | None
    answer_unit: str
    program: str | None

    @property
    def answer(self) -> Quantity | None:
        if self.answer_value is None:
            return None
        text = f"{self.answer_value!r} {self.answer_unit}".strip()
        return parse_quantity(text, on_unknown_unit="dimensionless")


def read_predictions(path: str) -> list[Prediction]:
    """Load a predictions file: JSON lines {id, answer_value?, answer_unit?, program?}.

    Every line needs at least one of answer_value and program. No header is
    required; a header line is tolerated and skipped so task outputs can be
    piped back without surgery.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    predictions: list[Prediction] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        obj = _parse_json_line(raw, lineno)
        if lineno == 1 and isinstance(obj.get("format"), str):
            continue
        rid = _require(obj, "id", str, lineno)
        if rid in seen:
            raise SchemaError(lineno, f"duplicate prediction id {rid!r}")
        seen.add(rid)
        answer_value = obj.get("answer_value")
        if answer_value is not None and (
            isinstance(answer_value, bool) or not isinstance(answer_value, (int, float))
        ):
            raise SchemaError(lineno, "answer_value must be a number or null")
        answer_unit = obj.get("answer_unit", "")
        if not isinstance(answer_unit, str):
            raise SchemaError(lineno, "answer_unit must be a string")
        if answer_unit and answer_value is None:
            raise SchemaError(lineno, "answer_unit given without answer_value")
        program = obj.get("program")
        if program is not None and not isinstance(program, str):
            raise SchemaError(lineno, "program must be a string or null")
        if answer_value is None and program is None:
            raise SchemaError(lineno, "need at least one of answer_value and program")
        predictions.append(
            Prediction(
                id=rid,
                answer_value=float(answer_value) if answer_value is not None else None,
                answer_unit=answer_unit,
                program=program,
            )
        )
    return predictions
