"""Record files, question similarity, and the three task views."""

import json
import math
import re
from collections import Counter
from pathlib import Path

import pytest

from fermibench.errors import SchemaError
from fermibench.metrics import fact_f1
from fermibench.tasks import (
    DISTRACTOR_TOTAL,
    FermiRecord,
    InsufficientPool,
    PrecomputedSimilarity,
    Prediction,
    TfidfIndex,
    build_task,
    read_answer_key,
    read_predictions,
    read_records,
    real_split_mismatches,
    sniff_format,
    write_answer_key,
    write_records,
    write_task_file,
)
from fermibench.units import parse_quantity

FIXTURE = Path(__file__).parent / "fixtures" / "realfp_sample.jsonl"


def make_record(i, question=None, facts=None, **overrides):
    """A small valid synth record; program cites F1 which always exists."""
    if question is None:
        question = f"How many widgets of kind {i % 4} fit in container {i}?"
    if facts is None:
        facts = tuple((f"F{k + 1}", f"Fact {k} about container {i}.") for k in range(3))
    fields = dict(
        id=f"r{i:03d}",
        question=question,
        answer_value=float(i + 1),
        answer_unit="",
        facts=tuple(facts),
        program="Q0 -> A1 because F1, A1: 5",
        source="synth",
        split="train",
    )
    fields.update(overrides)
    return FermiRecord(**fields)


# ---------------------------------------------------------------------------
# Record files


class TestRecordFiles:
    def test_fixture_loads_clean(self):
        records = read_records(str(FIXTURE))
        assert [r.id for r in records] == ["real-0001", "real-0002", "real-0003"]
        assert [r.split for r in records] == ["train", "validation", "test"]
        assert all(r.flags == () for r in records)
        assert all(r.source == "real" for r in records)
        # one record exercises the "|" separator and the P: root form
        assert "|" in records[1].program and "P:" in records[1].program

    def test_fixture_answers_parse_with_units(self):
        records = read_records(str(FIXTURE))
        assert records[0].answer == parse_quantity("3360 L")
        assert records[1].answer == parse_quantity("972000")
        assert records[2].answer == parse_quantity("1840 km")

    def test_round_trip_is_identity(self, tmp_path):
        records = read_records(str(FIXTURE))
        out = tmp_path / "copy.jsonl"
        write_records(records, str(out))
        assert read_records(str(out)) == records

    def test_flags_are_not_serialized(self, tmp_path):
        record = make_record(0, program="Q0 -> A1 because F1")  # no A1 decl
        out = tmp_path / "r.jsonl"
        write_records([record], str(out))
        assert "invalid_program" not in out.read_text()
        loaded = read_records(str(out))
        assert loaded[0].flags == ("invalid_program",)

    def test_unparsable_program_is_flagged_not_rejected(self, tmp_path):
        record = make_record(0, program="this is not a program")
        out = tmp_path / "r.jsonl"
        write_records([record], str(out))
        assert read_records(str(out))[0].flags == ("invalid_program",)

    def test_synth_program_citing_unlisted_fact_is_an_error(self, tmp_path):
        record = make_record(0, program="Q0 -> A1 because F9, A1: 5")
        out = tmp_path / "r.jsonl"
        write_records([record], str(out))
        with pytest.raises(SchemaError) as exc:
            read_records(str(out))
        assert "F9" in str(exc.value) and exc.value.line == 2

    def test_real_program_citing_unlisted_fact_is_flagged(self, tmp_path):
        record = make_record(0, program="Q0 -> A1 because F9, A1: 5", source="real")
        out = tmp_path / "r.jsonl"
        write_records([record], str(out))
        assert read_records(str(out))[0].flags == ("program_cites_unlisted_facts",)

    @pytest.mark.parametrize(
        "lines, line_no, needle",
        [
            ([], 1, "header"),
            (['{"format": "fermi-task", "version": 1}'], 1, "fermi-records"),
            (['{"format": "fermi-records", "version": 2}'], 1, "version"),
            (["not json"], 1, "header"),
            (
                ['{"format": "fermi-records", "version": 1}', "{broken"],
                2,
                "invalid JSON",
            ),
            (
                ['{"format": "fermi-records", "version": 1}', '["list"]'],
                2,
                "object",
            ),
        ],
    )
    def test_malformed_files(self, tmp_path, lines, line_no, needle):
        out = tmp_path / "bad.jsonl"
        out.write_text("\n".join(lines) + ("\n" if lines else ""))
        with pytest.raises(SchemaError) as exc:
            read_records(str(out))
        assert exc.value.line == line_no
        assert needle in exc.value.reason

    @pytest.mark.parametrize(
        "mutate, needle",
        [
            (lambda row: row.pop("question"), "missing field 'question'"),
            (lambda row: row.update(answer_value="big"), "wrong type"),
            (lambda row: row.update(source="scraped"), "source must be"),
            (lambda row: row.update(split="dev"), "split must be"),
            (lambda row: row["facts"].append({"id": "Q1", "text": "x"}), "bad fact id"),
            (
                lambda row: row["facts"].append({"id": "F1", "text": "again"}),
                "duplicate fact id",
            ),
            (lambda row: row["facts"].append({"id": "F4"}), "id and text"),
        ],
    )
    def test_bad_record_fields(self, tmp_path, mutate, needle):
        row = {
            "id": "r000",
            "question": "How many?",
            "answer_value": 5.0,
            "answer_unit": "",
            "facts": [{"id": "F1", "text": "A fact."}],
            "program": "Q0 -> A1 because F1, A1: 5",
            "source": "synth",
            "split": "train",
        }
        mutate(row)
        out = tmp_path / "bad.jsonl"
        out.write_text(
            '{"format": "fermi-records", "version": 1}\n' + json.dumps(row) + "\n"
        )
        with pytest.raises(SchemaError) as exc:
            read_records(str(out))
        assert exc.value.line == 2
        assert needle in exc.value.reason

    def test_duplicate_record_ids_rejected(self, tmp_path):
        out = tmp_path / "dup.jsonl"
        write_records([make_record(0), make_record(0)], str(out))
        with pytest.raises(SchemaError) as exc:
            read_records(str(out))
        assert exc.value.line == 3

    def test_unknown_answer_unit_degrades_to_dimensionless(self):
        record = make_record(0, answer_value=7.0, answer_unit="widgets")
        assert record.answer == parse_quantity("7")

    def test_real_split_mismatches(self):
        fixture_records = read_records(str(FIXTURE))
        messages = real_split_mismatches(fixture_records)
        assert len(messages) == 3 and any("expected 185" in m for m in messages)
        assert real_split_mismatches([make_record(0)]) == []
        exact = (
            [make_record(i, source="real", split="train") for i in range(185)]
            + [
                make_record(i + 200, source="real", split="validation")
                for i in range(185)
            ]
            + [make_record(i + 400, source="real", split="test") for i in range(558)]
        )
        assert real_split_mismatches(exact) == []


# ---------------------------------------------------------------------------
# Similarity

CORPUS = [
    "How many basketballs fit in a school bus?",
    "How many tennis balls fit in a school bus?",
    "How much water fills an olympic swimming pool?",
    "How many basketballs fit in an olympic swimming pool?",
    "What is the mass of a school bus?",
    "How long would it take to count to a billion?",
]


def oracle_similarity(corpus, a, b):
    """Brute-force tf-idf cosine, written from scratch as a check."""
    docs = [re.findall(r"[a-z0-9]+", q.lower()) for q in corpus]
    n = len(docs)
    df = Counter()
    for doc in docs:
        df.update(set(doc))

    def vec(doc):
        tf = Counter(doc)
        v = {t: tf[t] * (math.log((1 + n) / (1 + df[t])) + 1.0) for t in tf}
        norm = math.sqrt(sum(x * x for x in v.values()))
        return {t: x / norm for t, x in v.items()} if norm else v

    va, vb = vec(docs[a]), vec(docs[b])
    return sum(w * vb.get(t, 0.0) for t, w in va.items())


class TestTfidf:
    def test_matches_brute_force_pairwise(self):
        index = TfidfIndex(CORPUS)
        for a in range(len(CORPUS)):
            for b in range(len(CORPUS)):
                if a == b:
                    continue
                got = index(CORPUS[a], CORPUS[b])
                want = oracle_similarity(CORPUS, a, b)
                assert got == pytest.approx(want, abs=1e-12)

    def test_self_similarity_is_exactly_one(self):
        index = TfidfIndex(CORPUS)
        for q in CORPUS:
            assert index(q, q) == 1.0

    def test_disjoint_vocabularies_score_zero(self):
        index = TfidfIndex(["red green blue", "seven eight nine"])
        assert index("red green blue", "seven eight nine") == 0.0

    def test_top_neighbor_matches_brute_force_argmax(self):
        index = TfidfIndex(CORPUS)
        for i in range(len(CORPUS)):
            want = max(
                (j for j in range(len(CORPUS)) if j != i),
                key=lambda j: (oracle_similarity(CORPUS, i, j), -j),
            )
            assert index.rank_others(i)[0] == want

    def test_rank_others_is_a_permutation_sorted_by_score(self):
        index = TfidfIndex(CORPUS)
        for i in range(len(CORPUS)):
            ranked = index.rank_others(i)
            assert sorted(ranked) == [j for j in range(len(CORPUS)) if j != i]
            scores = [index(CORPUS[i], CORPUS[j]) for j in ranked]
            assert scores == sorted(scores, reverse=True)

    def test_out_of_corpus_text_still_scores(self):
        index = TfidfIndex(CORPUS)
        assert index("How many basketballs are there?", CORPUS[0]) > 0.0
        assert index("zorp glef", CORPUS[0]) == 0.0

    def test_identical_token_counts_across_texts_score_one(self):
        index = TfidfIndex(["A school bus!", "a SCHOOL bus"])
        assert index("A school bus!", "a SCHOOL bus") == 1.0


class TestPrecomputedSimilarity:
    def test_cosine_of_supplied_vectors(self):
        sim = PrecomputedSimilarity({"a": [1.0, 0.0], "b": [0.0, 2.0], "c": [3.0, 3.0]})
        assert sim("a", "b") == 0.0
        assert sim("a", "c") == pytest.approx(math.cos(math.pi / 4))
        assert sim("a", "a") == 1.0

    def test_negative_cosine_clamps_to_zero(self):
        sim = PrecomputedSimilarity({"a": [1.0, 0.0], "b": [-1.0, 0.0]})
        assert sim("a", "b") == 0.0

    def test_unknown_question_raises(self):
        sim = PrecomputedSimilarity({"a": [1.0]})
        with pytest.raises(KeyError):
            sim("a", "mystery")

    def test_drives_distractor_ranking(self):
        # vectors force r001 to be most similar to r000 despite no shared words
        records = [
            make_record(0, question="alpha"),
            make_record(1, question="bravo", facts=(("F1", "Bravo fact."),) * 1),
            make_record(2, question="charlie"),
        ]
        records += [make_record(i, question=f"noise {i}") for i in range(3, 12)]
        vectors = {r.question: [0.0, 1.0] for r in records}
        vectors["alpha"] = [1.0, 1.0]
        vectors["bravo"] = [1.0, 1.0]
        instances = build_task(records, "distractor_context", vectors and PrecomputedSimilarity(vectors), rng_seed=5)
        origins = instances[0].fact_id_map.values()
        assert any(origin == "distractor:r001:F1" for origin in origins)


# ---------------------------------------------------------------------------
# Task views


class TestPerfectAndFull:
    def test_perfect_context_is_the_identity_view(self):
        records = read_records(str(FIXTURE))
        instances = build_task(records, "perfect_context")
        for inst, record in zip(instances, records):
            assert inst.input_facts == record.facts
            assert inst.gold is record
            assert inst.gold_fact_ids == frozenset(record.fact_ids())
            assert inst.fact_id_map == {f: f"gold:{f}" for f in record.fact_ids()}

    def test_full_has_no_input_facts(self):
        records = read_records(str(FIXTURE))
        for inst in build_task(records, "full"):
            assert inst.input_facts == ()

    def test_empty_records_rejected(self):
        with pytest.raises(ValueError):
            build_task([], "perfect_context")

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError):
            build_task([make_record(0)], "task_4")


class TestDistractorContext:
    def records(self, n=12):
        return [make_record(i) for i in range(n)]

    def test_instances_have_exactly_twenty_facts(self):
        for inst in build_task(self.records(), "distractor_context", rng_seed=7):
            assert len(inst.input_facts) == DISTRACTOR_TOTAL
            assert [fid for fid, _ in inst.input_facts] == [
                f"F{k}" for k in range(1, DISTRACTOR_TOTAL + 1)
            ]

    def test_all_gold_facts_present_and_mapped(self):
        records = self.records()
        by_id = {r.id: r for r in records}
        for inst in build_task(records, "distractor_context", rng_seed=7):
            gold_texts = {text for _, text in inst.gold.facts}
            input_texts = dict(inst.input_facts)
            assert gold_texts <= set(input_texts.values())
            assert len(inst.gold_fact_ids) == len(inst.gold.facts)
            for new_id, origin in inst.fact_id_map.items():
                kind, rest = origin.split(":", 1)
                if kind == "gold":
                    assert input_texts[new_id] == dict(inst.gold.facts)[rest]
                    assert new_id in inst.gold_fact_ids
                else:
                    rid, fid = rest.rsplit(":", 1)
                    assert input_texts[new_id] == dict(by_id[rid].facts)[fid]
                    assert new_id not in inst.gold_fact_ids

    def test_no_distractor_duplicates_a_gold_sentence(self):
        records = self.records()
        # another record carries a verbatim copy of r000's first gold sentence
        records[1] = make_record(
            1,
            question=records[0].question,  # maximally similar, ranked first
            facts=(("F1", records[0].facts[0][1]), ("F2", "An original fact.")),
        )
        instances = build_task(records, "distractor_context", rng_seed=7)
        texts = [text for _, text in instances[0].input_facts]
        assert len(texts) == len(set(texts)) == DISTRACTOR_TOTAL
        assert "distractor:r001:F1" not in instances[0].fact_id_map.values()
        assert "distractor:r001:F2" in instances[0].fact_id_map.values()

    def test_input_is_a_permutation_of_gold_plus_distractors(self):
        for inst in build_task(self.records(), "distractor_context", rng_seed=7):
            rebuilt = Counter(
                origin for origin in inst.fact_id_map.values()
            )
            assert sum(rebuilt.values()) == DISTRACTOR_TOTAL
            assert all(count == 1 for count in rebuilt.values())
            gold = [o for o in rebuilt if o.startswith("gold:")]
            assert len(gold) == len(inst.gold.facts)

    def test_distractors_come_from_most_similar_questions_first(self):
        records = [
            make_record(0, question="How heavy is a zorblax engine?"),
            make_record(1, question="How heavy is a zorblax engine block?"),
        ]
        records += [
            make_record(i, question=f"Unrelated question number {i}?")
            for i in range(2, 12)
        ]
        instances = build_task(records, "distractor_context", rng_seed=3)
        origins = set(instances[0].fact_id_map.values())
        # the near-duplicate neighbor's whole fact list is exhausted first
        for fid, _ in records[1].facts:
            assert f"distractor:r001:{fid}" in origins

    def test_same_seed_reproduces_instances(self):
        records = self.records()
        a = build_task(records, "distractor_context", rng_seed=11)
        b = build_task(records, "distractor_context", rng_seed=11)
        assert a == b

    def test_different_seed_changes_a_shuffle(self):
        records = self.records()
        a = build_task(records, "distractor_context", rng_seed=11)
        b = build_task(records, "distractor_context", rng_seed=12)
        assert any(
            x.input_facts != y.input_facts for x, y in zip(a, b)
        )

    def test_twenty_gold_facts_take_no_distractors(self):
        facts = tuple((f"F{k + 1}", f"Gold sentence {k}.") for k in range(20))
        records = [make_record(0, facts=facts)] + self.records(12)[1:]
        inst = build_task(records, "distractor_context", rng_seed=7)[0]
        assert len(inst.input_facts) == 20
        assert inst.flags == ()
        assert all(o.startswith("gold:") for o in inst.fact_id_map.values())

    def test_more_than_twenty_gold_facts_kept_and_flagged(self):
        facts = tuple((f"F{k + 1}", f"Gold sentence {k}.") for k in range(22))
        records = [make_record(0, facts=facts)] + self.records(12)[1:]
        inst = build_task(records, "distractor_context", rng_seed=7)[0]
        assert len(inst.input_facts) == 22
        assert inst.flags == ("gold_facts_exceed_20",)
        assert len(inst.gold_fact_ids) == 22

    def test_insufficient_pool_reports_shortfall(self):
        records = [make_record(0), make_record(1)]
        with pytest.raises(InsufficientPool) as exc:
            build_task(records, "distractor_context", rng_seed=7)
        assert exc.value.needed == 17
        assert exc.value.available == 3

    def test_seed_is_required(self):
        with pytest.raises(ValueError):
            build_task(self.records(), "distractor_context")


# ---------------------------------------------------------------------------
# Task and answer-key files


class TestTaskFiles:
    def build(self, tmp_path, task="distractor_context", seed=7):
        records = [make_record(i) for i in range(12)]
        instances = build_task(records, task, rng_seed=seed)
        task_path = tmp_path / "task.jsonl"
        key_path = tmp_path / "key.jsonl"
        write_task_file(instances, str(task_path))
        write_answer_key(instances, str(key_path))
        return records, instances, task_path, key_path

    def test_task_file_reveals_nothing_gold(self, tmp_path):
        _, _, task_path, _ = self.build(tmp_path)
        lines = task_path.read_text().splitlines()
        header = json.loads(lines[0])
        assert header == {
            "format": "fermi-task",
            "version": 1,
            "task": "distractor_context",
        }
        for raw in lines[1:]:
            row = json.loads(raw)
            assert set(row) == {"id", "question", "facts"}

    def test_answer_key_round_trips_and_scores_itself(self, tmp_path):
        _, instances, _, key_path = self.build(tmp_path)
        key = read_answer_key(str(key_path))
        assert key.task == "distractor_context"
        for inst in instances:
            entry = key.entries[inst.gold.id]
            assert entry.gold_fact_ids == inst.gold_fact_ids
            assert entry.fact_id_map == dict(inst.fact_id_map)
            assert entry.program == inst.gold.program
            assert fact_f1(entry.gold_fact_ids, inst.gold_fact_ids) == 1.0
            assert entry.answer == inst.gold.answer

    def test_full_task_key_has_no_fact_ids(self, tmp_path):
        _, _, _, key_path = self.build(tmp_path, task="full")
        key = read_answer_key(str(key_path))
        assert all(e.gold_fact_ids is None for e in key.entries.values())
        assert all(e.fact_id_map is None for e in key.entries.values())

    def test_same_seed_same_bytes(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        _, _, task_a, key_a = self.build(tmp_path / "a", seed=9)
        _, _, task_b, key_b = self.build(tmp_path / "b", seed=9)
        assert task_a.read_bytes() == task_b.read_bytes()
        assert key_a.read_bytes() == key_b.read_bytes()

    def test_mixed_tasks_cannot_share_a_file(self, tmp_path):
        records = [make_record(i) for i in range(12)]
        mixed = build_task(records, "full") + build_task(records, "perfect_context")
        with pytest.raises(ValueError):
            write_task_file(mixed, str(tmp_path / "mixed.jsonl"))

    def test_sniff_format(self, tmp_path):
        records, _, task_path, key_path = self.build(tmp_path)
        records_path = tmp_path / "records.jsonl"
        write_records(records, str(records_path))
        pred_path = tmp_path / "pred.jsonl"
        pred_path.write_text('{"id": "r000", "answer": "5"}\n')
        assert sniff_format(str(records_path)) == "fermi-records"
        assert sniff_format(str(task_path)) == "fermi-task"
        assert sniff_format(str(key_path)) == "fermi-answer-key"
        assert sniff_format(str(pred_path)) is None


class TestPredictions:
    def test_reads_answers_and_programs(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text(
            '{"id": "a", "answer_value": 3360, "answer_unit": "L",'
            ' "program": "Q0 -> A1 because F1, A1: 3360 L"}\n'
            '{"id": "b", "answer_value": 42}\n'
            '{"id": "c", "program": "Q0 -> A1 because F1, A1: 7"}\n'
        )
        preds = read_predictions(str(path))
        assert preds[0] == Prediction("a", 3360.0, "L", "Q0 -> A1 because F1, A1: 3360 L")
        assert preds[0].answer == parse_quantity("3360 L")
        assert preds[1] == Prediction("b", 42.0, "", None)
        assert preds[2].answer is None and preds[2].program is not None

    def test_header_line_is_tolerated(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text(
            '{"format": "fermi-task", "version": 1, "task": "full"}\n'
            '{"id": "a", "answer_value": 5}\n'
        )
        assert [p.id for p in read_predictions(str(path))] == ["a"]

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text('{"id": "a", "answer_value": 1}\n{"id": "a", "answer_value": 2}\n')
        with pytest.raises(SchemaError) as exc:
            read_predictions(str(path))
        assert exc.value.line == 2

    def test_unknown_answer_unit_degrades_to_dimensionless(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text('{"id": "a", "answer_value": 7, "answer_unit": "blorps"}\n')
        assert read_predictions(str(path))[0].answer == parse_quantity("7")

    @pytest.mark.parametrize(
        "line, needle",
        [
            ('{"id": "a", "answer_value": true}', "answer_value"),
            ('{"id": "a", "answer_value": "big"}', "answer_value"),
            ('{"id": "a", "answer_unit": "L"}', "answer_unit given without"),
            ('{"id": "a"}', "at least one"),
            ('{"id": "a", "program": 3}', "program"),
        ],
    )
    def test_malformed_lines_rejected(self, tmp_path, line, needle):
        path = tmp_path / "pred.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(SchemaError) as exc:
            read_predictions(str(path))
        assert needle in exc.value.reason
