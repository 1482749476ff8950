"""One binary for the whole toolkit.

Subcommands cover the pipeline end to end: `program check`/`program exec`
for explanation programs, `gen` for synthetic datasets, `tasks build` for
the three challenge views, `score` for prediction files, `kb validate`
for knowledge bases, and `baseline constant` for the no-model baseline.

Exit codes are a stable contract: 0 success, 1 validation failures in the
inputs, 2 usage errors, 3 I/O errors. Human diagnostics go to stderr;
`--errors-json` swaps stdout for one JSON array of {where, kind, message}
objects so harnesses never scrape prose. Everything seeded is a pure
function of its flags; `--jobs` changes wall time, never output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .baselines import constant_sweep, render_sweep_text
from .errors import FermiError
from .executor import run_program_text
from .kb import load_kb, validate_kb_file
from .metrics import (
    QuestionScore,
    aggregate,
    render_report_text,
    report_to_json,
    score_prediction,
)
from .synthgen import generate_dataset
from .tasks import (
    ANSWER_KEY_FORMAT,
    RECORDS_FORMAT,
    SPLITS,
    TASKS,
    build_task,
    read_answer_key,
    read_predictions,
    read_records,
    sniff_format,
    write_answer_key,
    write_records,
    write_task_file,
)
from .units import format_quantity_display

# spec'd task numbers; order matches TASKS
_TASK_BY_NUMBER = dict(enumerate(TASKS, start=1))


class _Run:
    """Per-invocation error collector and output router."""

    def __init__(self, errors_json: bool):
        self.errors_json = errors_json
        self.errors: list[dict] = []

    def error(self, where: str, kind: str, message: str) -> None:
        self.errors.append({"where": where, "kind": kind, "message": message})

    def say(self, text: str) -> None:
        if not self.errors_json:
            print(text)

    def emit(self, text: str) -> None:
        if not self.errors_json:
            sys.stdout.write(text)

    def finish(self, code: int) -> int:
        if self.errors_json:
            print(json.dumps(self.errors))
        else:
            for err in self.errors:
                print(
                    f"error[{err['kind']}] {err['where']}: {err['message']}",
                    file=sys.stderr,
                )
        return code


def _split_programs(text: str) -> list[str]:
    """Chunks of a program file; programs are separated by bare --- lines."""
    chunks: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == "---":
            chunks.append([])
        else:
            chunks[-1].append(line)
    return ["\n".join(c) for c in chunks if any(line.strip() for line in c)]


def _read_programs(path: str, run: _Run) -> list[str] | None:
    with open(path, encoding="utf-8") as fh:
        chunks = _split_programs(fh.read())
    if not chunks:
        run.error(path, "empty", "no programs found (separate programs with --- lines)")
        return None
    return chunks


def _cmd_program_check(args: argparse.Namespace, run: _Run) -> int:
    chunks = _read_programs(args.file, run)
    if chunks is None:
        return 1
    bad = 0
    for i, chunk in enumerate(chunks, start=1):
        result = run_program_text(chunk)
        if result.ok:
            run.say(f"program {i}: valid")
        else:
            bad += 1
            err = result.error
            run.say(f"program {i}: invalid ({err.kind.value} at {err.location})")
            run.error(f"{args.file}#program{i}", err.kind.value, err.message)
    run.say(f"{len(chunks) - bad}/{len(chunks)} valid")
    return 1 if bad else 0


def _cmd_program_exec(args: argparse.Namespace, run: _Run) -> int:
    chunks = _read_programs(args.file, run)
    if chunks is None:
        return 1
    mode = "strict" if args.strict_units else "lenient"
    failed = 0
    for i, chunk in enumerate(chunks, start=1):
        result = run_program_text(chunk, mode=mode)
        for note in result.warnings:
            print(f"warning: {note}", file=sys.stderr)
        if result.ok:
            if args.trace:
                for qid, value in result.trace:
                    run.say(f"# {qid} = {format_quantity_display(value)}")
            run.say(format_quantity_display(result.value))
        else:
            failed += 1
            err = result.error
            run.error(
                f"{args.file}#program{i}",
                err.kind.value,
                f"{err.location}: {err.message}",
            )
    return 1 if failed else 0


def _score_item(item) -> QuestionScore:
    pred_answer, pred_program, gold_answer, gold_fact_ids = item
    return score_prediction(pred_answer, pred_program, gold_answer, gold_fact_ids)


def _score_all(items: list, jobs: int) -> list[QuestionScore]:
    if jobs > 1 and len(items) > 1:
        chunksize = max(1, len(items) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_score_item, items, chunksize=chunksize))
    return [_score_item(item) for item in items]


def _f1_text(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _cmd_score(args: argparse.Namespace, run: _Run) -> int:
    task = _TASK_BY_NUMBER[args.task]
    kind = sniff_format(args.gold)
    # rows: (id, gold answer, gold fact ids or None, split or None), id-sorted
    rows: list[tuple] = []
    if kind == RECORDS_FORMAT:
        if task == "distractor_context":
            run.error(
                args.gold,
                "usage",
                "task 2 scoring needs the answer key from `tasks build` "
                "(its fact ids are renumbered), not the records file",
            )
            return 2
        for r in read_records(args.gold):
            gold_ids = frozenset(r.fact_ids()) if task == "perfect_context" else None
            rows.append((r.id, r.answer, gold_ids, r.split))
    elif kind == ANSWER_KEY_FORMAT:
        key = read_answer_key(args.gold)
        if key.task != task:
            run.error(
                args.gold,
                "usage",
                f"answer key was built for {key.task!r}, scoring asked for {task!r}",
            )
            return 2
        for entry in key.entries.values():
            rows.append((entry.id, entry.answer, entry.gold_fact_ids, None))
    else:
        run.error(args.gold, "usage", "gold must be a fermi-records or fermi-answer-key file")
        return 2
    rows.sort(key=lambda row: row[0])

    preds = read_predictions(args.pred)
    by_id = {p.id: p for p in preds}
    known = {row[0] for row in rows}
    unresolved = 0
    for p in preds:
        if p.id not in known:
            unresolved += 1
            run.error(args.pred, "unresolvable_id", f"prediction id {p.id!r} is not in the gold file")

    items = []
    missing = 0
    for rid, answer, gold_ids, _split in rows:
        pred = by_id.get(rid)
        if pred is None:
            missing += 1
            items.append((None, None, answer, gold_ids))
        else:
            items.append((pred.answer, pred.program, answer, gold_ids))
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    scores = _score_all(items, jobs)

    reports = [aggregate(scores, "all")]
    if kind == RECORDS_FORMAT:
        for split in SPLITS:
            subset = [s for s, row in zip(scores, rows) if row[3] == split]
            if subset:
                reports.append(aggregate(subset, split))

    text = render_report_text(reports)
    payload = report_to_json(reports)
    if args.per_question:
        for (rid, _answer, _ids, _split), s in zip(rows, scores):
            text += (
                f"question {rid} answer {s.answer_score:.4f} validity {s.validity}"
                f" pans {s.pans_score:.4f} fact_f1 {_f1_text(s.fact_f1)}"
                f" {s.error_kind or 'ok'}\n"
            )
        payload["questions"] = [
            {
                "id": rid,
                "answer_score": s.answer_score,
                "validity": s.validity,
                "pans_score": s.pans_score,
                "fact_f1": s.fact_f1,
                "error_kind": s.error_kind,
                "notes": list(s.notes),
            }
            for (rid, _answer, _ids, _split), s in zip(rows, scores)
        ]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

    run.emit(text)
    if missing:
        run.say(f"note: {missing} gold records had no prediction and scored 0")
    return 1 if unresolved else 0


def _cmd_gen(args: argparse.Namespace, run: _Run) -> int:
    kb_path = args.kb or os.environ.get("FERMI_KB_PATH")
    if not kb_path:
        run.error("gen", "usage", "no KB given: pass --kb or set FERMI_KB_PATH")
        return 2
    kb = load_kb(kb_path)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    result = generate_dataset(
        kb, args.size, args.decompose_fraction, args.seed, jobs=jobs
    )
    os.makedirs(args.out, exist_ok=True)
    records_path = os.path.join(args.out, "records.jsonl")
    manifest_path = os.path.join(args.out, "manifest.json")
    write_records([g.record for g in result.records], records_path)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    run.say(f"wrote {len(result.records)} records to {records_path}")
    run.say(f"wrote manifest to {manifest_path}")
    return 0


def _cmd_tasks_build(args: argparse.Namespace, run: _Run) -> int:
    task = _TASK_BY_NUMBER[args.task]
    if task == "distractor_context" and args.seed is None:
        run.error("tasks build", "usage", "--seed is required for task 2 (the fact shuffle)")
        return 2
    records = read_records(args.records)
    if not records:
        run.error(args.records, "empty", "no records to build from")
        return 1
    instances = build_task(records, task, rng_seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    task_path = os.path.join(args.out, "task.jsonl")
    key_path = os.path.join(args.out, "answer-key.jsonl")
    write_task_file(instances, task_path)
    write_answer_key(instances, key_path)
    run.say(f"wrote {len(instances)} instances to {task_path}")
    run.say(f"wrote answer key to {key_path}")
    return 0


def _cmd_kb_validate(args: argparse.Namespace, run: _Run) -> int:
    diagnostics = validate_kb_file(args.file)
    if not diagnostics:
        kb = load_kb(args.file)
        run.say(f"ok: {len(kb)} objects")
        return 0
    for d in diagnostics:
        label = d.object_name or ""
        if d.attribute:
            label = f"{label}/{d.attribute}"
        message = f"{label}: {d.message}" if label else d.message
        run.error(f"{args.file}:{d.line}", d.kind, message)
    n = len(diagnostics)
    run.say(f"{n} problem{'s' if n != 1 else ''}")
    return 1


def _cmd_baseline_constant(args: argparse.Namespace, run: _Run) -> int:
    kind = sniff_format(args.gold)
    if kind == RECORDS_FORMAT:
        answers = [r.answer for r in read_records(args.gold)]
    elif kind == ANSWER_KEY_FORMAT:
        answers = [e.answer for e in read_answer_key(args.gold).entries.values()]
    else:
        run.error(args.gold, "usage", "gold must be a fermi-records or fermi-answer-key file")
        return 2
    result = constant_sweep(answers, grid_points_per_decade=args.points_per_decade)
    run.emit(render_sweep_text(result))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--errors-json",
        action="store_true",
        help="print a JSON array of errors to stdout instead of the usual output",
    )

    parser = argparse.ArgumentParser(
        prog="fermibench",
        description="Fermi problem toolkit: programs, scoring, generation, tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prog_p = sub.add_parser("program", help="check or execute explanation programs")
    prog_sub = prog_p.add_subparsers(dest="action", required=True)
    check_p = prog_sub.add_parser(
        "check", parents=[common], help="parse and validate; exit 0 iff all valid"
    )
    check_p.add_argument("file", help="program file; --- lines separate programs")
    check_p.set_defaults(handler=_cmd_program_check, command="program check")
    exec_p = prog_sub.add_parser(
        "exec", parents=[common], help="execute and print each answer with units"
    )
    exec_p.add_argument("file", help="program file; --- lines separate programs")
    exec_p.add_argument(
        "--strict-units",
        action="store_true",
        help="fail on dimension mismatches instead of warning",
    )
    exec_p.add_argument(
        "--trace", action="store_true", help="print every intermediate quantity"
    )
    exec_p.set_defaults(handler=_cmd_program_exec, command="program exec")

    score_p = sub.add_parser(
        "score", parents=[common], help="score a prediction file against gold"
    )
    score_p.add_argument("--task", type=int, choices=(1, 2, 3), required=True)
    score_p.add_argument("--gold", required=True, help="fermi-records or fermi-answer-key file")
    score_p.add_argument("--pred", required=True, help="prediction JSONL file")
    score_p.add_argument("--out", required=True, help="report path (JSON twin at <out>.json)")
    score_p.add_argument("--per-question", action="store_true")
    score_p.add_argument(
        "--jobs", type=int, default=None, help="worker processes (default: cpu count)"
    )
    score_p.set_defaults(handler=_cmd_score, command="score")

    gen_p = sub.add_parser(
        "gen", parents=[common], help="generate a synthetic dataset from a KB"
    )
    gen_p.add_argument("--kb", default=None, help="KB file (default: $FERMI_KB_PATH)")
    gen_p.add_argument("--size", type=int, required=True)
    gen_p.add_argument(
        "--decompose-fraction",
        type=float,
        default=0.5,
        help="fraction of records rewritten with a ratio step (default 0.5)",
    )
    gen_p.add_argument("--seed", type=int, required=True)
    gen_p.add_argument("--out", required=True, help="output directory")
    gen_p.add_argument(
        "--jobs", type=int, default=None, help="worker processes (default: cpu count)"
    )
    gen_p.set_defaults(handler=_cmd_gen, command="gen")

    tasks_p = sub.add_parser("tasks", help="build challenge task views")
    tasks_sub = tasks_p.add_subparsers(dest="action", required=True)
    build_p = tasks_sub.add_parser(
        "build", parents=[common], help="build task.jsonl and answer-key.jsonl"
    )
    build_p.add_argument("--task", type=int, choices=(1, 2, 3), required=True)
    build_p.add_argument("--in", dest="records", required=True, help="fermi-records file")
    build_p.add_argument("--seed", type=int, default=None, help="required for task 2")
    build_p.add_argument("--out", required=True, help="output directory")
    build_p.set_defaults(handler=_cmd_tasks_build, command="tasks build")

    kb_p = sub.add_parser("kb", help="knowledge base utilities")
    kb_sub = kb_p.add_subparsers(dest="action", required=True)
    validate_p = kb_sub.add_parser(
        "validate", parents=[common], help="report every problem in a KB file"
    )
    validate_p.add_argument("file")
    validate_p.set_defaults(handler=_cmd_kb_validate, command="kb validate")

    baseline_p = sub.add_parser("baseline", help="no-model baselines")
    baseline_sub = baseline_p.add_subparsers(dest="action", required=True)
    constant_p = baseline_sub.add_parser(
        "constant", parents=[common], help="sweep one constant answer over a log grid"
    )
    constant_p.add_argument("--gold", required=True)
    constant_p.add_argument("--points-per-decade", type=int, default=10)
    constant_p.set_defaults(handler=_cmd_baseline_constant, command="baseline constant")

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else (0 if code is None else 2)
    run = _Run(getattr(args, "errors_json", False))
    try:
        code = args.handler(args, run)
    except FermiError as exc:
        run.error(args.command, type(exc).__name__, str(exc))
        code = 1
    except ValueError as exc:
        run.error(args.command, "usage", str(exc))
        code = 2
    except OSError as exc:
        run.error(args.command, "io", str(exc))
        code = 3
    return run.finish(code)


if __name__ == "__main__":
    raise SystemExit(main())
