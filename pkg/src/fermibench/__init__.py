"""Fermi problem toolkit: estimation programs, scoring, and dataset tooling.

The pieces fit together in pipeline order: `program` parses and renders
explanation programs, `executor` runs them to a quantity, `metrics` turns
answers and programs into scores, `kb` + `synthgen` manufacture synthetic
records from a knowledge base, `tasks` builds the three challenge views
and their files, `baselines` holds the no-model reference, and `cli` ties
it all to one binary. Everything seeded is reproducible from its inputs.
"""

from .baselines import ConstantSweepResult, constant_sweep, render_sweep_text
from .errors import FermiError, SchemaError
from .executor import (
    ErrorKind,
    ExecutionError,
    ExecutionResult,
    check_validity,
    execute,
    run_program_text,
)
from .kb import (
    Diagnostic,
    KbObject,
    KnowledgeBase,
    kb_from_entries,
    load_kb,
    sample_kb_path,
    save_kb,
    validate_kb_file,
)
from .metrics import (
    AggregateReport,
    QuestionScore,
    aggregate,
    fact_f1,
    fp_score,
    render_report_text,
    report_to_json,
    score_prediction,
)
from .program import (
    CompExpr,
    FactDecl,
    Identifier,
    MathExpr,
    Program,
    ProgramError,
    ProgramSyntaxError,
    QuestionDecl,
    ValueDecl,
    ValueRef,
    parse_program,
    render_program,
    used_fact_ids,
)
from .synthgen import (
    TEMPLATES,
    GeneratedRecord,
    GenerationResult,
    KbTooSmall,
    decompose,
    generate_dataset,
    instantiate,
)
from .tasks import (
    AnswerKey,
    AnswerKeyEntry,
    FermiRecord,
    Prediction,
    PrecomputedSimilarity,
    TaskInstance,
    TfidfIndex,
    build_task,
    read_answer_key,
    read_predictions,
    read_records,
    sniff_format,
    write_answer_key,
    write_records,
    write_task_file,
)
from .units import (
    Dimension,
    Quantity,
    UnitRegistry,
    format_quantity_display,
    load_registry_file,
    parse_quantity,
    render_quantity,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "AnswerKey",
    "AnswerKeyEntry",
    "CompExpr",
    "ConstantSweepResult",
    "Diagnostic",
    "Dimension",
    "ErrorKind",
    "ExecutionError",
    "ExecutionResult",
    "FactDecl",
    "FermiError",
    "FermiRecord",
    "GeneratedRecord",
    "GenerationResult",
    "Identifier",
    "KbObject",
    "KbTooSmall",
    "KnowledgeBase",
    "MathExpr",
    "PrecomputedSimilarity",
    "Prediction",
    "Program",
    "ProgramError",
    "ProgramSyntaxError",
    "Quantity",
    "QuestionDecl",
    "QuestionScore",
    "SchemaError",
    "TEMPLATES",
    "TaskInstance",
    "TfidfIndex",
    "UnitRegistry",
    "ValueDecl",
    "ValueRef",
    "aggregate",
    "build_task",
    "check_validity",
    "constant_sweep",
    "decompose",
    "execute",
    "fact_f1",
    "format_quantity_display",
    "fp_score",
    "generate_dataset",
    "instantiate",
    "kb_from_entries",
    "load_kb",
    "load_registry_file",
    "parse_program",
    "parse_quantity",
    "read_answer_key",
    "read_predictions",
    "read_records",
    "render_program",
    "render_quantity",
    "render_report_text",
    "render_sweep_text",
    "report_to_json",
    "run_program_text",
    "sample_kb_path",
    "save_kb",
    "score_prediction",
    "sniff_format",
    "used_fact_ids",
    "validate_kb_file",
    "write_answer_key",
    "write_records",
    "write_task_file",
]
