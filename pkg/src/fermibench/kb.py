"""Knowledge base of object attributes that powers synthetic generation.

File format: one attribute per line,

    object name | attribute | number unit | source note

Pipes are forbidden in names; '#' starts a comment line and blanks are
skipped. Attributes come from a fixed ten-kind vocabulary (length, area,
volume, weight, density, speed, time, data, cost, calories) with "mass"
and "information" accepted as aliases for weight and data. Every value
must parse in the unit registry, carry the dimension its attribute kind
demands, and be strictly positive. The same (object, attribute) pair may
appear only once.

Loaded KBs are immutable: objects plus a per-attribute index, shareable
across threads and hashable as content (content_hash) for manifests.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import FermiError, SchemaError
from .units import (
    AREA,
    CURRENCY,
    DENSITY,
    DIMENSIONLESS,
    INFORMATION,
    LENGTH,
    MASS,
    Quantity,
    SPEED,
    TIME,
    UnitError,
    UnitRegistry,
    VOLUME,
    parse_quantity,
)

ATTRIBUTE_DIMENSIONS = {
    "length": LENGTH,
    "area": AREA,
    "volume": VOLUME,
    "weight": MASS,
    "density": DENSITY,
    "speed": SPEED,
    "time": TIME,
    "data": INFORMATION,
    "cost": CURRENCY,
    "calories": DIMENSIONLESS,  # kcal counts; see units module docstring
}

ATTRIBUTE_ALIASES = {"mass": "weight", "information": "data"}


class DimensionError(FermiError):
    """Attribute value whose dimension does not fit its kind."""

    def __init__(self, object_name: str, attribute: str, detail: str):
        self.object_name = object_name
        self.attribute = attribute
        super().__init__(f"{object_name}/{attribute}: {detail}")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    kind: str  # "schema" | "dimension"
    object_name: str | None
    attribute: str | None
    message: str


@dataclass(frozen=True)
class KbObject:
    name: str
    attributes: dict  # attribute -> Quantity (SI)
    raw: dict  # attribute -> verbatim "number unit" text from the file
    sources: dict  # attribute -> source note


class KnowledgeBase:
    def __init__(self, objects: dict[str, KbObject]):
        self._objects = dict(objects)
        index: dict[str, set[str]] = {attr: set() for attr in ATTRIBUTE_DIMENSIONS}
        for obj in self._objects.values():
            for attr in obj.attributes:
                index[attr].add(obj.name)
        self._index = {attr: frozenset(names) for attr, names in index.items()}

    @property
    def objects(self) -> dict[str, KbObject]:
        return dict(self._objects)

    @property
    def index(self) -> dict[str, frozenset]:
        return dict(self._index)

    def __len__(self) -> int:
        return len(self._objects)

    def __contains__(self, name: str) -> bool:
        return name in self._objects

    def __getitem__(self, name: str) -> KbObject:
        return self._objects[name]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return self._objects == other._objects

    __hash__ = None  # type: ignore[assignment]

    def names_with(self, attribute: str) -> frozenset:
        return self._index.get(attribute, frozenset())

    def content_hash(self) -> str:
        """Hash of the logical content, independent of file formatting."""
        lines = []
        for name in sorted(self._objects):
            obj = self._objects[name]
            for attr in sorted(obj.attributes):
                lines.append(f"{name}|{attr}|{obj.raw[attr]}|{obj.sources[attr]}")
        digest = hashlib.sha256("\n".join(lines).encode("utf-8"))
        return digest.hexdigest()


def objects_with(kb: KnowledgeBase, attrs) -> set:
    """Names of objects that possess every attribute in attrs."""
    attrs = set(attrs)
    if not attrs:
        raise ValueError("attrs must be non-empty")
    result: set | None = None
    for attr in attrs:
        names = set(kb.names_with(attr))
        result = names if result is None else (result & names)
    return result


def scan_kb_text(
    text: str, registry: UnitRegistry | None = None
) -> tuple[list[tuple], list[Diagnostic]]:
    """Parse KB text into entries, collecting every problem as a Diagnostic.

    Entries are (name, attribute, quantity, raw_value_text, source) in file
    order. Used by both load_kb (first problem raises) and `kb validate`
    (all problems reported).
    """
    entries: list[tuple] = []
    diagnostics: list[Diagnostic] = []
    seen: set[tuple[str, str]] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            diagnostics.append(
                Diagnostic(
                    lineno,
                    "schema",
                    None,
                    None,
                    f"expected 4 pipe-separated fields (name | attribute | value | source), got {len(parts)}",
                )
            )
            continue
        name, attr_text, value_text, source = parts
        if not name:
            diagnostics.append(Diagnostic(lineno, "schema", None, None, "empty object name"))
            continue
        attr = attr_text.lower()
        attr = ATTRIBUTE_ALIASES.get(attr, attr)
        if attr not in ATTRIBUTE_DIMENSIONS:
            diagnostics.append(
                Diagnostic(lineno, "schema", name, attr_text, f"unknown attribute {attr_text!r}")
            )
            continue
        if (name, attr) in seen:
            diagnostics.append(
                Diagnostic(
                    lineno, "schema", name, attr, f"duplicate entry for {name!r} attribute {attr!r}"
                )
            )
            continue
        try:
            quantity = parse_quantity(value_text, registry)
        except UnitError as exc:
            diagnostics.append(Diagnostic(lineno, "schema", name, attr, str(exc)))
            continue
        want = ATTRIBUTE_DIMENSIONS[attr]
        if quantity.dimension != want:
            diagnostics.append(
                Diagnostic(
                    lineno,
                    "dimension",
                    name,
                    attr,
                    f"{attr} must have dimension {want.si_unit() or 'dimensionless'}, "
                    f"got {quantity.dimension.si_unit() or 'dimensionless'}",
                )
            )
            continue
        if quantity.magnitude <= 0:
            diagnostics.append(
                Diagnostic(lineno, "schema", name, attr, "magnitude must be strictly positive")
            )
            continue
        seen.add((name, attr))
        entries.append((name, attr, quantity, value_text, source))
    return entries, diagnostics


def _raise_first(diagnostics: list[Diagnostic]) -> None:
    first = diagnostics[0]
    if first.kind == "dimension":
        raise DimensionError(first.object_name or "?", first.attribute or "?", first.message)
    raise SchemaError(first.line, first.message)


def kb_from_entries(entries) -> KnowledgeBase:
    objects: dict[str, KbObject] = {}
    grouped: dict[str, tuple[dict, dict, dict]] = {}
    for name, attr, quantity, raw, source in entries:
        attrs, raws, sources = grouped.setdefault(name, ({}, {}, {}))
        attrs[attr] = quantity
        raws[attr] = raw
        sources[attr] = source
    for name, (attrs, raws, sources) in grouped.items():
        objects[name] = KbObject(name, attrs, raws, sources)
    return KnowledgeBase(objects)


def load_kb(path: str, registry: UnitRegistry | None = None) -> KnowledgeBase:
    """Load and validate a KB file; the first problem raises."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    entries, diagnostics = scan_kb_text(text, registry)
    if diagnostics:
        _raise_first(diagnostics)
    return kb_from_entries(entries)


def validate_kb_file(path: str, registry: UnitRegistry | None = None) -> list[Diagnostic]:
    """All diagnostics for a KB file (empty list means clean)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    _entries, diagnostics = scan_kb_text(text, registry)
    return diagnostics


def save_kb(kb: KnowledgeBase, path: str) -> None:
    """Write a KB back out; load(save(load(f))) == load(f)."""
    lines = []
    for name, obj in kb.objects.items():
        for attr in obj.attributes:
            lines.append(f"{name} | {attr} | {obj.raw[attr]} | {obj.sources[attr]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def sample_kb_path() -> str:
    """Path of the sample KB shipped with the package."""
    from importlib.resources import files

    return str(files("fermibench").joinpath("data/sample_kb.txt"))
