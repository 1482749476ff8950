"""Physical quantities, normalized to SI at the parsing boundary.

Everything numeric in this package flows through Quantity: a float magnitude
in SI base units plus a Dimension. A Dimension is a vector of nine integer
exponents: the seven SI base dimensions (length, mass, time, current,
temperature, amount of substance, luminous intensity) plus two independent
pseudo-dimensions, information (base unit: byte) and currency (base unit:
USD). Keeping information and currency as real dimensions means "how many
CDs hold a genome" style arithmetic cancels units the same way "litres per
bucket" does.

Modeling note: food energy (kcal, cal) is deliberately dimensionless. The
knowledge base stores calorie attributes as bare kcal counts, and programs
multiply them by dimensionless rates, so carrying an energy dimension would
poison every downstream product with J-exponents nobody reasons about. The
consequence is that cal and J do not interconvert here; that is a modeling
choice, not an oversight.

Unit expressions are products of registered tokens with optional integer
exponents: ``m**3``, ``kg*m**-3``, ``km h**-1``. Whitespace or ``*``
separates factors; a ``/`` turns every factor after it into a denominator
factor. Registries are immutable; extensions build a new registry (see
load_registry_file for the one-token-per-line file format).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import FermiError


class UnitError(FermiError):
    """Base for unit and quantity errors."""


class UnparsableNumber(UnitError):
    """Text where a quantity was expected does not start with a number."""


class UnknownUnit(UnitError):
    """A unit token is not in the registry."""


class DimensionMismatch(UnitError):
    """Add/sub of quantities whose dimensions differ (strict mode)."""


class DivisionByZero(UnitError):
    """Division by a quantity with magnitude exactly zero."""


class NonFiniteResult(UnitError):
    """An arithmetic result overflowed to inf or produced NaN."""


# Storage order of the exponent vector. Render order differs (see below) so
# that density comes out as kg*m**-3 rather than m**-3*kg.
AXES = (
    "length",
    "mass",
    "time",
    "current",
    "temperature",
    "amount",
    "luminosity",
    "information",
    "currency",
)

_BASE_TOKENS = ("m", "kg", "s", "A", "K", "mol", "cd", "B", "USD")
_RENDER_ORDER = (1, 0, 2, 3, 4, 5, 6, 7, 8)


@dataclass(frozen=True)
class Dimension:
    """Integer exponents over the nine axes, in AXES order."""

    exponents: tuple[int, int, int, int, int, int, int, int, int] = (0,) * 9

    def __mul__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __truediv__(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def __pow__(self, power: int) -> "Dimension":
        return Dimension(tuple(a * power for a in self.exponents))

    @property
    def is_dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def si_unit(self) -> str:
        """Canonical SI unit string, e.g. "kg*m**-3"; "" when dimensionless."""
        parts = []
        for axis in _RENDER_ORDER:
            e = self.exponents[axis]
            if e == 0:
                continue
            tok = _BASE_TOKENS[axis]
            parts.append(tok if e == 1 else f"{tok}**{e}")
        return "*".join(parts)


def _base(axis: str) -> Dimension:
    exps = [0] * 9
    exps[AXES.index(axis)] = 1
    return Dimension(tuple(exps))


DIMENSIONLESS = Dimension()
LENGTH = _base("length")
MASS = _base("mass")
TIME = _base("time")
CURRENT = _base("current")
TEMPERATURE = _base("temperature")
AMOUNT = _base("amount")
LUMINOSITY = _base("luminosity")
INFORMATION = _base("information")
CURRENCY = _base("currency")
AREA = LENGTH**2
VOLUME = LENGTH**3
SPEED = LENGTH / TIME
DENSITY = MASS / VOLUME


@dataclass(frozen=True, eq=False)
class Quantity:
    """A finite magnitude in SI base units plus a Dimension.

    source_unit remembers how the value was written ("L", "ft**3") purely
    for display; it never participates in equality or arithmetic semantics.
    Equality compares dimensions exactly and magnitudes to REL_TOL relative
    tolerance, which makes Quantity unhashable by design.
    """

    magnitude: float
    dimension: Dimension = DIMENSIONLESS
    source_unit: str | None = None

    REL_TOL = 1e-9

    def __post_init__(self) -> None:
        if not isinstance(self.magnitude, (int, float)):
            raise TypeError(f"magnitude must be a number, got {type(self.magnitude).__name__}")
        object.__setattr__(self, "magnitude", float(self.magnitude))
        if not math.isfinite(self.magnitude):
            raise NonFiniteResult(f"quantity magnitude must be finite, got {self.magnitude!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Quantity):
            return NotImplemented
        return self.dimension == other.dimension and math.isclose(
            self.magnitude, other.magnitude, rel_tol=self.REL_TOL, abs_tol=0.0
        )

    def __ne__(self, other: object) -> bool:
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    __hash__ = None  # type: ignore[assignment]

    @property
    def is_dimensionless(self) -> bool:
        return self.dimension.is_dimensionless

    def __mul__(self, other: "Quantity | float") -> "Quantity":
        return quantity_arith("mul", self, _as_quantity(other))

    def __rmul__(self, other: "Quantity | float") -> "Quantity":
        return quantity_arith("mul", _as_quantity(other), self)

    def __truediv__(self, other: "Quantity | float") -> "Quantity":
        return quantity_arith("div", self, _as_quantity(other))

    def __add__(self, other: "Quantity | float") -> "Quantity":
        return quantity_arith("add", self, _as_quantity(other))

    def __sub__(self, other: "Quantity | float") -> "Quantity":
        return quantity_arith("sub", self, _as_quantity(other))

    def __repr__(self) -> str:
        unit = self.dimension.si_unit()
        body = f"{self.magnitude!r} {unit}".rstrip()
        return f"Quantity({body})"


def _as_quantity(value: "Quantity | float") -> Quantity:
    if isinstance(value, Quantity):
        return value
    return Quantity(float(value))


class UnitRegistry:
    """Immutable token -> (SI factor, Dimension) table."""

    def __init__(self, entries: dict[str, tuple[float, Dimension]]):
        for tok, (factor, _dim) in entries.items():
            if not _TOKEN_RE.fullmatch(tok):
                raise UnitError(f"invalid unit token {tok!r}")
            if not (math.isfinite(factor) and factor > 0):
                raise UnitError(f"unit {tok!r} must have a positive finite factor")
        self._entries = dict(entries)

    def __contains__(self, token: str) -> bool:
        return token in self._entries

    def tokens(self) -> tuple[str, ...]:
        return tuple(sorted(self._entries))

    def lookup(self, token: str) -> tuple[float, Dimension]:
        try:
            return self._entries[token]
        except KeyError:
            raise UnknownUnit(f"unknown unit {token!r}") from None

    def extended(self, entries: dict[str, tuple[float, Dimension]]) -> "UnitRegistry":
        """New registry with extra tokens; clobbering an existing token is an error."""
        merged = dict(self._entries)
        for tok, entry in entries.items():
            if tok in merged:
                raise UnitError(f"unit token {tok!r} is already defined")
            merged[tok] = entry
        return UnitRegistry(merged)

    def parse_unit(self, text: str) -> tuple[float, Dimension]:
        """Parse a unit expression into (SI factor, Dimension).

        Empty text means dimensionless with factor 1. Factors multiply;
        after a "/" every subsequent factor divides.
        """
        text = text.strip()
        if not text:
            return 1.0, DIMENSIONLESS
        factor = 1.0
        dim = DIMENSIONLESS
        denominator = False
        pos = 0
        first = True
        while pos < len(text):
            m = _UNIT_PART_RE.match(text, pos)
            if m is None:
                raise UnknownUnit(f"cannot parse unit expression {text!r} at offset {pos}")
            sep = m.group("sep")
            if first and sep is not None:
                raise UnknownUnit(f"unit expression {text!r} starts with {sep!r}")
            if sep == "/":
                denominator = True
            name = m.group("name")
            exp = int(m.group("exp")) if m.group("exp") is not None else 1
            if denominator:
                exp = -exp
            f, d = self.lookup(name)
            factor *= f**exp
            dim = dim * (d**exp)
            pos = m.end()
            first = False
        return factor, dim


_TOKEN_RE = re.compile(r"[A-Za-z$%]+")
_UNIT_PART_RE = re.compile(
    r"\s*(?P<sep>[*/])?\s*(?P<name>[A-Za-z$%]+)(?:\s*\*\*\s*(?P<exp>[+-]?\d+))?"
)
NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def _default_entries() -> dict[str, tuple[float, Dimension]]:
    e: dict[str, tuple[float, Dimension]] = {}

    def add(dim: Dimension, **tokens: float) -> None:
        for tok, factor in tokens.items():
            e[tok] = (factor, dim)

    add(LENGTH, m=1.0, km=1000.0, cm=0.01, mm=0.001, um=1e-6)
    add(LENGTH, ft=0.3048, yd=0.9144, mi=1609.344)
    e["in"] = (0.0254, LENGTH)  # "in" is a Python keyword, so not a kwarg
    add(MASS, kg=1.0, g=1e-3, mg=1e-6, t=1000.0, tonne=1000.0)
    add(MASS, lb=0.45359237, oz=0.028349523125)
    add(TIME, s=1.0, ms=1e-3, min=60.0, h=3600.0, hr=3600.0)
    add(TIME, day=86400.0, week=604800.0, month=2629800.0, year=31557600.0, yr=31557600.0)
    add(VOLUME, L=1e-3, l=1e-3, mL=1e-6, ml=1e-6, gal=0.003785411784)
    add(AREA, ha=1e4, acre=4046.8564224)
    add(CURRENT, A=1.0)
    add(TEMPERATURE, K=1.0)
    add(AMOUNT, mol=1.0)
    add(LUMINOSITY, cd=1.0)
    # Derived mechanical units, expressed in base exponents.
    add(MASS * LENGTH / TIME**2, N=1.0)
    add(MASS * AREA / TIME**2, J=1.0)
    add(MASS * AREA / TIME**3, W=1.0)
    add(MASS / (LENGTH * TIME**2), Pa=1.0)
    add(TIME**-1, Hz=1.0)
    # Food energy: dimensionless kcal counts by design (module docstring).
    add(DIMENSIONLESS, kcal=1.0, cal=1e-3)
    add(INFORMATION, B=1.0, byte=1.0, KB=1e3, MB=1e6, GB=1e9, TB=1e12)
    e["bit"] = (0.125, INFORMATION)
    add(CURRENCY, USD=1.0, usd=1.0, dollar=1.0, dollars=1.0)
    return e


DEFAULT_REGISTRY = UnitRegistry(_default_entries())


def load_registry_file(path: str, base: UnitRegistry | None = None) -> UnitRegistry:
    """Extend a registry from a text file, one token per line.

    Line format: ``token factor e1 e2 e3 e4 e5 e6 e7 e8 e9`` where the nine
    integers are Dimension exponents in AXES order (length, mass, time,
    current, temperature, amount, luminosity, information, currency).
    '#' starts a comment; blank lines are skipped.
    """
    base = base if base is not None else DEFAULT_REGISTRY
    entries: dict[str, tuple[float, Dimension]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 11:
                raise UnitError(
                    f"{path}:{lineno}: expected 'token factor' plus 9 exponents, got {len(parts)} fields"
                )
            tok = parts[0]
            try:
                factor = float(parts[1])
                exps = tuple(int(p) for p in parts[2:])
            except ValueError as exc:
                raise UnitError(f"{path}:{lineno}: {exc}") from None
            if tok in entries:
                raise UnitError(f"{path}:{lineno}: duplicate token {tok!r}")
            entries[tok] = (factor, Dimension(exps))
    return base.extended(entries)


def parse_quantity(
    text: str,
    registry: UnitRegistry | None = None,
    *,
    on_unknown_unit: str = "error",
    warnings: list[str] | None = None,
) -> Quantity:
    """Parse "number [units]" into an SI Quantity.

    on_unknown_unit: "error" raises UnknownUnit; "dimensionless" keeps the
    bare magnitude, records a note in `warnings`, and drops the unit text.
    """
    registry = registry if registry is not None else DEFAULT_REGISTRY
    stripped = text.strip()
    m = NUMBER_RE.match(stripped)
    if m is None:
        raise UnparsableNumber(f"expected a number at the start of {text!r}")
    value = float(m.group(0))
    unit_text = stripped[m.end() :].strip()
    if not unit_text:
        return Quantity(value)
    try:
        factor, dim = registry.parse_unit(unit_text)
    except UnknownUnit:
        if on_unknown_unit != "dimensionless":
            raise
        if warnings is not None:
            warnings.append(f"unknown unit {unit_text!r} treated as dimensionless")
        return Quantity(value)
    hint = " ".join(unit_text.split())
    return Quantity(value * factor, dim, source_unit=hint)


def quantity_arith(
    op: str,
    a: Quantity,
    b: Quantity,
    mode: str = "strict",
    warnings: list[str] | None = None,
) -> Quantity:
    """Combine two quantities under one of add/sub/mul/div.

    mul/div combine dimensions by exponent arithmetic. add/sub require equal
    dimensions in strict mode; lenient mode keeps the left operand's
    dimension and records a warning. Division by exact zero raises
    DivisionByZero; overflow raises NonFiniteResult.
    """
    if op in ("mul", "div"):
        if op == "div":
            if b.magnitude == 0.0:
                raise DivisionByZero("division by zero")
            mag = a.magnitude / b.magnitude
            dim = a.dimension / b.dimension
        else:
            mag = a.magnitude * b.magnitude
            dim = a.dimension * b.dimension
        hint = _combined_hint(a, b, dim)
    elif op in ("add", "sub"):
        if a.dimension != b.dimension:
            if mode == "strict":
                raise DimensionMismatch(
                    f"cannot {op} {a.dimension.si_unit() or 'dimensionless'} "
                    f"and {b.dimension.si_unit() or 'dimensionless'}"
                )
            if warnings is not None:
                warnings.append(
                    f"{op} of mismatched dimensions "
                    f"({a.dimension.si_unit() or '1'} vs {b.dimension.si_unit() or '1'}); "
                    "keeping the left operand's dimension"
                )
        mag = a.magnitude + b.magnitude if op == "add" else a.magnitude - b.magnitude
        dim = a.dimension
        hint = a.source_unit
    else:
        raise ValueError(f"unknown arithmetic op {op!r}")
    if not math.isfinite(mag):
        raise NonFiniteResult(f"{op} overflowed to {mag!r}")
    return Quantity(mag, dim, source_unit=hint)


def _combined_hint(a: Quantity, b: Quantity, result_dim: Dimension) -> str | None:
    # A product/quotient with a dimensionless side keeps the other side's
    # display hint; that is what lets 7 * (18 L) * 516 still print in L.
    if b.is_dimensionless and result_dim == a.dimension:
        return a.source_unit
    if a.is_dimensionless and result_dim == b.dimension:
        return b.source_unit
    return None


def format_magnitude(x: float) -> str:
    """Compact display form: 12 significant digits, no trailing float noise."""
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def render_quantity(q: Quantity) -> str:
    """Canonical SI text form, reparsable by parse_quantity."""
    unit = q.dimension.si_unit()
    mag = format_magnitude(q.magnitude)
    return f"{mag} {unit}" if unit else mag


def quantity_in_unit(q: Quantity, unit_text: str, registry: UnitRegistry | None = None) -> float:
    """Magnitude of q expressed in the given unit (must match q's dimension)."""
    registry = registry if registry is not None else DEFAULT_REGISTRY
    factor, dim = registry.parse_unit(unit_text)
    if dim != q.dimension:
        raise DimensionMismatch(
            f"cannot express {q.dimension.si_unit() or 'dimensionless'} in {unit_text!r}"
        )
    return q.magnitude / factor


def format_quantity_display(q: Quantity, registry: UnitRegistry | None = None) -> str:
    """Human-facing form: source unit first, SI canonical in parentheses.

    "65016 L (65.016 m**3)" when the value was written in litres; falls back
    to plain SI when there is no display hint or the hint is already
    canonical. Dimensionless values print as a bare number.
    """
    si = render_quantity(q)
    if q.is_dimensionless or not q.source_unit:
        return si
    if q.source_unit == q.dimension.si_unit():
        return si
    try:
        val = quantity_in_unit(q, q.source_unit, registry)
    except UnitError:
        return si
    return f"{format_magnitude(val)} {q.source_unit} ({si})"
