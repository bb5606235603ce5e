"""Variable specs, their value lattices, and value normalization.

Values travel through the package as strings.  A numeric lattice point is
rendered without trailing zeros ("0.5", "10"), a clock value as HH:MM:SS.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from typing import Union

from .errors import InvalidSpec, LatticeUndefined

# ---------------------------------------------------------------------------
# number and clock formatting


def format_number(d: Decimal | int) -> str:
    d = Decimal(d)
    if d == 0:
        return "0"
    return format(d.normalize(), "f")


def to_decimal(x: object) -> Decimal:
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float):
        return Decimal(repr(x))
    try:
        return Decimal(str(x).strip())
    except InvalidOperation as exc:
        raise InvalidSpec(f"not a number: {x!r}") from exc


def format_clock(seconds: int) -> str:
    if seconds < 0:
        raise InvalidSpec(f"negative clock time: {seconds}")
    h, rem = divmod(int(seconds), 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


_CLOCK_RE = re.compile(r"^(\d+):(\d{1,2})(?::(\d{1,2}))?$")


def parse_clock(text: str) -> int:
    """Seconds for "HH:MM:SS" or "MM:SS".  Raises InvalidSpec otherwise."""
    m = _CLOCK_RE.match(text.strip())
    if not m:
        raise InvalidSpec(f"not a clock time: {text!r}")
    a, b, c = m.groups()
    if c is None:
        return int(a) * 60 + int(b)
    return int(a) * 3600 + int(b) * 60 + int(c)


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class Segment:
    low: Decimal
    high: Decimal
    step: Decimal

    def __post_init__(self) -> None:
        for name in ("low", "high", "step"):
            object.__setattr__(self, name, to_decimal(getattr(self, name)))
        if self.step <= 0:
            raise InvalidSpec(f"segment step must be positive: {self}")
        if self.low > self.high:
            raise InvalidSpec(f"segment low exceeds high: {self}")
        if (self.high - self.low) % self.step != 0:
            raise InvalidSpec(f"segment span is not a multiple of its step: {self}")

    def points(self) -> list[Decimal]:
        n = int((self.high - self.low) / self.step)
        return [self.low + i * self.step for i in range(n + 1)]


def _check_segments(ranges: tuple[Segment, ...]) -> None:
    if not ranges:
        raise InvalidSpec("at least one range segment is required")
    for a, b in zip(ranges, ranges[1:]):
        if b.low < a.high:
            raise InvalidSpec(f"segments overlap or are unsorted: {a} then {b}")


@dataclass(frozen=True)
class DiscreteSpec:
    ordered_values: tuple[str, ...]
    cyclic: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "ordered_values", tuple(self.ordered_values))
        if not self.ordered_values:
            raise InvalidSpec("discrete spec needs at least one value")
        norm = [normalize_value(v) for v in self.ordered_values]
        if len(set(norm)) != len(norm):
            raise InvalidSpec(f"duplicate values after normalization: {self.ordered_values}")


@dataclass(frozen=True)
class ContinuousSpec:
    ranges: tuple[Segment, ...]
    unit: str = ""
    cyclic: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "ranges", tuple(r if isinstance(r, Segment) else Segment(*r) for r in self.ranges)
        )
        _check_segments(self.ranges)


@dataclass(frozen=True)
class TimeSpec:
    """Clock-valued variable; segment bounds and steps are whole seconds."""

    ranges: tuple[Segment, ...]
    cyclic: bool = True

    def __post_init__(self) -> None:
        segs = []
        for r in self.ranges:
            if not isinstance(r, Segment):
                low, high, step = r
                low = parse_clock(low) if isinstance(low, str) else low
                high = parse_clock(high) if isinstance(high, str) else high
                r = Segment(low, high, step)
            if any(x != x.to_integral_value() for x in (r.low, r.high, r.step)):
                raise InvalidSpec(f"time segments use whole seconds: {r}")
            segs.append(r)
        object.__setattr__(self, "ranges", tuple(segs))
        _check_segments(self.ranges)


@dataclass(frozen=True)
class InputBufferSpec:
    max_digits: int = 6

    def __post_init__(self) -> None:
        if not isinstance(self.max_digits, int) or self.max_digits <= 0:
            raise InvalidSpec(f"max_digits must be a positive integer: {self.max_digits!r}")


VariableSpec = Union[DiscreteSpec, ContinuousSpec, TimeSpec, InputBufferSpec]


def spec_kind(spec: VariableSpec) -> str:
    return {
        DiscreteSpec: "discrete",
        ContinuousSpec: "continuous",
        TimeSpec: "time",
        InputBufferSpec: "input_buffer",
    }[type(spec)]


def is_cyclic(spec: VariableSpec) -> bool:
    return getattr(spec, "cyclic", True)


# ---------------------------------------------------------------------------
# lattice


@lru_cache(maxsize=4096)
def value_lattice(spec: VariableSpec) -> tuple[str, ...]:
    """All values the variable can take, in neighbor order."""
    if isinstance(spec, DiscreteSpec):
        return spec.ordered_values
    if isinstance(spec, InputBufferSpec):
        raise LatticeUndefined("an input buffer has no finite value lattice")
    render = format_clock if isinstance(spec, TimeSpec) else format_number
    out: list[str] = []
    for seg in spec.ranges:
        for p in seg.points():
            v = render(int(p) if isinstance(spec, TimeSpec) else p)
            if not out or out[-1] != v:
                out.append(v)
    if len(set(out)) != len(out):
        raise InvalidSpec("lattice contains duplicate values")
    return tuple(out)


@lru_cache(maxsize=4096)
def _index_table(spec: VariableSpec) -> dict[str, int]:
    return {normalize_value(v): i for i, v in enumerate(value_lattice(spec))}


def lattice_index(spec: VariableSpec, value: str) -> int | None:
    """Position of ``value`` in the lattice (compared after normalization)."""
    return _index_table(spec).get(normalize_value(value))


def canonical_member(spec: VariableSpec, value: str) -> str | None:
    """The lattice spelling of ``value``, or None when it is not a member."""
    i = lattice_index(spec, value)
    return None if i is None else value_lattice(spec)[i]


def shift_value(spec: VariableSpec, current: str, offset: int) -> str:
    """Move ``offset`` lattice positions; wraps when cyclic, saturates otherwise."""
    lat = value_lattice(spec)
    i = lattice_index(spec, current)
    if i is None:
        raise InvalidSpec(f"{current!r} is not in the lattice")
    if is_cyclic(spec):
        return lat[(i + offset) % len(lat)]
    return lat[max(0, min(len(lat) - 1, i + offset))]


def next_value(state) -> str:
    """Lattice successor of ``state.current``."""
    return shift_value(state.spec, state.current, 1)


def prev_value(state) -> str:
    """Lattice predecessor of ``state.current``."""
    return shift_value(state.spec, state.current, -1)


# ---------------------------------------------------------------------------
# normalization

_TOKEN_RE = re.compile(r"(\d+:\d{1,2}(?::\d{1,2})?)|(-?\d+(?:\.\d+)?)")
_SPACE_RE = re.compile(r"\s+")


def _canon_token(clock: str, number: str) -> str:
    if clock:
        return format_clock(parse_clock(clock))
    return format_number(Decimal(number))


def normalize_value(v: object) -> str:
    """Canonical comparison form of a displayed value.

    Text is lowercased and trimmed.  When digits are present only the numeric
    tokens survive: clock tokens become HH:MM:SS (two-part tokens read as
    MM:SS) and plain numbers lose leading zeros and trailing fractional zeros.
    """
    s = _SPACE_RE.sub(" ", str(v).strip().lower())
    tokens = [_canon_token(c, n) for c, n in _TOKEN_RE.findall(s)]
    if tokens:
        return " ".join(tokens)
    return s


def values_equal(a: object, b: object) -> bool:
    return normalize_value(a) == normalize_value(b)
