"""Core domain types: shift symbols, months, rosters, requests, demand.

A roster is a month-indexed grid mapping (staff, day) to exactly one
abstract shift symbol.  The abstract alphabet collapses a facility's
detailed shift codes into Off ("-"), a single day shift, and one night
shift per unit; night symbols keep their unit label because night work
spans two calendar days and must stay distinguishable per unit.

All types here are immutable after construction and safe to share.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction


class DataError(Exception):
    """Invalid input data (rosters, requests, demand, mappings)."""


class ParseError(DataError):
    """Malformed input file; message carries row/column context."""


class ConfigError(Exception):
    """Invalid or incomplete configuration."""


OFF_CODE = "-"

# Weekday tokens in demand files and mined demand constraints, indexed by
# date.weekday() (0 = Monday).
WEEKDAY_TOKENS = ("Mon.", "Tue.", "Wed.", "Thu.", "Fri.", "Sat.", "Sun.")

_TOKEN_INDEX = {token: i for i, token in enumerate(WEEKDAY_TOKENS)}


def weekday_index(token: str) -> int:
    """Map a weekday token like "Sun." to its 0=Monday index."""
    try:
        return _TOKEN_INDEX[token]
    except KeyError:
        raise DataError(f"unknown weekday token {token!r}") from None


class ShiftKind(Enum):
    OFF = "off"
    DAY = "day"
    NIGHT = "night"


@dataclass(frozen=True)
class ShiftSymbol:
    """One abstract shift code with its classification."""

    code: str
    kind: ShiftKind
    unit: str | None = None

    def __post_init__(self) -> None:
        if not self.code or "," in self.code or " " in self.code:
            raise DataError(f"invalid shift code {self.code!r}")
        if self.kind is ShiftKind.NIGHT and self.unit is None:
            raise DataError(f"night shift {self.code!r} needs a unit label")
        if self.kind is not ShiftKind.NIGHT and self.unit is not None:
            raise DataError(f"only night shifts carry a unit ({self.code!r})")
        if self.kind is ShiftKind.OFF and self.code != OFF_CODE:
            raise DataError(f"the Off symbol must be {OFF_CODE!r}, got {self.code!r}")


class Alphabet:
    """The set of abstract shift symbols a run works with."""

    def __init__(self, symbols: tuple[ShiftSymbol, ...] | list[ShiftSymbol]):
        self._symbols = tuple(symbols)
        self._by_code = {s.code: s for s in self._symbols}
        if len(self._by_code) != len(self._symbols):
            raise DataError("duplicate shift codes in alphabet")
        offs = [s for s in self._symbols if s.kind is ShiftKind.OFF]
        if len(offs) != 1:
            raise DataError("alphabet must contain exactly one Off symbol")

    @classmethod
    def from_codes(cls, codes) -> "Alphabet":
        """Classify bare codes: "-" is Off, *N night (unit = code), else day."""
        symbols = []
        for code in codes:
            if code == OFF_CODE:
                symbols.append(ShiftSymbol(code, ShiftKind.OFF))
            elif code.endswith("N"):
                symbols.append(ShiftSymbol(code, ShiftKind.NIGHT, unit=code))
            else:
                symbols.append(ShiftSymbol(code, ShiftKind.DAY))
        return cls(tuple(symbols))

    @property
    def symbols(self) -> tuple[ShiftSymbol, ...]:
        return self._symbols

    def codes(self) -> tuple[str, ...]:
        return tuple(s.code for s in self._symbols)

    def __contains__(self, code: str) -> bool:
        return code in self._by_code

    def __getitem__(self, code: str) -> ShiftSymbol:
        try:
            return self._by_code[code]
        except KeyError:
            raise DataError(f"unknown shift code {code!r}") from None

    def is_off(self, code: str) -> bool:
        return code == OFF_CODE

    def is_night(self, code: str) -> bool:
        return code in self._by_code and self._by_code[code].kind is ShiftKind.NIGHT

    def night_codes(self) -> tuple[str, ...]:
        return tuple(s.code for s in self._symbols if s.kind is ShiftKind.NIGHT)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self._symbols == other._symbols

    def __repr__(self) -> str:
        return f"Alphabet({', '.join(self.codes())})"


DEFAULT_ALPHABET = Alphabet.from_codes((OFF_CODE, "D", "1N", "2N"))

# Detailed facility codes collapsed to the abstract alphabet: both kinds of
# day off merge, unit day shifts merge to D, night start/end merge per unit.
DEFAULT_SHIFT_MAPPING = {
    "day off": OFF_CODE,
    "paid off": OFF_CODE,
    "1A": "D", "1B": "D", "1C": "D", "1D": "D", "1E": "D",
    "2A": "D", "2B": "D", "2C": "D", "2D": "D", "2E": "D",
    "1Ni": "1N", "1No": "1N",
    "2Ni": "2N", "2No": "2N",
}


@dataclass(frozen=True, order=True)
class MonthId:
    """A calendar month; days are numbered 1..last_day."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise DataError(f"month out of range: {self.month}")

    @property
    def last_day(self) -> int:
        return calendar.monthrange(self.year, self.month)[1]

    def days(self) -> range:
        return range(1, self.last_day + 1)

    def weekday(self, day: int) -> int:
        """0 = Monday, per the standard calendar."""
        if not 1 <= day <= self.last_day:
            raise DataError(f"day {day} out of range for {self}")
        return calendar.weekday(self.year, self.month, day)

    def weekday_token(self, day: int) -> str:
        return WEEKDAY_TOKENS[self.weekday(day)]

    def weekday_occurrences(self, weekday: int) -> int:
        """How many times the given weekday (0=Mon) occurs in this month."""
        return sum(1 for d in self.days() if self.weekday(d) == weekday)

    def next(self) -> "MonthId":
        if self.month == 12:
            return MonthId(self.year + 1, 1)
        return MonthId(self.year, self.month + 1)

    @classmethod
    def parse(cls, text: str) -> "MonthId":
        try:
            year_s, month_s = text.strip().split("-")
            return cls(int(year_s), int(month_s))
        except (ValueError, DataError):
            raise DataError(f"cannot parse month {text!r}; expected YYYY-MM") from None

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class Roster:
    """A fully populated staff x day grid of shift codes for one month."""

    month: MonthId
    staff: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.staff):
            raise DataError("one cell row per staff member required")
        seen = set()
        for sid in self.staff:
            if not sid:
                raise DataError("empty staff id")
            if sid in seen:
                raise DataError(f"duplicate staff id {sid!r}")
            seen.add(sid)
        width = self.month.last_day
        for sid, row in zip(self.staff, self.cells):
            if len(row) != width:
                raise DataError(
                    f"staff {sid}: {len(row)} cells, expected {width} for {self.month}"
                )
            for day0, code in enumerate(row):
                if not code:
                    raise DataError(f"empty cell at staff {sid}, day {day0 + 1}")
        object.__setattr__(self, "_index", {sid: i for i, sid in enumerate(self.staff)})

    @classmethod
    def from_rows(cls, month: MonthId, rows: dict[str, list[str] | tuple[str, ...]]) -> "Roster":
        staff = tuple(rows)
        cells = tuple(tuple(rows[s]) for s in staff)
        return cls(month, staff, cells)

    def row(self, staff_id: str) -> tuple[str, ...]:
        try:
            return self.cells[self._index[staff_id]]
        except KeyError:
            raise DataError(f"staff {staff_id!r} not in roster {self.month}") from None

    def cell(self, staff_id: str, day: int) -> str:
        return self.row(staff_id)[day - 1]

    def assigned_days(self, staff_id: str) -> int:
        """Days the staff member works (anything but Off)."""
        return sum(1 for code in self.row(staff_id) if code != OFF_CODE)

    def headcount(self, day: int, code: str) -> int:
        d = day - 1
        return sum(1 for row in self.cells if row[d] == code)

    def codes_used(self) -> set[str]:
        return {code for row in self.cells for code in row}


def abstract_roster(detailed: Roster, mapping: dict[str, str]) -> Roster:
    """Collapse a detailed-code roster cell-wise through the given mapping."""
    new_rows = []
    for sid, row in zip(detailed.staff, detailed.cells):
        new_row = []
        for day0, code in enumerate(row):
            try:
                new_row.append(mapping[code])
            except KeyError:
                raise DataError(
                    f"unmapped shift code {code!r} at staff {sid}, day {day0 + 1}"
                ) from None
        new_rows.append(tuple(new_row))
    return Roster(detailed.month, detailed.staff, tuple(new_rows))


@dataclass(frozen=True)
class Request:
    staff: str
    day: int
    symbol: str

    @property
    def is_leave(self) -> bool:
        return self.symbol == OFF_CODE


@dataclass(frozen=True)
class RequestSet:
    """Shift and leave requests filed for one month."""

    month: MonthId
    entries: tuple[Request, ...]
    _by_cell: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        by_cell = {}
        for req in self.entries:
            if not 1 <= req.day <= self.month.last_day:
                raise DataError(
                    f"request day {req.day} out of range for {self.month} (staff {req.staff})"
                )
            key = (req.staff, req.day)
            if key in by_cell:
                raise DataError(f"duplicate request for staff {req.staff}, day {req.day}")
            by_cell[key] = req
        object.__setattr__(self, "_by_cell", by_cell)

    @classmethod
    def empty(cls, month: MonthId) -> "RequestSet":
        return cls(month, ())

    @classmethod
    def of(cls, month: MonthId, entries) -> "RequestSet":
        return cls(month, tuple(Request(s, d, c) for s, d, c in entries))

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, staff: str, day: int) -> Request | None:
        return self._by_cell.get((staff, day))

    def leave_count_on(self, day: int) -> int:
        return sum(1 for req in self.entries if req.day == day and req.is_leave)

    def leave_days(self, staff: str) -> int:
        return sum(1 for req in self.entries if req.staff == staff and req.is_leave)


class DemandTable:
    """Required staff per (weekday, shift); the coverage targets of a facility."""

    def __init__(self, rows: dict[tuple[str, str], int]):
        for (token, code), count in rows.items():
            weekday_index(token)  # validates
            if count < 0:
                raise DataError(f"negative demand for ({token}, {code})")
        self._rows = dict(sorted(rows.items()))

    @property
    def rows(self) -> dict[tuple[str, str], int]:
        return dict(self._rows)

    def required(self, token: str, code: str) -> int:
        return self._rows.get((token, code), 0)

    def total_required(self, token: str) -> int:
        return sum(count for (t, _), count in self._rows.items() if t == token)

    def shifts(self) -> tuple[str, ...]:
        return tuple(sorted({code for (_, code) in self._rows}))

    def covers_weekday(self, token: str) -> bool:
        return any(t == token for (t, _) in self._rows)

    def __eq__(self, other) -> bool:
        return isinstance(other, DemandTable) and self._rows == other._rows

    def __repr__(self) -> str:
        return f"DemandTable({len(self._rows)} rows)"
