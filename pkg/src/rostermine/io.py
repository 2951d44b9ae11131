"""CSV ingestion and rendering for rosters, requests, demand and mappings.

File conventions:
  * roster CSV: header ``staff,1,2,...,L``; one row per staff member; every
    cell holds a shift code ("-" for Off, blanks rejected).  The month is
    not embedded; it comes from the filename (``YYYY-MM.csv``) or caller.
  * request CSV: header ``staff,day,symbol``.
  * demand CSV: header ``weekday,shift,count`` with weekday tokens
    "Mon."".."Sun.".
  * shift-mapping CSV: header ``detailed,abstract``.
"""

from __future__ import annotations

import csv
import io as _io
import re
from pathlib import Path

from .model import (
    DataError,
    DemandTable,
    MonthId,
    ParseError,
    Request,
    RequestSet,
    Roster,
    weekday_index,
)

_MONTH_FILE_RE = re.compile(r"(\d{4})-(\d{2})")


def month_from_filename(path: str | Path) -> MonthId:
    match = _MONTH_FILE_RE.search(Path(path).stem)
    if not match:
        raise ParseError(f"cannot infer month from filename {Path(path).name!r}")
    return MonthId(int(match.group(1)), int(match.group(2)))


def _rows_of(text: str) -> list[list[str]]:
    return [row for row in csv.reader(_io.StringIO(text))]


def parse_roster(text: str, month: MonthId) -> Roster:
    rows = _rows_of(text)
    if not rows:
        raise ParseError("empty roster file")
    header = [cell.strip() for cell in rows[0]]
    expected = ["staff"] + [str(d) for d in month.days()]
    if header != expected:
        raise ParseError(
            f"roster header mismatch for {month}: expected days 1..{month.last_day}"
        )
    staff: list[str] = []
    cells: list[tuple[str, ...]] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ParseError(f"line {lineno}: {len(row)} fields, expected {len(expected)}")
        sid = row[0].strip()
        if not sid:
            raise ParseError(f"line {lineno}: empty staff id")
        if sid in seen:
            raise ParseError(f"line {lineno}: duplicate staff id {sid!r}")
        seen.add(sid)
        values = []
        for day, cell in enumerate(row[1:], start=1):
            code = cell.strip()
            if not code:
                raise ParseError(f"empty cell at staff {sid}, day {day} (line {lineno})")
            values.append(code)
        staff.append(sid)
        cells.append(tuple(values))
    try:
        return Roster(month, tuple(staff), tuple(cells))
    except DataError as exc:
        raise ParseError(str(exc)) from None


def render_roster(roster: Roster) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["staff"] + [str(d) for d in roster.month.days()])
    for sid, row in zip(roster.staff, roster.cells):
        writer.writerow([sid, *row])
    return out.getvalue()


def parse_requests(text: str, month: MonthId) -> RequestSet:
    rows = _rows_of(text)
    entries: list[Request] = []
    start = 0
    if rows and [c.strip() for c in rows[0]] == ["staff", "day", "symbol"]:
        start = 1
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise ParseError(f"line {lineno}: expected staff,day,symbol")
        sid, day_s, code = (c.strip() for c in row)
        try:
            day = int(day_s)
        except ValueError:
            raise ParseError(f"line {lineno}: bad day {day_s!r}") from None
        if not sid or not code:
            raise ParseError(f"line {lineno}: empty field")
        entries.append(Request(sid, day, code))
    try:
        return RequestSet(month, tuple(entries))
    except DataError as exc:
        raise ParseError(str(exc)) from None


def render_requests(requests: RequestSet) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["staff", "day", "symbol"])
    for req in sorted(requests.entries, key=lambda r: (r.day, r.staff)):
        writer.writerow([req.staff, req.day, req.symbol])
    return out.getvalue()


def parse_demand(text: str) -> DemandTable:
    rows = _rows_of(text)
    table: dict[tuple[str, str], int] = {}
    start = 0
    if rows and [c.strip() for c in rows[0]] == ["weekday", "shift", "count"]:
        start = 1
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise ParseError(f"line {lineno}: expected weekday,shift,count")
        token, code, count_s = (c.strip() for c in row)
        try:
            weekday_index(token)
        except DataError:
            raise ParseError(f"line {lineno}: unknown weekday token {token!r}") from None
        try:
            count = int(count_s)
        except ValueError:
            raise ParseError(f"line {lineno}: bad count {count_s!r}") from None
        key = (token, code)
        if key in table:
            raise ParseError(f"line {lineno}: duplicate demand row for {key}")
        table[key] = count
    try:
        return DemandTable(table)
    except DataError as exc:
        raise ParseError(str(exc)) from None


def render_demand(table: DemandTable) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["weekday", "shift", "count"])
    for (token, code), count in table.rows.items():
        writer.writerow([token, code, count])
    return out.getvalue()


def parse_mapping(text: str) -> dict[str, str]:
    rows = _rows_of(text)
    start = 0
    if rows and [c.strip() for c in rows[0]] == ["detailed", "abstract"]:
        start = 1
    mapping: dict[str, str] = {}
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"line {lineno}: expected detailed,abstract")
        detailed, abstract = (c.strip() for c in row)
        if not detailed or not abstract:
            raise ParseError(f"line {lineno}: empty field")
        if detailed in mapping:
            raise ParseError(f"line {lineno}: duplicate mapping for {detailed!r}")
        mapping[detailed] = abstract
    return mapping


def render_mapping(mapping: dict[str, str]) -> str:
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["detailed", "abstract"])
    for detailed, abstract in sorted(mapping.items()):
        writer.writerow([detailed, abstract])
    return out.getvalue()


def load_roster(path: str | Path, month: MonthId | None = None) -> Roster:
    path = Path(path)
    if month is None:
        month = month_from_filename(path)
    return parse_roster(path.read_text(encoding="utf-8"), month)


def load_requests(path: str | Path, month: MonthId | None = None) -> RequestSet:
    path = Path(path)
    if month is None:
        month = month_from_filename(path)
    return parse_requests(path.read_text(encoding="utf-8"), month)


def load_rosters_dir(directory: str | Path) -> list[Roster]:
    """All ``YYYY-MM.csv`` rosters in a directory, sorted by month."""
    directory = Path(directory)
    rosters = [load_roster(p) for p in sorted(directory.glob("*.csv"))]
    if not rosters:
        raise DataError(f"no roster files in {directory}")
    return sorted(rosters, key=lambda r: r.month)


def load_requests_dir(directory: str | Path) -> dict[MonthId, RequestSet]:
    directory = Path(directory)
    out: dict[MonthId, RequestSet] = {}
    for path in sorted(directory.glob("*.csv")):
        req = load_requests(path)
        out[req.month] = req
    return out


def render_schedule(roster: Roster, objective: int | None, status: str,
                    trace_line: str | None = None) -> str:
    """Schedule CSV: roster grid plus trailing comment lines with metadata."""
    body = render_roster(roster)
    lines = [body.rstrip("\n")]
    lines.append(f"# status: {status}")
    if objective is not None:
        lines.append(f"# objective: {objective}")
    if trace_line is not None:
        lines.append(f"# {trace_line}")
    return "\n".join(lines) + "\n"


def parse_schedule(text: str, month: MonthId) -> tuple[Roster, dict[str, str]]:
    """Read a schedule CSV back: the grid and its trailing metadata."""
    grid_lines = []
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if line.startswith("#"):
            payload = line[1:].strip()
            if ":" in payload:
                key, value = payload.split(":", 1)
                meta[key.strip()] = value.strip()
            else:
                meta.setdefault("trace", payload)
        elif line.strip():
            grid_lines.append(line)
    roster = parse_roster("\n".join(grid_lines) + "\n", month)
    return roster, meta
