"""Constraint templates and the mining pipeline over historical rosters.

Four template families drive extraction:

  T1  shift pattern over n consecutive days, per staff member (specific)
  T2  shift pattern over n consecutive days, any staff member (general)
  T3  monthly occurrence count of each shift, per staff member
  T4  per-weekday headcount of each shift, across all staff

Mining slides a window over each training month, collects keyed
observations into a multiset, totals them per month, and finally turns
per-month totals into constraints: patterns are kept when their mean
monthly occurrence clears a frequency threshold, counts become
[min, max] bounds.  Windows touching low-margin days and staff below the
flexibility threshold contribute nothing when exclusion is enabled.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
import math

from .margins import as_fraction, bootstrap_demand, eligibles, staffing_margin
from .model import (
    DataError,
    DemandTable,
    MonthId,
    OFF_CODE,
    ParseError,
    RequestSet,
    Roster,
    weekday_index,
)

MONTH = "MONTH"  # duration sentinel for whole-month count templates

T1, T2, T3, T4 = "T1", "T2", "T3", "T4"


class UnsupportedTemplateError(DataError):
    """Template fields name a collection branch that does not exist."""


class Scope:
    ONE = "one"
    ALL = "all"


class Generality:
    SPECIFIC = "specific"
    GENERAL = "general"


class ExtractionKind:
    PATTERN = "pattern"
    COUNT = "count"


class Normalization:
    UNIT = "unit"
    WEEKDAY = "weekday"


@dataclass(frozen=True)
class ConstraintTemplate:
    """One parameterized mining query."""

    family: str
    duration: int | str  # day count, or MONTH
    scope: str
    kind: str
    generality: str
    count_target: str | None = None  # None means every shift; COUNT only
    normalization: str | None = None  # COUNT only

    def window_length(self, month: MonthId) -> int:
        return month.last_day if self.duration == MONTH else int(self.duration)


@dataclass(frozen=True)
class AggregationKey:
    """Identity under which observations aggregate across months.

    Keys never embed the month or window position; specific keys carry the
    staff id, general keys do not.  The payload is the shift sequence for
    patterns, (shift,) for per-staff counts, (weekday, shift) for demand.
    """

    staff: str | None
    payload: tuple[str, ...]


@dataclass
class ObservationMultiset:
    """Multiset of (key, weight) pairs; union is commutative addition."""

    entries: Counter = field(default_factory=Counter)

    def add(self, key: AggregationKey, weight: Fraction, times: int = 1) -> None:
        if weight < 0:
            raise DataError("observation weights must be non-negative")
        self.entries[(key, weight)] += times

    def union(self, other: "ObservationMultiset") -> "ObservationMultiset":
        return ObservationMultiset(self.entries + other.entries)

    def keys(self) -> set[AggregationKey]:
        return {key for (key, _w) in self.entries}

    def __len__(self) -> int:
        return sum(self.entries.values())

    def __eq__(self, other) -> bool:
        return isinstance(other, ObservationMultiset) and self.entries == other.entries


@dataclass(frozen=True)
class MonthlySummary:
    """Per-key monthly totals accumulated over processed months."""

    totals: dict[AggregationKey, tuple[Fraction, ...]] = field(default_factory=dict)
    months_seen: int = 0

    @classmethod
    def empty(cls) -> "MonthlySummary":
        return cls({}, 0)

    def bump_month(self) -> "MonthlySummary":
        return MonthlySummary(self.totals, self.months_seen + 1)


@dataclass(frozen=True)
class MinedConstraint:
    """A pattern key or a count key with [lower, upper] bounds."""

    template: str
    duration: int | str
    key: AggregationKey
    lower: int | None = None
    upper: int | None = None

    def __post_init__(self) -> None:
        if self.is_pattern:
            if self.upper is not None:
                raise DataError("pattern constraints carry no bounds")
            if self.duration != MONTH and len(self.key.payload) != self.duration:
                raise DataError(
                    f"pattern length {len(self.key.payload)} != duration {self.duration}"
                )
        else:
            if self.upper is None or self.lower is None:
                raise DataError("count constraints need both bounds")
            if not 0 <= self.lower <= self.upper:
                raise DataError(f"bad count bounds ({self.lower}, {self.upper})")

    @property
    def is_pattern(self) -> bool:
        return self.lower is None


ONE = Fraction(1)


def build_templates(n_min: int, n_max: int, shifts) -> list[ConstraintTemplate]:
    """T1 and T2 per pattern length, one T3, and one T4 per working shift.

    ``shifts`` lists the ShiftSymbols to derive demand templates from; Off
    is skipped (an off-duty headcount is not a staffing requirement).
    """
    if n_min < 2:
        raise DataError("pattern durations below 2 days carry no sequence information")
    if n_min > n_max:
        raise DataError(f"n_min {n_min} exceeds n_max {n_max}")
    templates: list[ConstraintTemplate] = []
    for n in range(n_min, n_max + 1):
        templates.append(ConstraintTemplate(T1, n, Scope.ONE, ExtractionKind.PATTERN,
                                            Generality.SPECIFIC))
        templates.append(ConstraintTemplate(T2, n, Scope.ONE, ExtractionKind.PATTERN,
                                            Generality.GENERAL))
    templates.append(ConstraintTemplate(T3, MONTH, Scope.ONE, ExtractionKind.COUNT,
                                        Generality.SPECIFIC,
                                        count_target=None,
                                        normalization=Normalization.UNIT))
    codes = sorted(s.code for s in shifts if s.code != OFF_CODE)
    for code in codes:
        templates.append(ConstraintTemplate(T4, 1, Scope.ALL, ExtractionKind.COUNT,
                                            Generality.GENERAL,
                                            count_target=code,
                                            normalization=Normalization.WEEKDAY))
    return templates


def normalize(kind: str, weekday: int, headcount: int, month: MonthId) -> Fraction:
    """UNIT passes the headcount through; WEEKDAY divides by how often the
    weekday occurs in the month, so monthly totals become per-occurrence
    averages."""
    if kind == Normalization.UNIT:
        return Fraction(headcount)
    if kind == Normalization.WEEKDAY:
        return Fraction(headcount, month.weekday_occurrences(weekday))
    raise UnsupportedTemplateError(f"unknown normalization {kind!r}")


def compose_key(template: ConstraintTemplate, staff: str | None,
                payload: tuple[str, ...]) -> AggregationKey:
    if template.generality == Generality.SPECIFIC:
        if staff is None:
            raise UnsupportedTemplateError("specific templates need a staff id")
        return AggregationKey(staff, payload)
    return AggregationKey(None, payload)


def collect(template: ConstraintTemplate, eligible, shifts, roster: Roster,
            window: range) -> ObservationMultiset:
    """One window's observations, per the template's collection branch."""
    obs = ObservationMultiset()
    days = list(window)
    month = roster.month
    if template.kind == ExtractionKind.PATTERN:
        if template.scope != Scope.ONE:
            raise UnsupportedTemplateError("pattern templates scan one staff at a time")
        for sid in sorted(eligible):
            row = roster.row(sid)
            sequence = tuple(row[d - 1] for d in days)
            obs.add(compose_key(template, sid, sequence), ONE)
        return obs
    if template.kind == ExtractionKind.COUNT:
        for day in days:
            if template.scope == Scope.ONE:
                for sid in sorted(eligible):
                    code = roster.cell(sid, day)
                    obs.add(compose_key(template, sid, (code,)), ONE)
            elif template.scope == Scope.ALL:
                weekday = month.weekday(day)
                token = month.weekday_token(day)
                targets = sorted(shifts) if template.count_target is None \
                    else [template.count_target]
                for code in targets:
                    headcount = sum(
                        1 for sid in eligible if roster.cell(sid, day) == code
                    )
                    weight = normalize(template.normalization, weekday, headcount, month)
                    obs.add(compose_key(template, None, (token, code)), weight)
            else:
                raise UnsupportedTemplateError(f"unknown scope {template.scope!r}")
        return obs
    raise UnsupportedTemplateError(f"unknown extraction kind {template.kind!r}")


def reduce_month(month_obs: ObservationMultiset,
                 running: MonthlySummary) -> MonthlySummary:
    """Total each key's weighted observations for the month and append the
    total to the running per-key series; existing entries are preserved."""
    monthly: dict[AggregationKey, Fraction] = {}
    for (key, weight), multiplicity in month_obs.entries.items():
        monthly[key] = monthly.get(key, Fraction(0)) + multiplicity * weight
    totals = dict(running.totals)
    for key, value in monthly.items():
        totals[key] = totals.get(key, ()) + (value,)
    return MonthlySummary(totals, running.months_seen)


def reduce_final(template: ConstraintTemplate, summary: MonthlySummary,
                 tau_c, zero_fill=None) -> set[MinedConstraint]:
    """Patterns survive when their mean monthly occurrence reaches tau_c;
    counts become floor/ceil bounds of the per-month totals.

    ``zero_fill`` (count templates only) lists keys that should exist even
    if never observed; such keys get explicit 0..0 bounds, which is how a
    staff member's unworkable shifts surface as constraints.
    """
    if summary.months_seen < 1:
        raise DataError("reduce_final needs at least one processed month")
    tau_c = as_fraction(tau_c)
    out: set[MinedConstraint] = set()
    if template.kind == ExtractionKind.PATTERN:
        for key, values in summary.totals.items():
            mean = sum(values, Fraction(0)) / summary.months_seen
            if mean >= tau_c:
                out.add(MinedConstraint(template.family, template.duration, key))
        return out
    for key, values in summary.totals.items():
        lower = math.floor(min(values))
        upper = math.ceil(max(values))
        out.add(MinedConstraint(template.family, template.duration, key,
                                lower=lower, upper=upper))
    if zero_fill:
        seen = set(summary.totals)
        for key in zero_fill:
            if key not in seen:
                out.add(MinedConstraint(template.family, template.duration, key,
                                        lower=0, upper=0))
    return out


@dataclass(frozen=True)
class ExtractionParams:
    """Mining thresholds; defaults match the reference configuration."""

    n_min: int = 2
    n_max: int = 7
    tau_u: Fraction = Fraction(5, 4)
    tau_c: Fraction = Fraction(3, 20)
    tau_f: Fraction = Fraction(1, 2)

    def normalized(self) -> "ExtractionParams":
        return ExtractionParams(
            self.n_min, self.n_max,
            as_fraction(self.tau_u), as_fraction(self.tau_c), as_fraction(self.tau_f),
        )


def extract_constraints(rosters, requests, demand: DemandTable | None,
                        params: ExtractionParams = ExtractionParams(),
                        exclusion_enabled: bool = True,
                        alphabet=None) -> frozenset[MinedConstraint]:
    """Run the full mining loop over the training corpus.

    ``requests`` maps months to request sets (missing months mean none
    were filed).  With exclusion disabled, the margin and flexibility
    gates pass everything; the frequency threshold still applies.
    """
    from .model import Alphabet

    rosters = sorted(rosters, key=lambda r: r.month)
    if not rosters:
        raise DataError("no training rosters")
    months = {r.month for r in rosters}
    if len(months) != len(rosters):
        raise DataError("duplicate training months")
    if isinstance(requests, dict):
        request_map = dict(requests)
    else:
        request_map = {q.month: q for q in requests}
    for month in request_map:
        if month not in months:
            raise DataError(f"requests for {month} have no matching roster")
    params = params.normalized()

    codes = sorted({c for r in rosters for c in r.codes_used()})
    if alphabet is None:
        alphabet = Alphabet.from_codes(codes)
    symbols = [alphabet[c] for c in codes]

    if demand is None:
        demand = bootstrap_demand(rosters)

    # Month-level gates are template-independent; compute them once.
    per_month = []
    for roster in rosters:
        month = roster.month
        reqs = request_map.get(month) or RequestSet.empty(month)
        if exclusion_enabled:
            ok_staff = eligibles(roster.staff, month, reqs, roster, params.tau_f)
            profile = staffing_margin(month, reqs, demand, set(roster.staff))
            day_ok = tuple(profile.margin(d) >= params.tau_u for d in month.days())
        else:
            ok_staff = frozenset(roster.staff)
            day_ok = tuple(True for _ in month.days())
        per_month.append((roster, ok_staff, day_ok))

    templates = build_templates(params.n_min, params.n_max, symbols)
    mined: set[MinedConstraint] = set()
    for template in templates:
        summary = MonthlySummary.empty()
        zero_fill: set[AggregationKey] = set()
        for roster, ok_staff, day_ok in per_month:
            month = roster.month
            summary = summary.bump_month()
            n_eff = template.window_length(month)
            month_obs = ObservationMultiset()
            for start in range(1, month.last_day - n_eff + 2):
                window = range(start, start + n_eff)
                if not all(day_ok[d - 1] for d in window):
                    continue
                month_obs = month_obs.union(
                    collect(template, ok_staff, [c for c in codes], roster, window)
                )
                if template.family == T3:
                    zero_fill.update(
                        AggregationKey(sid, (code,))
                        for sid in ok_staff for code in codes
                    )
            summary = reduce_month(month_obs, summary)
        mined |= reduce_final(template, summary, params.tau_c,
                              zero_fill=zero_fill if template.family == T3 else None)
    return frozenset(mined)


# ---------------------------------------------------------------------------
# Serialization: the line shapes mirror mined-constraint listings, grouped
# by template family so lines stay unambiguous.

_T3_SPAN = "1, 31"  # whole-month marker in count lines


def render_mined(constraint: MinedConstraint) -> str:
    key = constraint.key
    if constraint.template == T1:
        return f"({key.staff}, {', '.join(key.payload)})"
    if constraint.template == T2:
        return f"({', '.join(key.payload)})"
    if constraint.template == T3:
        return (f"({key.staff}, {key.payload[0]}, {_T3_SPAN}, "
                f"{constraint.lower}, {constraint.upper})")
    if constraint.template == T4:
        token, code = key.payload
        if constraint.lower == constraint.upper:
            return f'("{token}", {code}, {constraint.lower})'
        return f'("{token}", {code}, {constraint.lower}, {constraint.upper})'
    raise DataError(f"unknown template {constraint.template!r}")


def _sort_key(constraint: MinedConstraint):
    return (
        constraint.template,
        constraint.duration if isinstance(constraint.duration, int) else 0,
        constraint.key.staff or "",
        constraint.key.payload,
    )


def render_mined_file(constraints) -> str:
    """Deterministic text dump, one section per template family."""
    by_family: dict[str, list[MinedConstraint]] = {T1: [], T2: [], T3: [], T4: []}
    for c in constraints:
        by_family[c.template].append(c)
    lines = []
    for family in (T1, T2, T3, T4):
        lines.append(f"# {family}")
        for c in sorted(by_family[family], key=_sort_key):
            lines.append(render_mined(c))
    return "\n".join(lines) + "\n"


def _split_tuple_line(line: str) -> list[str]:
    body = line.strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise ParseError(f"expected a parenthesized line, got {line!r}")
    parts = [p.strip() for p in body[1:-1].split(",")]
    if any(not p for p in parts):
        raise ParseError(f"empty field in {line!r}")
    return parts


def parse_mined_line(line: str, family: str) -> MinedConstraint:
    parts = _split_tuple_line(line)
    if family == T1:
        if len(parts) < 3:
            raise ParseError(f"T1 line needs staff plus >=2 shifts: {line!r}")
        staff, payload = parts[0], tuple(parts[1:])
        return MinedConstraint(T1, len(payload), AggregationKey(staff, payload))
    if family == T2:
        if len(parts) < 2:
            raise ParseError(f"T2 line needs >=2 shifts: {line!r}")
        payload = tuple(parts)
        return MinedConstraint(T2, len(payload), AggregationKey(None, payload))
    if family == T3:
        if len(parts) != 6:
            raise ParseError(f"T3 line needs 6 fields: {line!r}")
        staff, code = parts[0], parts[1]
        lower, upper = int(parts[4]), int(parts[5])
        return MinedConstraint(T3, MONTH, AggregationKey(staff, (code,)),
                               lower=lower, upper=upper)
    if family == T4:
        if len(parts) not in (3, 4):
            raise ParseError(f"T4 line needs 3 or 4 fields: {line!r}")
        token = parts[0].strip('"')
        weekday_index(token)  # validates
        code = parts[1]
        lower = int(parts[2])
        upper = int(parts[3]) if len(parts) == 4 else lower
        return MinedConstraint(T4, 1, AggregationKey(None, (token, code)),
                               lower=lower, upper=upper)
    raise ParseError(f"unknown template section {family!r}")


def parse_mined_file(text: str) -> frozenset[MinedConstraint]:
    family: str | None = None
    out: set[MinedConstraint] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            name = line[1:].strip()
            if name not in (T1, T2, T3, T4):
                raise ParseError(f"line {lineno}: unknown section {name!r}")
            family = name
            continue
        if family is None:
            raise ParseError(f"line {lineno}: constraint before any template section")
        out.add(parse_mined_line(line, family))
    return frozenset(out)
