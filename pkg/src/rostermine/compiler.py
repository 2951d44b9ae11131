"""Translate mined constraints into solver-facing instances.

Hardness policy: per-staff patterns are soft (penalised per offending
window); all-staff patterns are hard; exact mined counts are soft with a
hard sibling widened by a slack of one (configurable and asymmetric for
demand rows).  Defaults add a hard one-shift-per-cell instance for every
(staff, day) and a hard pin per filed request.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from .model import ConfigError, DataError, MonthId, OFF_CODE, ParseError, RequestSet
from .templates import (
    MONTH,
    AggregationKey,
    MinedConstraint,
    T1,
    T2,
    T3,
    T4,
    parse_mined_line,
)


class Hardness(Enum):
    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class AllowedPatternSet:
    """Every length-n window of the scoped staff's row must match one of
    the allowed sequences; each non-matching window is one violation.
    ``staff`` None applies the set to every staff member's row."""

    staff: str | None
    length: int
    allowed: frozenset

    def __post_init__(self) -> None:
        for seq in self.allowed:
            if len(seq) != self.length:
                raise DataError(f"pattern {seq} does not have length {self.length}")


@dataclass(frozen=True)
class CountRange:
    """Monthly occurrences of a shift for one staff member must fall in
    [lower, upper]; ``shift`` None counts all working (non-Off) days."""

    staff: str
    shift: str | None
    lower: int
    upper: int

    def __post_init__(self) -> None:
        if not 0 <= self.lower <= self.upper:
            raise DataError(f"bad count range [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class DemandRange:
    """Daily headcount of a shift must fall in [lower, upper] on days
    matching the weekday token (every day when None); counted per day."""

    weekday: str | None
    shift: str
    lower: int
    upper: int

    def __post_init__(self) -> None:
        if not 0 <= self.lower <= self.upper:
            raise DataError(f"bad demand range [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class AssignExactlyOne:
    """Structural: the cell (staff, day) holds exactly one symbol."""

    staff: str
    day: int


@dataclass(frozen=True)
class RequestPin:
    """The cell (staff, day) must hold the requested symbol."""

    staff: str
    day: int
    symbol: str


Body = AllowedPatternSet | CountRange | DemandRange | AssignExactlyOne | RequestPin


@dataclass(frozen=True)
class ConstraintInstance:
    id: str
    hardness: Hardness
    body: Body
    weight: int = 1
    origin: str = "mined"  # mined | default | mirrored | manual
    template: str | None = None
    length: int | None = None  # pattern length, for the relaxation ladder

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise DataError("instance weights must be positive")


@dataclass(frozen=True)
class CompiledConstraints:
    hard: tuple[ConstraintInstance, ...]
    soft: tuple[ConstraintInstance, ...]

    def __len__(self) -> int:
        return len(self.hard) + len(self.soft)

    def instances(self) -> tuple[ConstraintInstance, ...]:
        return self.hard + self.soft


@dataclass(frozen=True)
class CompilePolicy:
    """Weights and slacks; mined exact counts stay soft, their hard
    siblings widen by the slack (clamped at zero below)."""

    pattern_weight: int = 1
    count_weight: int = 1
    demand_weight: int = 1
    request_weight: int = 1
    count_hard_slack: int = 1
    demand_slack_lower: int = 1
    demand_slack_upper: int = 1


def _pattern_groups(mined, manual):
    """Group pattern constraints into allowed sets keyed by
    (hardness, staff-or-None, length)."""
    groups: dict[tuple[Hardness, str | None, int], dict] = {}
    for hardness, constraint, origin in _pattern_stream(mined, manual):
        key = (hardness, constraint.key.staff, len(constraint.key.payload))
        group = groups.setdefault(key, {"sequences": set(), "origins": set()})
        group["sequences"].add(constraint.key.payload)
        group["origins"].add(origin)
    return groups


def _pattern_stream(mined, manual):
    for c in mined:
        if c.template == T1:
            yield Hardness.SOFT, c, "mined"
        elif c.template == T2:
            yield Hardness.HARD, c, "mined"
    for hardness, c in manual:
        if c.template in (T1, T2):
            yield hardness, c, "manual"


def compile_constraints(mined, month: MonthId, staff,
                        requests: RequestSet | None = None,
                        policy: CompilePolicy = CompilePolicy(),
                        manual=()) -> CompiledConstraints:
    """Build the full hard/soft instance sets for scheduling one month.

    ``manual`` holds (Hardness, MinedConstraint) pairs from a manual
    constraints file; they keep their stated hardness and exact bounds.
    """
    staff = tuple(staff)
    if requests is not None and requests.month != month:
        raise DataError(f"requests are for {requests.month}, not {month}")
    hard: list[ConstraintInstance] = []
    soft: list[ConstraintInstance] = []

    for (hardness, scope, length), group in sorted(
            _pattern_groups(mined, manual).items(),
            key=lambda item: (item[0][0].value, item[0][1] or "", item[0][2])):
        origin = "manual" if group["origins"] == {"manual"} else "mined"
        scope_tag = scope if scope is not None else "all"
        inst = ConstraintInstance(
            id=f"pat/{hardness.value}/{scope_tag}/len{length}",
            hardness=hardness,
            body=AllowedPatternSet(scope, length, frozenset(group["sequences"])),
            weight=policy.pattern_weight,
            origin=origin,
            template=T2 if scope is None else T1,
            length=length,
        )
        (hard if hardness is Hardness.HARD else soft).append(inst)

    for c in sorted((c for c in mined if c.template == T3),
                    key=lambda c: (c.key.staff or "", c.key.payload)):
        sid, code = c.key.staff, c.key.payload[0]
        soft.append(ConstraintInstance(
            id=f"T3/{sid}/{code}/soft", hardness=Hardness.SOFT,
            body=CountRange(sid, code, c.lower, c.upper),
            weight=policy.count_weight, template=T3,
        ))
        hard.append(ConstraintInstance(
            id=f"T3/{sid}/{code}/hard", hardness=Hardness.HARD,
            body=CountRange(sid, code,
                            max(0, c.lower - policy.count_hard_slack),
                            c.upper + policy.count_hard_slack),
            template=T3,
        ))

    for c in sorted((c for c in mined if c.template == T4),
                    key=lambda c: c.key.payload):
        token, code = c.key.payload
        soft.append(ConstraintInstance(
            id=f"T4/{token}/{code}/soft", hardness=Hardness.SOFT,
            body=DemandRange(token, code, c.lower, c.upper),
            weight=policy.demand_weight, template=T4,
        ))
        hard.append(ConstraintInstance(
            id=f"T4/{token}/{code}/hard", hardness=Hardness.HARD,
            body=DemandRange(token, code,
                             max(0, c.lower - policy.demand_slack_lower),
                             c.upper + policy.demand_slack_upper),
            template=T4,
        ))

    for hardness, c in manual:
        if c.template == T3:
            sid, code = c.key.staff, c.key.payload[0]
            inst = ConstraintInstance(
                id=f"manual/T3/{sid}/{code}/{hardness.value}", hardness=hardness,
                body=CountRange(sid, code, c.lower, c.upper),
                weight=policy.count_weight, origin="manual", template=T3,
            )
            (hard if hardness is Hardness.HARD else soft).append(inst)
        elif c.template == T4:
            token, code = c.key.payload
            inst = ConstraintInstance(
                id=f"manual/T4/{token}/{code}/{hardness.value}", hardness=hardness,
                body=DemandRange(token, code, c.lower, c.upper),
                weight=policy.demand_weight, origin="manual", template=T4,
            )
            (hard if hardness is Hardness.HARD else soft).append(inst)

    for sid in staff:
        for day in month.days():
            hard.append(ConstraintInstance(
                id=f"one/{sid}/{day}", hardness=Hardness.HARD,
                body=AssignExactlyOne(sid, day), origin="default",
            ))

    if requests is not None:
        for req in sorted(requests.entries, key=lambda r: (r.staff, r.day)):
            hard.append(ConstraintInstance(
                id=f"pin/{req.staff}/{req.day}", hardness=Hardness.HARD,
                body=RequestPin(req.staff, req.day, req.symbol),
                weight=policy.request_weight, origin="default",
            ))

    return CompiledConstraints(tuple(hard), tuple(soft))


@dataclass(frozen=True)
class NewStaffAttributes:
    feasible_shifts: frozenset
    working_days: int


class MirrorError(ConfigError):
    pass


def _donor_profile(compiled: CompiledConstraints):
    """Per-staff feasible shift sets and working-day midpoints, read off
    the soft count ranges (the mined exact bounds)."""
    profiles: dict[str, dict] = {}
    for inst in compiled.soft:
        body = inst.body
        if isinstance(body, CountRange) and body.shift is not None:
            entry = profiles.setdefault(body.staff, {"feasible": set(), "days": Fraction(0)})
            if body.shift != OFF_CODE and body.upper > 0:
                entry["feasible"].add(body.shift)
            if body.shift != OFF_CODE:
                entry["days"] += Fraction(body.lower + body.upper, 2)
    return profiles


def mirror_for_new_staff(compiled: CompiledConstraints, new_staff: str,
                         attributes: NewStaffAttributes) -> CompiledConstraints:
    """Clone the constraints of the most similarly positioned existing
    staff member: same feasible shifts, closest working-day target, ties
    broken toward the smallest staff id."""
    profiles = _donor_profile(compiled)
    wanted = set(attributes.feasible_shifts)
    candidates = [
        (abs(entry["days"] - attributes.working_days), sid)
        for sid, entry in profiles.items()
        if entry["feasible"] == wanted
    ]
    if not candidates:
        listing = "; ".join(
            f"{sid}: {{{', '.join(sorted(entry['feasible']))}}}"
            for sid, entry in sorted(profiles.items())
        )
        raise MirrorError(
            f"no existing staff works exactly {{{', '.join(sorted(wanted))}}}; "
            f"candidates: {listing}"
        )
    _, donor = min(candidates)

    def clone(inst: ConstraintInstance) -> ConstraintInstance | None:
        body = inst.body
        if isinstance(body, AllowedPatternSet) and body.staff == donor:
            new_body: Body = replace(body, staff=new_staff)
        elif isinstance(body, CountRange) and body.staff == donor:
            new_body = replace(body, staff=new_staff)
        else:
            return None
        return replace(inst, id=f"{inst.id}->{new_staff}", body=new_body,
                       origin="mirrored")

    new_hard = list(compiled.hard)
    new_soft = list(compiled.soft)
    for inst in compiled.hard:
        cloned = clone(inst)
        if cloned:
            new_hard.append(cloned)
    for inst in compiled.soft:
        cloned = clone(inst)
        if cloned:
            new_soft.append(cloned)
    return CompiledConstraints(tuple(new_hard), tuple(new_soft))


# ---------------------------------------------------------------------------
# Serialization of compiled instances and manual-constraint files.

def render_body(body: Body) -> str:
    if isinstance(body, AllowedPatternSet):
        scope = body.staff if body.staff is not None else "all"
        seqs = "; ".join(",".join(seq) for seq in sorted(body.allowed))
        return f"patterns scope={scope} len={body.length} {{{seqs}}}"
    if isinstance(body, CountRange):
        shift = body.shift if body.shift is not None else "ANY"
        return f"count staff={body.staff} shift={shift} in [{body.lower},{body.upper}]"
    if isinstance(body, DemandRange):
        token = body.weekday if body.weekday is not None else "*"
        return f"demand weekday={token} shift={body.shift} in [{body.lower},{body.upper}]"
    if isinstance(body, AssignExactlyOne):
        return f"exactly-one staff={body.staff} day={body.day}"
    if isinstance(body, RequestPin):
        return f"pin staff={body.staff} day={body.day} symbol={body.symbol}"
    raise DataError(f"unknown body {body!r}")


def render_compiled(compiled: CompiledConstraints) -> str:
    lines = [
        f"{inst.hardness.value}|{inst.origin}|{render_body(inst.body)}"
        for inst in compiled.instances()
    ]
    return "\n".join(lines) + "\n"


def parse_manual_file(text: str) -> list[tuple[Hardness, MinedConstraint]]:
    """Manual constraints: ``hardness|template|line`` per entry, reusing the
    mined-constraint line shapes."""
    out: list[tuple[Hardness, MinedConstraint]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected hardness|template|constraint")
        hardness_s, family, body = (p.strip() for p in parts)
        try:
            hardness = Hardness(hardness_s)
        except ValueError:
            raise ParseError(f"line {lineno}: unknown hardness {hardness_s!r}") from None
        out.append((hardness, parse_mined_line(body, family)))
    return out
