"""Staffing margin and flexibility gates used to exclude exceptional data.

Days where the ratio of available to required staff falls below a
threshold, and staff members whose leave-request load makes them
inflexible for a month, are excluded from constraint mining: the
assignments made under those conditions are coping behaviour, not policy.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    ConfigError,
    DemandTable,
    MonthId,
    OFF_CODE,
    RequestSet,
    Roster,
    WEEKDAY_TOKENS,
)


def as_fraction(value) -> Fraction:
    """Exact rational from int/str/Fraction; floats go through repr so that
    e.g. 0.15 means 3/20, not its binary approximation."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class MarginProfile:
    """Per-day availability vs. requirement for one month."""

    month: MonthId
    available: tuple[int, ...]
    required: tuple[int, ...]

    def margin(self, day: int) -> Fraction:
        return Fraction(self.available[day - 1], self.required[day - 1])

    def margins(self) -> tuple[Fraction, ...]:
        return tuple(self.margin(d) for d in self.month.days())

    def gated_days(self, tau_u: Fraction) -> tuple[int, ...]:
        """Days excluded from mining: margin strictly below the threshold."""
        return tuple(d for d in self.month.days() if self.margin(d) < tau_u)

    def window_passes(self, days, tau_u: Fraction) -> bool:
        """A multi-day window passes only if every day clears the threshold
        (equivalently, the minimum margin over the window does)."""
        return all(self.margin(d) >= tau_u for d in days)


@dataclass(frozen=True)
class FlexibilityScore:
    """How freely a staff member could be scheduled in one month."""

    staff: str
    month: MonthId
    requested_leave: int
    assigned_days: int

    @property
    def never_assigned(self) -> bool:
        return self.assigned_days == 0

    @property
    def score(self) -> Fraction | None:
        """1 - requested/assigned; undefined for never-assigned staff."""
        if self.never_assigned:
            return None
        return 1 - Fraction(self.requested_leave, self.assigned_days)

    def passes(self, tau_f: Fraction) -> bool:
        score = self.score
        return score is not None and score >= tau_f


def staffing_margin(month: MonthId, requests: RequestSet, demand: DemandTable,
                    staff: set[str] | frozenset[str] | tuple[str, ...]) -> MarginProfile:
    """Availability is headcount minus leave requests; requirement comes from
    the demand table summed over shifts for the day's weekday."""
    n_staff = len(set(staff))
    available = []
    required = []
    for day in month.days():
        token = month.weekday_token(day)
        r_d = demand.total_required(token)
        if r_d <= 0:
            raise ConfigError(
                f"demand table requires no staff on {token} ({month} day {day})"
            )
        available.append(n_staff - requests.leave_count_on(day))
        required.append(r_d)
    return MarginProfile(month, tuple(available), tuple(required))


def flexibility(staff_id: str, month: MonthId, requests: RequestSet,
                roster: Roster) -> FlexibilityScore:
    assigned = roster.assigned_days(staff_id)  # raises if staff unknown
    requested = requests.leave_days(staff_id)
    return FlexibilityScore(staff_id, month, requested, assigned)


def eligibles(staff, month: MonthId, requests: RequestSet, roster: Roster,
              tau_f: Fraction) -> frozenset[str]:
    """Staff whose flexibility clears tau_f; never-assigned staff are out."""
    tau_f = as_fraction(tau_f)
    return frozenset(
        sid for sid in staff
        if flexibility(sid, month, requests, roster).passes(tau_f)
    )


def bootstrap_demand(rosters) -> DemandTable:
    """Fallback requirement table when the facility's is not configured:
    the per-(weekday, shift) minimum of historically staffed counts, the
    most conservative observable proxy for the true requirement."""
    minima: dict[tuple[str, str], int] = {}
    codes = sorted({c for r in rosters for c in r.codes_used() if c != OFF_CODE})
    for roster in rosters:
        for day in roster.month.days():
            token = roster.month.weekday_token(day)
            for code in codes:
                count = roster.headcount(day, code)
                key = (token, code)
                if key not in minima or count < minima[key]:
                    minima[key] = count
    rows = {key: count for key, count in minima.items() if count > 0}
    if not rows:
        raise ConfigError("cannot bootstrap demand: no staffed shifts in history")
    return DemandTable(rows)


def render_margin_report(profile: MarginProfile, tau_u: Fraction) -> str:
    """Audit CSV: day, available, required, margin, gated yes/no."""
    tau_u = as_fraction(tau_u)
    out = _io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["day", "available", "required", "margin", "gated"])
    for day in profile.month.days():
        u = profile.margin(day)
        writer.writerow([
            day,
            profile.available[day - 1],
            profile.required[day - 1],
            f"{float(u):.4f}",
            "yes" if u < tau_u else "no",
        ])
    return out.getvalue()
