"""Monthly roster solver: zero hard violations, minimal soft violations.

The model is one symbol per (day, staff) cell.  Hard constraints must
hold exactly; the objective is the weighted count of soft violations.
The engine runs a depth-first branch-and-bound over cells in day-major
order with window/count/demand propagation; instances too large to
prove optimal within the node budget fall back to a seeded greedy
search with bounded backtracking plus a local polish, returning a
Feasible (not Optimal) schedule.  Every returned schedule is re-checked
by the same violation counters the brute-force oracle uses.

Tie-breaking: among equal-objective optima the lexicographically
smallest assignment wins, reading cells day-major and symbols in the
problem's shift order.

Production instances cover a whole month; ``days`` may shorten the
horizon so that exhaustive verification (the oracle's 20-cell limit)
has instances to work with.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from enum import Enum

from .compiler import (
    AllowedPatternSet,
    AssignExactlyOne,
    ConstraintInstance,
    CountRange,
    DemandRange,
    RequestPin,
)
from .model import MonthId, OFF_CODE, Roster


class SolverError(Exception):
    pass


class SolveStatus(Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


ORACLE_CELL_LIMIT = 20


@dataclass(frozen=True)
class ScheduleProblem:
    month: MonthId
    staff: tuple[str, ...]
    shifts: tuple[str, ...]
    hard: tuple[ConstraintInstance, ...]
    soft: tuple[ConstraintInstance, ...]
    days: int | None = None  # horizon; None schedules the full month
    time_budget: float = 60.0
    seed: int = 0
    node_budget: int = 200_000
    heuristic_restarts: int = 60
    heuristic_backtracks: int = 20_000
    polish_passes: int = 3

    def __post_init__(self) -> None:
        if OFF_CODE not in self.shifts:
            raise SolverError("the shift universe must include the Off symbol")
        if len(set(self.shifts)) != len(self.shifts):
            raise SolverError("duplicate shift symbols")
        if not self.staff:
            raise SolverError("no staff to schedule")
        if len(set(self.staff)) != len(self.staff):
            raise SolverError("duplicate staff ids")
        if self.days is not None and not 1 <= self.days <= self.month.last_day:
            raise SolverError(f"horizon {self.days} outside {self.month}")
        if self.time_budget <= 0:
            raise SolverError("time budget must be positive")

    @property
    def n_days(self) -> int:
        return self.month.last_day if self.days is None else self.days


@dataclass(frozen=True)
class Schedule:
    month: MonthId
    days: int
    staff: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...] | None
    objective: int | None
    status: SolveStatus
    explanation: str | None = None

    @property
    def ok(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL, SolveStatus.FEASIBLE)

    @property
    def roster(self) -> Roster | None:
        """Solution as a Roster; full-month schedules only."""
        if self.cells is None:
            return None
        if self.days != self.month.last_day:
            raise SolverError("partial-horizon schedules have no roster view")
        return Roster(self.month, self.staff, self.cells)


# ---------------------------------------------------------------------------
# Violation counting: the single code path shared by solve's re-check,
# the oracle, and check_violations.

def _count_in_row(row, shift: str | None) -> int:
    if shift is None:
        return sum(1 for c in row if c != OFF_CODE)
    return sum(1 for c in row if c == shift)


def _violations_on_rows(body, month: MonthId, n_days: int,
                        staff: tuple[str, ...], rows) -> int:
    index = {sid: i for i, sid in enumerate(staff)}
    if isinstance(body, AllowedPatternSet):
        if body.staff is None:
            targets = range(len(staff))
        else:
            if body.staff not in index:
                raise SolverError(f"pattern constraint names unknown staff {body.staff!r}")
            targets = [index[body.staff]]
        count = 0
        n = body.length
        for w in targets:
            row = rows[w]
            for start in range(0, n_days - n + 1):
                if tuple(row[start:start + n]) not in body.allowed:
                    count += 1
        return count
    if isinstance(body, CountRange):
        if body.staff not in index:
            raise SolverError(f"count constraint names unknown staff {body.staff!r}")
        c = _count_in_row(rows[index[body.staff]], body.shift)
        return 0 if body.lower <= c <= body.upper else 1
    if isinstance(body, DemandRange):
        count = 0
        for day in range(1, n_days + 1):
            if body.weekday is not None and month.weekday_token(day) != body.weekday:
                continue
            c = sum(1 for row in rows if row[day - 1] == body.shift)
            if not body.lower <= c <= body.upper:
                count += 1
        return count
    if isinstance(body, AssignExactlyOne):
        if body.staff not in index:
            raise SolverError(f"exactly-one names unknown staff {body.staff!r}")
        if not 1 <= body.day <= n_days:
            raise SolverError(f"exactly-one names day {body.day} outside the horizon")
        return 0  # structurally true in the grid representation
    if isinstance(body, RequestPin):
        if body.staff not in index:
            raise SolverError(f"pin names unknown staff {body.staff!r}")
        if not 1 <= body.day <= n_days:
            raise SolverError(f"pin names day {body.day} outside the horizon")
        return 0 if rows[index[body.staff]][body.day - 1] == body.symbol else 1
    raise SolverError(f"unknown constraint body {body!r}")


def instance_violations(instance: ConstraintInstance, roster: Roster) -> int:
    return _violations_on_rows(instance.body, roster.month, roster.month.last_day,
                               roster.staff, roster.cells)


def _dims_of(schedule_or_roster):
    if isinstance(schedule_or_roster, Roster):
        r = schedule_or_roster
        return r.month, r.month.last_day, r.staff, r.cells
    s = schedule_or_roster
    if s.cells is None:
        raise SolverError("schedule carries no assignment to check")
    return s.month, s.days, s.staff, s.cells


def check_violations(schedule_or_roster, instances) -> dict[str, int]:
    """Exact violation count per instance id, recomputed from the grid."""
    month, n_days, staff, cells = _dims_of(schedule_or_roster)
    return {
        inst.id: _violations_on_rows(inst.body, month, n_days, staff, cells)
        for inst in instances
    }


def hard_violation_total(schedule_or_roster, hard) -> int:
    month, n_days, staff, cells = _dims_of(schedule_or_roster)
    return sum(
        _violations_on_rows(inst.body, month, n_days, staff, cells)
        for inst in hard
    )


def soft_objective(schedule_or_roster, soft) -> int:
    month, n_days, staff, cells = _dims_of(schedule_or_roster)
    return sum(
        inst.weight * _violations_on_rows(inst.body, month, n_days, staff, cells)
        for inst in soft
    )


# ---------------------------------------------------------------------------
# Brute-force oracle.

def brute_force_oracle(problem: ScheduleProblem) -> Schedule:
    """True optimum by exhaustive enumeration; small instances only."""
    n_days, n_staff = problem.n_days, len(problem.staff)
    n_cells = n_days * n_staff
    if n_cells > ORACLE_CELL_LIMIT:
        raise SolverError(
            f"instance has {n_cells} cells; the oracle enumerates at most "
            f"{ORACLE_CELL_LIMIT}"
        )
    month, staff, shifts = problem.month, problem.staff, problem.shifts
    hard_bodies = [inst.body for inst in problem.hard]
    best_rows = None
    best_obj = None
    for assignment in itertools.product(range(len(shifts)), repeat=n_cells):
        rows = tuple(
            tuple(shifts[assignment[d * n_staff + w]] for d in range(n_days))
            for w in range(n_staff)
        )
        feasible = True
        for body in hard_bodies:
            if _violations_on_rows(body, month, n_days, staff, rows) > 0:
                feasible = False
                break
        if not feasible:
            continue
        obj = sum(
            inst.weight * _violations_on_rows(inst.body, month, n_days, staff, rows)
            for inst in problem.soft
        )
        if best_obj is None or obj < best_obj:
            best_obj = obj
            best_rows = rows
            if obj == 0:
                break
    if best_rows is None:
        return Schedule(month, n_days, staff, None, None, SolveStatus.INFEASIBLE,
                        "exhaustive enumeration found no hard-feasible assignment")
    return Schedule(month, n_days, staff, best_rows, best_obj, SolveStatus.OPTIMAL)


# ---------------------------------------------------------------------------
# The search engine.

class _Engine:
    def __init__(self, problem: ScheduleProblem):
        self.problem = problem
        self.month = problem.month
        self.staff = problem.staff
        self.shifts = problem.shifts
        self.n_days = problem.n_days
        self.n_staff = len(problem.staff)
        self.n_syms = len(problem.shifts)
        self.sym_index = {c: i for i, c in enumerate(problem.shifts)}
        self.off = self.sym_index[OFF_CODE]
        self.staff_index = {sid: i for i, sid in enumerate(problem.staff)}
        self.deadline = time.monotonic() + problem.time_budget
        self._compile()

    # -- problem compilation -------------------------------------------------

    def _sym(self, code: str) -> int:
        try:
            return self.sym_index[code]
        except KeyError:
            raise SolverError(f"constraint references unknown shift {code!r}") from None

    def _staff(self, sid: str) -> int:
        try:
            return self.staff_index[sid]
        except KeyError:
            raise SolverError(f"constraint references unknown staff {sid!r}") from None

    def _compile(self) -> None:
        W, D, S = self.n_staff, self.n_days, self.n_syms
        self.pins: dict[tuple[int, int], int] = {}
        self.pin_instances: dict[tuple[int, int], ConstraintInstance] = {}
        # Intersected hard count bounds per (staff, sym); None shift = ANY.
        self.cnt_lo = [[0] * S for _ in range(W)]
        self.cnt_hi = [[D] * S for _ in range(W)]
        self.any_lo = [0] * W
        self.any_hi = [D] * W
        self.count_sources: dict[tuple[int, int | None], list[ConstraintInstance]] = {}
        # Hard demand bounds per (day, sym).
        self.day_lo = [[0] * S for _ in range(D)]
        self.day_hi = [[W] * S for _ in range(D)]
        self.day_sources: dict[tuple[int, int], list[ConstraintInstance]] = {}
        # Pattern sets: per staff, merged per length.
        hard_global: dict[int, list[frozenset]] = {}
        hard_specific: dict[int, dict[int, list[frozenset]]] = {}
        self.soft_patterns = [[] for _ in range(W)]  # (n, allowed, weight)
        self.soft_counts = []  # (w, sym|None, lo, hi, weight)
        self.soft_demand_by_day = [[] for _ in range(D)]  # (sym, lo, hi, weight)
        self.soft_pins: dict[tuple[int, int], list[tuple[int, int]]] = {}

        def matching_days(body: DemandRange):
            for day in range(1, D + 1):
                if body.weekday is None or \
                        self.month.weekday_token(day) == body.weekday:
                    yield day

        for inst in self.problem.hard:
            body = inst.body
            if isinstance(body, RequestPin):
                w, d0, s = self._staff(body.staff), body.day - 1, self._sym(body.symbol)
                if not 0 <= d0 < D:
                    raise SolverError(f"pin day {body.day} outside the horizon")
                prior = self.pins.get((w, d0))
                if prior is not None and prior != s:
                    raise SolverError(
                        f"conflicting pins for staff {body.staff} day {body.day}"
                    )
                self.pins[(w, d0)] = s
                self.pin_instances[(w, d0)] = inst
            elif isinstance(body, CountRange):
                w = self._staff(body.staff)
                if body.shift is None:
                    self.any_lo[w] = max(self.any_lo[w], body.lower)
                    self.any_hi[w] = min(self.any_hi[w], body.upper)
                    self.count_sources.setdefault((w, None), []).append(inst)
                else:
                    s = self._sym(body.shift)
                    self.cnt_lo[w][s] = max(self.cnt_lo[w][s], body.lower)
                    self.cnt_hi[w][s] = min(self.cnt_hi[w][s], body.upper)
                    self.count_sources.setdefault((w, s), []).append(inst)
            elif isinstance(body, DemandRange):
                s = self._sym(body.shift)
                for day in matching_days(body):
                    d0 = day - 1
                    self.day_lo[d0][s] = max(self.day_lo[d0][s], body.lower)
                    self.day_hi[d0][s] = min(self.day_hi[d0][s], body.upper)
                    self.day_sources.setdefault((d0, s), []).append(inst)
            elif isinstance(body, AllowedPatternSet):
                allowed = frozenset(
                    tuple(self._sym(c) for c in seq) for seq in body.allowed
                )
                if body.staff is None:
                    hard_global.setdefault(body.length, []).append(allowed)
                else:
                    w = self._staff(body.staff)
                    hard_specific.setdefault(w, {}).setdefault(
                        body.length, []).append(allowed)
            elif isinstance(body, AssignExactlyOne):
                self._staff(body.staff)  # validates
            else:
                raise SolverError(f"unknown hard body {body!r}")

        for inst in self.problem.soft:
            body = inst.body
            if isinstance(body, AllowedPatternSet):
                allowed = frozenset(
                    tuple(self._sym(c) for c in seq) for seq in body.allowed
                )
                targets = range(W) if body.staff is None else [self._staff(body.staff)]
                for w in targets:
                    self.soft_patterns[w].append((body.length, allowed, inst.weight))
            elif isinstance(body, CountRange):
                w = self._staff(body.staff)
                s = None if body.shift is None else self._sym(body.shift)
                self.soft_counts.append((w, s, body.lower, body.upper, inst.weight))
            elif isinstance(body, DemandRange):
                s = self._sym(body.shift)
                for day in matching_days(body):
                    self.soft_demand_by_day[day - 1].append(
                        (s, body.lower, body.upper, inst.weight))
            elif isinstance(body, RequestPin):
                w, d0 = self._staff(body.staff), body.day - 1
                self.soft_pins.setdefault((w, d0), []).append(
                    (self._sym(body.symbol), inst.weight))
            elif isinstance(body, AssignExactlyOne):
                pass
            else:
                raise SolverError(f"unknown soft body {body!r}")

        # A window must belong to every hard set of its length: intersect.
        self.hard_sets: list[dict[int, frozenset]] = []
        for w in range(W):
            merged: dict[int, frozenset] = {}
            for n, sets in hard_global.items():
                inter = sets[0]
                for other in sets[1:]:
                    inter = inter & other
                merged[n] = inter
            for n, sets in hard_specific.get(w, {}).items():
                inter = merged.get(n)
                for other in sets:
                    inter = other if inter is None else inter & other
                merged[n] = inter
            self.hard_sets.append(merged)
        self.max_len = [max(sets) if sets else 0 for sets in self.hard_sets]
        self._live_cache: list[dict] = [dict() for _ in range(W)]
        self._next_cache: list[dict] = [dict() for _ in range(W)]

        # Soft-bound lookups used by the heuristic value ordering.
        self.soft_cnt_lo = [[None] * S for _ in range(W)]
        self.soft_cnt_hi = [[None] * S for _ in range(W)]
        for w, s, lo, hi, _weight in self.soft_counts:
            if s is not None:
                prev_lo = self.soft_cnt_lo[w][s]
                self.soft_cnt_lo[w][s] = lo if prev_lo is None else max(prev_lo, lo)
                prev_hi = self.soft_cnt_hi[w][s]
                self.soft_cnt_hi[w][s] = hi if prev_hi is None else min(prev_hi, hi)

    # -- presolve certificates ----------------------------------------------

    def presolve(self) -> str | None:
        W, D, S = self.n_staff, self.n_days, self.n_syms
        for (w, s), sources in self.count_sources.items():
            if s is None:
                lo, hi = self.any_lo[w], self.any_hi[w]
            else:
                lo, hi = self.cnt_lo[w][s], self.cnt_hi[w][s]
            if lo > hi:
                ids = ", ".join(i.id for i in sources)
                return f"contradictory hard count bounds for {self.staff[w]} ({ids})"
        for w in range(W):
            need = sum(self.cnt_lo[w])
            if need > D:
                return (f"staff {self.staff[w]}: hard count lower bounds need "
                        f"{need} days, horizon has {D}")
            cap = sum(self.cnt_hi[w][s] for s in range(S))
            if cap < D:
                return (f"staff {self.staff[w]}: hard count upper bounds admit "
                        f"only {cap} of {D} days")
        for (w, d0), s in self.pins.items():
            if self.cnt_hi[w][s] == 0:
                pin = self.pin_instances[(w, d0)].id
                culprit = ", ".join(
                    i.id for i in self.count_sources.get((w, s), []))
                return (f"pin {pin} requires shift {self.shifts[s]} but hard "
                        f"count bounds forbid it ({culprit})")
        for d0 in range(D):
            total_lo = sum(self.day_lo[d0])
            if total_lo > W:
                return (f"day {d0 + 1}: hard demand lower bounds need {total_lo} "
                        f"staff, roster has {W}")
            for s in range(S):
                lo = self.day_lo[d0][s]
                if lo == 0:
                    continue
                able = 0
                for w in range(W):
                    pin = self.pins.get((w, d0))
                    if pin is not None and pin != s:
                        continue
                    if self.cnt_hi[w][s] == 0:
                        continue
                    able += 1
                if able < lo:
                    sources = self.day_sources.get((d0, s), [])
                    ids = ", ".join(i.id for i in sources)
                    return (f"day {d0 + 1}: only {able} staff can take "
                            f"{self.shifts[s]}, {lo} required ({ids})")
        return None

    # -- hard pattern automaton ----------------------------------------------

    def _window_ok(self, w: int, suffix: tuple, s: int) -> bool:
        sets = self.hard_sets[w]
        if not sets:
            return True
        length = len(suffix) + 1
        for n, allowed in sets.items():
            if n <= length:
                window = suffix[length - n:] + (s,)
                if window not in allowed:
                    return False
        return True

    def allowed_next(self, w: int, suffix: tuple) -> tuple[int, ...]:
        cache = self._next_cache[w]
        hit = cache.get(suffix)
        if hit is None:
            hit = tuple(s for s in range(self.n_syms)
                        if self._window_ok(w, suffix, s))
            cache[suffix] = hit
        return hit

    def _advance(self, w: int, suffix: tuple, s: int) -> tuple:
        keep = self.max_len[w] - 1
        if keep <= 0:
            return ()
        return (suffix + (s,))[-keep:]

    def live(self, w: int, suffix: tuple, remaining: int) -> bool:
        """Can the staff row be extended `remaining` more days under the
        hard pattern sets?  Exact day-aware reachability, memoized."""
        if remaining <= 0 or not self.hard_sets[w]:
            return True
        cache = self._live_cache[w]
        key = (suffix, remaining)
        hit = cache.get(key)
        if hit is not None:
            return hit
        result = False
        for s in self.allowed_next(w, suffix):
            if self.live(w, self._advance(w, suffix, s), remaining - 1):
                result = True
                break
        cache[key] = result
        return result

    # -- shared search state -------------------------------------------------

    def new_state(self):
        W, D, S = self.n_staff, self.n_days, self.n_syms
        return {
            "rows": [[-1] * D for _ in range(W)],
            "suffix": [()] * W,
            "suffix_stack": [[] for _ in range(W)],
            "cnt": [[0] * S for _ in range(W)],
            "anycnt": [0] * W,
            "cnt_deficit": [sum(self.cnt_lo[w]) for w in range(W)],
            "any_deficit": [self.any_lo[w] for w in range(W)],
            "daycnt": [[0] * S for _ in range(D)],
            "day_deficit": [sum(self.day_lo[d]) for d in range(D)],
            "obj": 0,
        }

    def candidates(self, state, d0: int, w: int, filled_today: int) -> tuple[int, ...]:
        """Symbols that keep every hard constraint satisfiable at this cell."""
        pin = self.pins.get((w, d0))
        options = self.allowed_next(w, state["suffix"][w])
        if pin is not None:
            options = tuple(s for s in options if s == pin)
        out = []
        remaining_days = self.n_days - 1 - d0
        remaining_staff = self.n_staff - 1 - filled_today
        for s in options:
            if state["cnt"][w][s] + 1 > self.cnt_hi[w][s]:
                continue
            if s != self.off and state["anycnt"][w] + 1 > self.any_hi[w]:
                continue
            if state["daycnt"][d0][s] + 1 > self.day_hi[d0][s]:
                continue
            cnt_deficit = state["cnt_deficit"][w]
            if state["cnt"][w][s] < self.cnt_lo[w][s]:
                cnt_deficit -= 1
            if cnt_deficit > remaining_days:
                continue
            any_deficit = state["any_deficit"][w]
            if s != self.off and state["anycnt"][w] < self.any_lo[w]:
                any_deficit -= 1
            if any_deficit > remaining_days:
                continue
            day_deficit = state["day_deficit"][d0]
            if state["daycnt"][d0][s] < self.day_lo[d0][s]:
                day_deficit -= 1
            if day_deficit > remaining_staff:
                continue
            if not self.live(w, self._advance(w, state["suffix"][w], s),
                             remaining_days):
                continue
            out.append(s)
        return tuple(out)

    def assign(self, state, d0: int, w: int, s: int, last_in_day: bool) -> int:
        """Apply the assignment; returns the soft objective increment."""
        state["rows"][w][d0] = s
        if state["cnt"][w][s] < self.cnt_lo[w][s]:
            state["cnt_deficit"][w] -= 1
        state["cnt"][w][s] += 1
        if s != self.off:
            if state["anycnt"][w] < self.any_lo[w]:
                state["any_deficit"][w] -= 1
            state["anycnt"][w] += 1
        if state["daycnt"][d0][s] < self.day_lo[d0][s]:
            state["day_deficit"][d0] -= 1
        state["daycnt"][d0][s] += 1
        state["suffix_stack"][w].append(state["suffix"][w])
        delta = 0
        row = state["rows"][w]
        for n, allowed, weight in self.soft_patterns[w]:
            if n <= d0 + 1:
                window = tuple(row[d0 - n + 1:d0 + 1])
                if window not in allowed:
                    delta += weight
        for pin_s, weight in self.soft_pins.get((w, d0), ()):
            if s != pin_s:
                delta += weight
        if last_in_day:
            daycnt = state["daycnt"][d0]
            for sym, lo, hi, weight in self.soft_demand_by_day[d0]:
                if not lo <= daycnt[sym] <= hi:
                    delta += weight
        state["suffix"][w] = self._advance(w, state["suffix"][w], s)
        state["obj"] += delta
        return delta

    def unassign(self, state, d0: int, w: int, s: int, delta: int) -> None:
        state["obj"] -= delta
        state["suffix"][w] = state["suffix_stack"][w].pop()
        state["daycnt"][d0][s] -= 1
        if state["daycnt"][d0][s] < self.day_lo[d0][s]:
            state["day_deficit"][d0] += 1
        if s != self.off:
            state["anycnt"][w] -= 1
            if state["anycnt"][w] < self.any_lo[w]:
                state["any_deficit"][w] += 1
        state["cnt"][w][s] -= 1
        if state["cnt"][w][s] < self.cnt_lo[w][s]:
            state["cnt_deficit"][w] += 1
        state["rows"][w][d0] = -1

    def leaf_objective(self, state) -> int:
        extra = 0
        for w, s, lo, hi, weight in self.soft_counts:
            c = state["anycnt"][w] if s is None else state["cnt"][w][s]
            if not lo <= c <= hi:
                extra += weight
        return state["obj"] + extra

    def rows_to_cells(self, rows) -> tuple[tuple[str, ...], ...]:
        return tuple(tuple(self.shifts[s] for s in row) for row in rows)

    # -- exact branch and bound ----------------------------------------------

    def exact_search(self):
        """Lexicographic DFS with bounding.  Returns (best_rows, best_obj,
        completed); completed means the tree was exhausted (a proof)."""
        state = self.new_state()
        n_cells = self.n_days * self.n_staff
        last_w = self.n_staff - 1
        best_rows = None
        best_obj = None
        nodes = 0
        stack = []
        k = 0
        d0, w = 0, 0
        cands = self.candidates(state, d0, w, filled_today=w)
        idx = 0
        while True:
            advanced = False
            while idx < len(cands):
                s = cands[idx]
                idx += 1
                nodes += 1
                if nodes > self.problem.node_budget or (
                        nodes % 4096 == 0 and time.monotonic() > self.deadline):
                    while stack:
                        pd0, pw, _, _, ps, pdelta = stack.pop()
                        self.unassign(state, pd0, pw, ps, pdelta)
                    return best_rows, best_obj, False
                delta = self.assign(state, d0, w, s, last_in_day=(w == last_w))
                if best_obj is not None and state["obj"] >= best_obj:
                    self.unassign(state, d0, w, s, delta)
                    continue
                if k + 1 == n_cells:
                    obj = self.leaf_objective(state)
                    if best_obj is None or obj < best_obj:
                        best_obj = obj
                        best_rows = [list(r) for r in state["rows"]]
                    self.unassign(state, d0, w, s, delta)
                    continue
                stack.append((d0, w, cands, idx, s, delta))
                k += 1
                d0, w = divmod(k, self.n_staff)
                cands = self.candidates(state, d0, w, filled_today=w)
                idx = 0
                advanced = True
                break
            if advanced:
                continue
            if not stack:
                break
            d0, w, cands, idx, s, delta = stack.pop()
            self.unassign(state, d0, w, s, delta)
            k -= 1
        return best_rows, best_obj, True

    # -- greedy heuristic with bounded backtracking ---------------------------

    def _heuristic_order(self, state, d0: int, w: int, cands, rng) -> list[int]:
        """Value ordering for the greedy phase: fill unmet demand, keep each
        staff member's monthly counts on pace, avoid soft-pattern misses."""
        remaining = max(1, self.n_days - d0)
        scored = []
        for s in cands:
            score = 0.0
            daycnt = state["daycnt"][d0][s]
            if daycnt < self.day_lo[d0][s]:
                score += 10.0
            for sym, lo, hi, weight in self.soft_demand_by_day[d0]:
                if sym == s:
                    if daycnt < lo:
                        score += 5.0 * weight
                    elif daycnt >= hi:
                        score -= 6.0 * weight
            cnt = state["cnt"][w][s]
            soft_lo = self.soft_cnt_lo[w][s]
            pace_lo = soft_lo if soft_lo is not None else self.cnt_lo[w][s]
            if pace_lo:
                score += 9.0 * max(0, pace_lo - cnt) / remaining
            soft_hi = self.soft_cnt_hi[w][s]
            if soft_hi is not None and cnt >= soft_hi:
                score -= 6.0
            if cnt >= self.cnt_hi[w][s] - 1:
                score -= 1.0
            row = state["rows"][w]
            for n, allowed, weight in self.soft_patterns[w]:
                if n <= d0 + 1:
                    window = tuple(row[d0 - n + 1:d0]) + (s,)
                    if window not in allowed:
                        score -= 3.0 * weight
            score += rng.random() * 0.3
            scored.append((-score, s))
        scored.sort()
        return [s for _, s in scored]

    def heuristic_search(self, rng, perm) -> list[list[int]] | None:
        """One greedy descent with bounded backtracking; staff are visited
        in the given per-day order.  Returns rows or None on failure."""
        state = self.new_state()
        n_staff = self.n_staff
        n_cells = self.n_days * n_staff
        stack = []
        k = 0
        backtracks = 0

        def cell_of(kk):
            d, pos = divmod(kk, n_staff)
            return d, perm[pos], pos

        d0, w, pos = cell_of(0)
        order = self._heuristic_order(
            state, d0, w, self.candidates(state, d0, w, filled_today=pos), rng)
        idx = 0
        while True:
            if time.monotonic() > self.deadline:
                return None
            if idx < len(order):
                s = order[idx]
                idx += 1
                delta = self.assign(state, d0, w, s,
                                    last_in_day=(pos == n_staff - 1))
                if k + 1 == n_cells:
                    return [list(r) for r in state["rows"]]
                stack.append((d0, w, pos, order, idx, s, delta))
                k += 1
                d0, w, pos = cell_of(k)
                order = self._heuristic_order(
                    state, d0, w, self.candidates(state, d0, w, filled_today=pos), rng)
                idx = 0
                continue
            backtracks += 1
            if backtracks > self.problem.heuristic_backtracks or not stack:
                return None
            d0, w, pos, order, idx, s, delta = stack.pop()
            self.unassign(state, d0, w, s, delta)
            k -= 1

    # -- local polish ---------------------------------------------------------

    def _cell_hard_ok(self, rows, w: int, d0: int) -> bool:
        s = rows[w][d0]
        pin = self.pins.get((w, d0))
        if pin is not None and pin != s:
            return False
        row = rows[w]
        for n, allowed in self.hard_sets[w].items():
            for start in range(max(0, d0 - n + 1), min(d0, self.n_days - n) + 1):
                if tuple(row[start:start + n]) not in allowed:
                    return False
        cnt = [0] * self.n_syms
        for c in row:
            cnt[c] += 1
        for sym in range(self.n_syms):
            if not self.cnt_lo[w][sym] <= cnt[sym] <= self.cnt_hi[w][sym]:
                return False
        worked = self.n_days - cnt[self.off]
        if not self.any_lo[w] <= worked <= self.any_hi[w]:
            return False
        daycnt = [0] * self.n_syms
        for row2 in rows:
            daycnt[row2[d0]] += 1
        for sym in range(self.n_syms):
            if not self.day_lo[d0][sym] <= daycnt[sym] <= self.day_hi[d0][sym]:
                return False
        return True

    def _local_soft(self, rows, w: int, d0: int) -> int:
        """Soft cost of the neighbourhood a single-cell change can affect."""
        total = 0
        row = rows[w]
        for n, allowed, weight in self.soft_patterns[w]:
            for start in range(max(0, d0 - n + 1), min(d0, self.n_days - n) + 1):
                if tuple(row[start:start + n]) not in allowed:
                    total += weight
        for sym, lo, hi, weight in self.soft_demand_by_day[d0]:
            c = sum(1 for r in rows if r[d0] == sym)
            if not lo <= c <= hi:
                total += weight
        for sw, sym, lo, hi, weight in self.soft_counts:
            if sw == w:
                if sym is None:
                    c = sum(1 for c2 in row if c2 != self.off)
                else:
                    c = sum(1 for c2 in row if c2 == sym)
                if not lo <= c <= hi:
                    total += weight
        for pin_s, weight in self.soft_pins.get((w, d0), ()):
            if row[d0] != pin_s:
                total += weight
        return total

    def polish(self, rows) -> list[list[int]]:
        """First-improvement single-cell hill climbing, hard-preserving."""
        rows = [list(r) for r in rows]
        for _ in range(self.problem.polish_passes):
            improved = False
            for w in range(self.n_staff):
                for d0 in range(self.n_days):
                    if time.monotonic() > self.deadline:
                        return rows
                    current = rows[w][d0]
                    if self.pins.get((w, d0)) is not None:
                        continue
                    base = self._local_soft(rows, w, d0)
                    if base == 0:
                        continue
                    for s in range(self.n_syms):
                        if s == current:
                            continue
                        rows[w][d0] = s
                        if self._cell_hard_ok(rows, w, d0) and \
                                self._local_soft(rows, w, d0) < base:
                            improved = True
                            break
                        rows[w][d0] = current
            if not improved:
                break
        return rows


def _final_schedule(problem: ScheduleProblem, engine: _Engine, rows,
                    status: SolveStatus) -> Schedule:
    cells = engine.rows_to_cells(rows)
    schedule = Schedule(problem.month, problem.n_days, problem.staff, cells,
                        None, status)
    hard_total = hard_violation_total(schedule, problem.hard)
    if hard_total != 0:
        raise SolverError(
            f"internal error: schedule re-check found {hard_total} hard violations"
        )
    objective = soft_objective(schedule, problem.soft)
    return Schedule(problem.month, problem.n_days, problem.staff, cells,
                    objective, status)


def solve(problem: ScheduleProblem) -> Schedule:
    """Solve the rostering instance; see the module docstring for strategy."""
    if not problem.hard and not problem.soft:
        raise SolverError("nothing to solve: no constraints compiled")
    engine = _Engine(problem)
    certificate = engine.presolve()
    if certificate is not None:
        return Schedule(problem.month, problem.n_days, problem.staff, None,
                        None, SolveStatus.INFEASIBLE, certificate)

    best_rows, best_obj, completed = engine.exact_search()
    if completed:
        if best_rows is None:
            return Schedule(
                problem.month, problem.n_days, problem.staff, None, None,
                SolveStatus.INFEASIBLE,
                "exhaustive search proved the hard constraints unsatisfiable",
            )
        return _final_schedule(problem, engine, best_rows, SolveStatus.OPTIMAL)

    # Budget ran out: fall back to seeded greedy restarts, keep the best.
    rng = random.Random(problem.seed)
    candidates = []
    if best_rows is not None:
        candidates.append(best_rows)
    identity = list(range(len(problem.staff)))
    for attempt in range(problem.heuristic_restarts):
        if time.monotonic() > engine.deadline:
            break
        if attempt == 0:
            perm = identity
        else:
            perm = identity[attempt % len(identity):] + identity[:attempt % len(identity)]
            rng.shuffle(perm)
        found = engine.heuristic_search(rng, perm)
        if found is not None:
            candidates.append(found)
            break
    if not candidates:
        status = SolveStatus.TIMED_OUT
        return Schedule(
            problem.month, problem.n_days, problem.staff, None, None, status,
            "no hard-feasible assignment found within the search budgets",
        )

    def true_objective(rows) -> int:
        grid = Schedule(problem.month, problem.n_days, problem.staff,
                        engine.rows_to_cells(rows), None, SolveStatus.FEASIBLE)
        return soft_objective(grid, problem.soft)

    best = min(candidates, key=true_objective)
    best = engine.polish(best)
    return _final_schedule(problem, engine, best, SolveStatus.FEASIBLE)
