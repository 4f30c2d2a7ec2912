"""Downtime intervals and the arithmetic on them.

Downtime is the time during which *any* partition is unavailable, so
simultaneous outages on different partitions are counted once.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

CATEGORIES = ("planned", "unplanned")
CAUSES = ("hardware", "firmware", "software", "operations")
ROW_LABELS = {
    "hardware": "Hardware Failures",
    "firmware": "Hardware/Firmware Upgrades",
    "software": "System Software",
    "operations": "Operations",
}

HOUR = 3600
YEAR_S = 365 * 24 * HOUR
# yearly downtime allowances; four nines is the commonly quoted 3154 s
BUDGET_S = {99.9: 31_536, 99.99: 3_154, 99.999: 315}

LEDGER_MAGIC = "# terrasim-ledger v1"


class LedgerError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Interval:
    start: int
    end: int
    partition: str
    category: str
    cause: str
    note: str = ""
    event_id: int = -1

    def __post_init__(self):
        if self.end < self.start:
            raise LedgerError(f"interval ends before it starts: {self}")
        if self.category not in CATEGORIES:
            raise LedgerError(f"unknown category {self.category!r}")
        if self.cause not in CAUSES:
            raise LedgerError(f"unknown cause {self.cause!r}")

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass
class DowntimeLedger:
    horizon_s: int
    intervals: list[Interval] = field(default_factory=list)

    def add(self, iv: Interval) -> None:
        start, end = max(0, iv.start), min(self.horizon_s, iv.end)
        if end > start:
            self.intervals.append(Interval(start, end, iv.partition, iv.category, iv.cause,
                                           iv.note, iv.event_id))

    def sorted(self) -> "DowntimeLedger":
        return DowntimeLedger(self.horizon_s, sorted(self.intervals))

    def union_s(self) -> int:
        return union_seconds(self.intervals)

    def per_partition_s(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for p in sorted({iv.partition for iv in self.intervals}):
            out[p] = union_seconds(iv for iv in self.intervals if iv.partition == p)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{LEDGER_MAGIC} horizon_s={self.horizon_s}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["partition", "start", "end", "category", "cause", "event_id", "note"])
        for iv in self.intervals:
            w.writerow([iv.partition, iv.start, iv.end, iv.category, iv.cause, iv.event_id, iv.note])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DowntimeLedger":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(LEDGER_MAGIC):
            raise LedgerError("missing ledger header line")
        try:
            horizon = int(lines[0].split("horizon_s=", 1)[1].split()[0])
            rows = list(csv.DictReader(lines[1:]))
            ivs = [Interval(int(r["start"]), int(r["end"]), r["partition"], r["category"],
                            r["cause"], r.get("note") or "", int(r.get("event_id") or -1))
                   for r in rows]
        except (IndexError, KeyError, ValueError, TypeError) as exc:
            raise LedgerError(f"unparseable ledger: {exc}") from exc
        return cls(horizon, ivs)


def _merge(spans: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for s, e in sorted(spans):
        if e <= s:
            continue
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def union_seconds(intervals: Iterable) -> int:
    spans = ((iv.start, iv.end) if isinstance(iv, Interval) else (iv[0], iv[1]) for iv in intervals)
    return sum(e - s for s, e in _merge(spans))


def union_downtime(ledger: DowntimeLedger | Iterable) -> float:
    """Hours during which at least one partition was down."""
    ivs = ledger.intervals if isinstance(ledger, DowntimeLedger) else ledger
    return union_seconds(ivs) / HOUR


def attribute(intervals: Sequence[Interval]) -> list[tuple[Interval, int]]:
    """Split union time among intervals: each elementary span goes to the
    earliest-starting interval covering it (ledger order breaks ties).
    The seconds returned sum to the union exactly."""
    if not intervals:
        return []
    order = sorted(range(len(intervals)), key=lambda i: (intervals[i].start, i))
    bounds = sorted({x for iv in intervals for x in (iv.start, iv.end)})
    share = [0] * len(intervals)
    for a, b in zip(bounds, bounds[1:]):
        for i in order:
            iv = intervals[i]
            if iv.start > a:
                break
            if iv.end >= b:
                share[i] += b - a
                break
    return [(iv, s) for iv, s in zip(intervals, share)]


def availability(downtime_h: float, horizon_h: float) -> float:
    """Percent available, rounded to two decimals."""
    if horizon_h <= 0:
        raise ValueError("horizon must be positive")
    if not 0 <= downtime_h <= horizon_h:
        raise ValueError("downtime must lie within the horizon")
    return round(100.0 * (1.0 - downtime_h / horizon_h), 2)


@dataclass(frozen=True)
class BudgetCheck:
    target: float
    budget_s: int
    spent_s: float
    remaining_s: float
    within: bool

    @property
    def overrun_fraction(self) -> float:
        return max(0.0, self.spent_s - self.budget_s) / self.budget_s


def budget_check(downtime_s: float, horizon_s: float | None = None,
                 target_nines: float = 99.99) -> BudgetCheck:
    """Compare downtime against the yearly allowance for `target_nines`.

    Horizons longer than a year are averaged per year; shorter ones (a
    single maintenance campaign, say) are charged against one year whole.
    """
    if target_nines not in BUDGET_S:
        raise ValueError(f"target must be one of {sorted(BUDGET_S)}")
    budget = BUDGET_S[target_nines]
    spent = float(downtime_s)
    if horizon_s is not None and horizon_s > YEAR_S:
        spent = downtime_s * YEAR_S / horizon_s
    return BudgetCheck(target_nines, budget, spent, budget - spent, spent <= budget)


def plan_overrun(planned_s: float, actual_s: float) -> float:
    """Fraction by which actual downtime exceeded the planned downtime."""
    if planned_s <= 0:
        raise ValueError("planned downtime must be positive")
    return (actual_s - planned_s) / planned_s
