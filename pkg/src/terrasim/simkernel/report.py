"""Planned/unplanned x cause rollup of a downtime ledger."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from terrasim.simkernel.ledger import (CATEGORIES, CAUSES, HOUR, ROW_LABELS, DowntimeLedger,
                                       attribute, availability)


@dataclass
class AvailabilityReport:
    horizon_s: int
    cells: dict[tuple[str, str], int] = field(default_factory=dict)  # (cause, category) -> s
    meta: dict = field(default_factory=dict)

    def cell_s(self, cause: str, category: str) -> int:
        return self.cells.get((cause, category), 0)

    def cell_h(self, cause: str, category: str) -> float:
        return round(self.cell_s(cause, category) / HOUR, 2)

    def column_s(self, category: str) -> int:
        return sum(self.cell_s(c, category) for c in CAUSES)

    @property
    def total_s(self) -> int:
        return sum(self.cells.values())

    @property
    def horizon_h(self) -> float:
        return self.horizon_s / HOUR

    def percent(self, seconds: int) -> float:
        return availability(seconds / HOUR, self.horizon_h)

    @property
    def percent_available(self) -> float:
        return self.percent(self.total_s)

    # -- rendering ---------------------------------------------------------
    def render_table(self) -> str:
        w0, w = 28, 12

        def hrs(s: int) -> str:
            return f"{s / HOUR:.2f} hrs"

        lines = [f"{'Downtime Reason':<{w0}}{'Planned':>{w}}{'Unplanned':>{w}}"]
        for cause in CAUSES:
            lines.append(f"{ROW_LABELS[cause]:<{w0}}"
                         f"{hrs(self.cell_s(cause, 'planned')):>{w}}"
                         f"{hrs(self.cell_s(cause, 'unplanned')):>{w}}")
        lines.append(f"{'Downtime':<{w0}}{hrs(self.column_s('planned')):>{w}}"
                     f"{hrs(self.column_s('unplanned')):>{w}}")
        lines.append(f"{'Per Cent Available':<{w0}}"
                     f"{self.percent(self.column_s('planned')):>{w - 1}.2f}%"
                     f"{self.percent(self.column_s('unplanned')):>{w - 1}.2f}%")
        lines.append(f"{'Total Downtime':<{w0}}{hrs(self.total_s):>{w}}")
        lines.append(f"{'Per-Cent Available':<{w0}}{self.percent_available:>{w - 1}.2f}%")
        lines.append(f"{'Horizon':<{w0}}{self.horizon_h:>{w - 4}.0f} hrs")
        return "\n".join(lines) + "\n"

    def rows(self) -> list[list]:
        out = []
        for cause in CAUSES:
            for cat in CATEGORIES:
                s = self.cell_s(cause, cat)
                out.append([ROW_LABELS[cause], cat, s, f"{s / HOUR:.2f}"])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["reason", "category", "seconds", "hours"])
        w.writerows(self.rows())
        for cat in CATEGORIES:
            s = self.column_s(cat)
            w.writerow(["Downtime", cat, s, f"{s / HOUR:.2f}"])
        w.writerow(["Total Downtime", "all", self.total_s, f"{self.total_s / HOUR:.2f}"])
        w.writerow(["Per-Cent Available", "all", "", f"{self.percent_available:.2f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "horizon_s": self.horizon_s,
            "cells": {ROW_LABELS[c]: {cat: self.cell_s(c, cat) for cat in CATEGORIES} for c in CAUSES},
            "planned_s": self.column_s("planned"),
            "unplanned_s": self.column_s("unplanned"),
            "total_s": self.total_s,
            "total_h": round(self.total_s / HOUR, 2),
            "percent_available": self.percent_available,
            "percent_available_planned": self.percent(self.column_s("planned")),
            "percent_available_unplanned": self.percent(self.column_s("unplanned")),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "table":
            return self.render_table()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown report format {fmt!r}")


def build_report(ledger: DowntimeLedger, meta: dict | None = None) -> AvailabilityReport:
    cells: dict[tuple[str, str], int] = {}
    for iv, s in attribute(ledger.intervals):
        if s:
            key = (iv.cause, iv.category)
            cells[key] = cells.get(key, 0) + s
    return AvailabilityReport(ledger.horizon_s, cells, dict(meta or {}))
