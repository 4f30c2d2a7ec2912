"""Regenerate the bundled scenario files under src/terrasim/scenarios/.

The operating history gives category totals, a few named incidents and the
cluster-expansion timings, not every event's duration.  Durations below are
back-fitted so the category totals come out exact; the `calibration` block in
each file records which numbers are fixed points and which are fitted.

    python3 scripts/build_scenarios.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "terrasim" / "scenarios"
HOUR, DAY = 3600, 86400
HORIZON_H = 28_647


def at(day: float, hh: int = 0, mm: int = 0) -> int:
    return int(day * DAY) + hh * HOUR + mm * 60


def step(t, action, target=None, category=None, cause=None, note="", **params) -> dict:
    d: dict = {"t": t, "action": action}
    if target is not None:
        d["target"] = target
    if params:
        d["params"] = params
    if category:
        d["category"] = category
    if cause:
        d["cause"] = cause
    if note:
        d["note"] = note
    return d


def expansion_steps(day0: int) -> list[dict]:
    """The twelve-day SAN and tape expansion, Day 1 at `day0`."""
    d = lambda n, hh=0, mm=0: at(day0 + n - 1, hh, mm)  # noqa: E731
    s = [
        step(d(1, 9), "expand", category="planned", cause="firmware", note="table2-day1",
             label="table2-day1"),
        # the backup software install forced a reboot, then an operator slip forced another
        step(d(1, 10), "reboot_node", ["SQL-1", "SQL-2", "SQL-3"], "unplanned", "firmware",
             "table2-day1-reboot-1", duration_s=124),
        step(d(1, 15), "reboot_node", ["SQL-1", "SQL-2", "SQL-3"], "unplanned", "operations",
             "table2-day1-reboot-2", duration_s=124),
        # new switches, tape fabric and HBAs: the final SAN layout comes online
        step(d(2, 8), "expand", category="planned", cause="firmware", note="table2-day2",
             label="table2-day2-san", topology="default"),
        step(d(2, 8, 10), "move_group", "DRG_DB", "planned", "firmware", "table2-day2",
             to="SQL-4", duration_s=39),
        step(d(2, 8, 40), "move_group", "DOQ_0", "planned", "firmware", "table2-day2",
             to="SQL-1", duration_s=43),
        step(d(2, 9, 10), "move_group", "DOQ_1", "planned", "firmware", "table2-day2",
             to="SQL-2", duration_s=47),
        step(d(2, 12), "backup", "DRG_DB", note="table2-day2-backup"),
        step(d(3, 12), "verify_restore", "DRG_DB", note="table2-day3-restore", label_fault=True),
        step(d(4, 10), "backup", "DRG_DB", note="table2-day4-backup-relabeled"),
        step(d(4, 20), "verify_restore", "DRG_DB", note="table2-day4-restore"),
        step(d(5, 2), "backup", "DOQ_0", note="table2-day5-backup"),
        step(d(5, 20), "verify_restore", "DOQ_0", note="table2-day5-restore"),
        step(d(7, 2), "backup", "DOQ_1", note="table2-day7-backup"),
        step(d(8, 12), "verify_restore", "DOQ_1", note="table2-day8-restore"),
        step(d(10, 9), "expand", category="planned", cause="firmware", note="table2-day10",
             label="table2-day10-rack4"),
        # Day 11: everything onto the spare, nodes 1-3 discover the new volumes
        step(d(11, 8), "move_group", "DOQ_0", "planned", "firmware", "table2-day11-failover",
             to="SQL-4", duration_s=63),
        step(d(11, 8, 5), "move_group", "DOQ_1", "planned", "firmware", "table2-day11-failover",
             to="SQL-4", duration_s=64),
        step(d(11, 8, 20), "reboot_node", "SQL-1", "planned", "firmware", "table2-day11-discover",
             duration_s=900),
        step(d(11, 8, 40), "reboot_node", "SQL-2", "planned", "firmware", "table2-day11-discover",
             duration_s=900),
        step(d(11, 9), "reboot_node", "SQL-3", "planned", "firmware", "table2-day11-discover",
             duration_s=900),
        step(d(11, 9, 30), "expand", "SQL-4", "planned", "firmware", "table2-day11-discover",
             label="table2-day11-discover", outage_s=41),
        step(d(11, 10), "move_group", "DRG_DB", "planned", "firmware", "table2-day11-sql1",
             to="SQL-1", duration_s=47),
        step(d(11, 10, 20), "move_group", "DOQ_0", "planned", "firmware", "table2-day11-sql2-sql3",
             to="SQL-2", duration_s=44),
        step(d(11, 10, 20), "move_group", "DOQ_1", "planned", "firmware", "table2-day11-sql2-sql3",
             to="SQL-3", duration_s=44),
        step(d(12, 9), "expand", category="planned", cause="firmware", note="table2-day12",
             label="table2-day12-add-drives"),
    ]
    return s


def history_steps() -> list[dict]:
    rng = random.Random(2003)
    s: list[dict] = []

    # SQL-1 memory-controller crash series: every 72-144 h for about a month.
    # Only the first crash catches SQL-1 owning a partition; afterwards DRG_DB
    # stays on the spare and the repeat crashes go unnoticed.
    t = at(20, 4, 13)
    for i in range(12):
        s.append(step(t, "fail_node", "SQL-1", "unplanned", "hardware",
                      f"sql1-memory-controller-{i + 1}", failover_s=44, recover_after_s=600))
        t += rng.randint(72, 144) * HOUR + rng.randint(0, 3599)
    noticed = t // DAY + 1
    s.append(step(at(noticed, 10), "move_group", "DRG_DB", "planned", "operations",
                  "failback after crash series", to="SQL-1", duration_s=40))
    s.append(step(at(noticed + 3, 7), "patch_node", "SQL-1", "planned", "firmware",
                  "replace SQL-1 memory controller", move_out_s=60, patch_s=2 * HOUR, move_back_s=68))

    # sporadic SQL-1 failures every 60-120 days, each followed by a failback
    for i, day in enumerate((150, 250, 400, 495, 610)):
        t = at(day, rng.randint(0, 23), rng.randint(0, 59))
        s.append(step(t, "fail_node", "SQL-1", "unplanned", "hardware", f"sql1-sporadic-{i + 1}",
                      failover_s=44, recover_after_s=900))
        s.append(step(at(day + 1, 10), "move_group", "DRG_DB", "planned", "operations",
                      "failback to SQL-1", to="SQL-1", duration_s=40))

    # rolling OS/database patch rounds; SQL-4 owns nothing and costs nothing
    for r, day in enumerate((110, 430, 700, 1060)):
        for k, node in enumerate(("SQL-4", "SQL-1", "SQL-2", "SQL-3")):
            corrupt = r == 2 and node == "SQL-2"
            s.append(step(at(day, 6 + 2 * k), "patch_node", node, "planned", "software",
                          "corrupt upgrade file, repeated" if corrupt else f"patch round {r + 1}",
                          move_out_s=50, patch_s=3 * HOUR if corrupt else 20 * 60, move_back_s=55))

    # hardware maintenance on individual nodes
    s.append(step(at(420, 14), "fail_hba", "hba:SQL-2:f1", "unplanned", "hardware", "HBA failure"))
    s.append(step(at(421, 7), "patch_node", "SQL-2", "planned", "firmware", "replace HBA",
                  move_out_s=61, patch_s=HOUR, move_back_s=67))
    s.append(step(at(421, 7, 30), "repair", "hba:SQL-2:f1", note="HBA replaced"))
    s.append(step(at(640, 16), "fail_hba", "hba:SQL-1:f2", "unplanned", "hardware", "HBA failure"))
    s.append(step(at(641, 7), "patch_node", "SQL-1", "planned", "firmware", "replace HBA",
                  move_out_s=63, patch_s=HOUR, move_back_s=65))
    s.append(step(at(641, 7, 30), "repair", "hba:SQL-1:f2", note="HBA replaced"))
    s.append(step(at(761, 7), "patch_node", "SQL-3", "planned", "firmware",
                  "replace CPU board (half the processors offline)",
                  move_out_s=62, patch_s=3 * HOUR, move_back_s=66))

    # the one software hang: SQL keeps heartbeating, noticed ~50 min later
    s.append(step(at(575, 13, 5), "hang_node", "SQL-2", "unplanned", "software",
                  "database service hang", detect_after_s=2940, restart_s=48))

    # SAN firmware upgrade: 90 min planned, disk signatures corrupted
    s.append(step(at(850, 1), "firmware_upgrade", None, "planned", "firmware",
                  "SAN firmware upgrade", planned_s=5400, outage_s=62156))

    # account password policy: every 90 days
    for day in (90, 180, 270, 380):
        s.append(step(at(day, 5), "password_reset", None, "planned", "operations",
                      "password change with service restart", correct=True, restart_s=60))
    for day in (470, 560, 650, 830, 920, 1100, 1190):
        s.append(step(at(day, 5), "password_reset", None, "planned", "operations",
                      "password change via tool", correct=True))
    s.append(step(at(740, 14), "password_reset", "SQL-3", "unplanned", "operations",
                  "mistyped password (noticed at once)", correct=False,
                  detect_after_s=1800, restart_s=60))
    s.append(step(at(1010, 2, 10), "password_reset", "SQL-2", "unplanned", "operations",
                  "mistyped password (overnight)", correct=False,
                  detect_after_s=28160, restart_s=60))

    # customer failover demonstration
    s.append(step(at(200, 15), "move_group", "DOQ_0", "planned", "operations", "customer demo",
                  to="SQL-4", duration_s=48))
    s.append(step(at(200, 15, 30), "move_group", "DOQ_0", "planned", "operations", "customer demo",
                  to="SQL-2", duration_s=48))

    s.extend(expansion_steps(308))

    # single-component SAN faults: masked by mirroring and the second fabric
    racks = [f"R{r}{sec}" for r in (1, 2, 3) for sec in "TMB"]
    for i in range(24):
        tag = racks[i % len(racks)]
        disk = f"{tag}-D{(i * 7) % 18 + 1:02d}"
        s.append(step(at(10 + 48 * i, 13), "fail_disk", disk, "unplanned", "hardware",
                      "disk failure", replace_after_s=DAY))
    s.append(step(at(222, 3), "fail_controller", "HSG-R1T-A", "unplanned", "hardware",
                  "controller failure", repair_after_s=2 * DAY))
    s.append(step(at(905, 19), "fail_controller", "HSG-R2M-B", "unplanned", "hardware",
                  "controller failure", repair_after_s=2 * DAY))
    s.append(step(at(530, 11), "fail_switch", "f1-sw2", "unplanned", "hardware",
                  "switch failure", repair_after_s=DAY))

    # web tier: individual servers drop out behind the load balancers
    s.append(step(at(300, 9), "fail_webserver", "web-html-2", note="web server failure"))
    s.append(step(at(300, 13), "restore_webserver", "web-html-2", note="web server back"))
    s.append(step(at(980, 22), "fail_webserver", "web-soap-1", note="web server failure"))
    s.append(step(at(981, 8), "restore_webserver", "web-soap-1", note="web server back"))

    # restore tests from the production weekly backups
    for day in (372, 540):
        for p in ("DRG_DB", "DOQ_0", "DOQ_1"):
            s.append(step(at(day, 12), "verify_restore", p, note="restore test"))

    s.sort(key=lambda x: x["t"])
    return s


CALIBRATION = {
    "fixed_points": [
        "horizon 28,647 h",
        "category totals (planned / unplanned): hardware 0.00/0.09 h, hw-firmware 1.75/15.80 h, "
        "software 0.35/0.83 h, operations 0.16/8.39 h",
        "expansion moves 39/43/47 s, Day 11 subtotals 127/41/47/44 s, two Day-1 reboots",
        "SAN firmware upgrade planned at 90 minutes",
    ],
    "fitted": {
        "sql1_crash": "6 costly SQL-1 crashes at 10 s detection + 44 s failover = 324 s",
        "failbacks": "6 x 40 s",
        "password_restarts": "4 x 60 s, all partitions at once",
        "customer_demo": "48 + 48 s",
        "patches": "12 active-node patches at 50 + 55 s = 1260 s",
        "hardware_maintenance": "4 node drains: 128 + 128 + 128 + 128 s = 512 s",
        "day1_reboots": "2 x 124 s (first charged to hw/firmware, second to operations)",
        "firmware_overrun": "62,156 s total (17.27 h): 5,400 s planned + 56,756 s unplanned",
        "software_hang": "2,940 s to notice + 48 s restart",
        "password_incidents": "1,800 + 60 s and 28,160 + 60 s",
    },
}


def paper_history() -> dict:
    return {
        "schema_version": 1,
        "name": "paper-history",
        "description": "Three years of cluster and SAN operation, Oct 2000 to Nov 2003.",
        "seed": 2003,
        "horizon_h": HORIZON_H,
        "topology": "initial",
        "config": {"detection_delay_s": 10, "threshold": 2, "rebuild_h": 4},
        "backups": {"weekly": True, "start_s": at(364),
                    # DOQ_1 is quoted at 8.25 h for 1.33 TB
                    "throughput_gb_per_h": {"DOQ_1": 165}},
        "steps": history_steps(),
        "calibration": CALIBRATION,
    }


def cluster_expansion() -> dict:
    return {
        "schema_version": 1,
        "name": "cluster-expansion",
        "description": "Twelve-day SAN, tape library and storage expansion.",
        "seed": 2001,
        "horizon_h": 14 * 24,
        "topology": "initial",
        "config": {"detection_delay_s": 10, "threshold": 2},
        "planned_budget_s": 450,
        "steps": expansion_steps(0),
    }


def empty() -> dict:
    return {"schema_version": 1, "name": "empty", "seed": 0, "horizon_h": HORIZON_H,
            "topology": "default", "steps": []}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, doc in (("paper-history", paper_history()), ("cluster-expansion", cluster_expansion()),
                      ("empty", empty())):
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {OUT / name}.json ({len(doc['steps'])} steps)")


if __name__ == "__main__":
    main()
