"""Independent reference computations used to check the package.

Each oracle is written from first principles, without importing the code
it checks, so an error in the implementation cannot hide in both places.
"""

from __future__ import annotations

import math


def minute_scan_union(spans, horizon_s: int) -> int:
    """Downtime in seconds found by walking a boolean minute timeline.

    A minute counts as down if any span covers its midpoint.  Error against
    the exact union is below one minute per span edge pair, which is plenty
    for spans whose edges sit on whole minutes.
    """
    minutes = math.ceil(horizon_s / 60)
    down = [False] * minutes
    for start, end in spans:
        # minutes whose midpoint m*60+30 lies in [start, end)
        first = max(0, math.ceil((start - 30) / 60))
        last = min(minutes, math.ceil((end - 30) / 60))
        for m in range(first, last):
            down[m] = True
    return 60 * sum(down)


def second_scan_union(spans, horizon_s: int) -> int:
    """Exact union by marking every second (slow, small horizons only)."""
    down = bytearray(horizon_s)
    for start, end in spans:
        for s in range(max(0, start), min(horizon_s, end)):
            down[s] = 1
    return sum(down)


# Backups: the library writes 34 GB/h per drive; 1 TB is 1024 GB and each
# drive fills its own 100 GB tapes.

def backup_hours(tb: float, drives: int) -> float:
    return tb * 1024 / (34 * drives)


def backup_tapes(tb: float, drives: int) -> int:
    if tb <= 0:
        return 0
    per_drive_gb = tb * 1024 / drives
    # every drive that writes anything loads at least one tape
    tapes = 1
    while tapes * 100 < per_drive_gb - 1e-9:
        tapes += 1
    return drives * tapes


def round_robin(servers, n_requests: int) -> dict:
    """Hand enumeration: request i goes to server i mod len(servers)."""
    counts = {s: 0 for s in servers}
    for i in range(n_requests):
        counts[servers[i % len(servers)]] += 1
    return counts


def fabric_reachable(adjacency: dict, src: str, dst: str, dead: set) -> bool:
    """Depth-first search over a switch adjacency map."""
    if src in dead or dst in dead:
        return False
    stack, seen = [src], {src}
    while stack:
        cur = stack.pop()
        if cur == dst:
            return True
        for nxt in adjacency.get(cur, ()):
            if nxt not in seen and nxt not in dead:
                seen.add(nxt)
                stack.append(nxt)
    return False


def budget_overrun(planned_s: float, actual_s: float) -> float:
    return (actual_s - planned_s) / planned_s
