import heapq
import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"
SCENARIOS = ROOT / "src" / "terrasim" / "scenarios"


class FakeSim:
    """Just enough of the kernel for driving `Cluster` by hand."""

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)
        self.queue = []
        self.seq = 0
        self.events = []
        self.open = {}
        self.closed = []
        self.next_key = 0
        self.now = 0

    def schedule(self, t, fn, *args, module="cluster"):
        self.seq += 1
        heapq.heappush(self.queue, (t, self.seq, fn, args))

    def log(self, t, kind, **fields):
        self.events.append((t, kind, fields))
        return len(self.events) - 1

    def open_outage(self, partition, t, category, cause, note=""):
        key = self.next_key
        self.next_key += 1
        self.open[key] = (partition, t, category, cause)
        return key

    def close_outage(self, key, t):
        partition, start, category, cause = self.open.pop(key)
        self.closed.append((partition, start, t, category, cause))

    def placement_changed(self, t):
        pass

    def run_until(self, horizon):
        while self.queue and self.queue[0][0] < horizon:
            t, _, fn, args = heapq.heappop(self.queue)
            self.now = t
            fn(t, *args)

    def downtime(self, partition=None):
        return sum(e - s for p, s, e, *_ in self.closed if partition in (None, p))


@pytest.fixture
def fake_sim():
    return FakeSim()


def scenario(steps=(), horizon_h=24, topology="default", seed=0, **extra):
    d = {"schema_version": 1, "name": "test", "seed": seed, "horizon_h": horizon_h,
         "topology": topology, "steps": list(steps)}
    d.update(extra)
    return d


def step(t, action, target=None, **params):
    s = {"t": t, "action": action, "params": params}
    if target is not None:
        s["target"] = target
    return s


# -- acceptance criterion summary ---------------------------------------------

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "failed": [], "ran": set()})
    entry["ran"].add(item.name)
    if not rep.passed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "FAIL" if e["failed"] else "PASS"
        line = f"criterion {n} {status}: {e['title']}"
        if e["failed"]:
            line += f" (failing: {', '.join(sorted(set(e['failed'])))})"
        tr.write_line(line)
