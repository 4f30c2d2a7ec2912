"""Volume availability, SAN path selection and the SAN I/O envelope."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from terrasim.topology import FAST, SLOW, Topology, VolumeSpec

DEFAULT_THRESHOLD = 2
DEFAULT_REBUILD_S = 4 * 3600
QUEUE_DEPTHS = (1, 4, 8, 16, 64)
OP_KINDS = ("seq-read", "seq-write", "rand-read", "rand-write")


class ConfigurationError(ValueError):
    pass


class InvalidTransition(RuntimeError):
    pass


class Unreachable(RuntimeError):
    """No fabric offers a complete healthy path from host to shelf section."""

    def __init__(self, host: str, section: str):
        super().__init__(f"{section} unreachable from {host}")
        self.host = host
        self.section = section


class DiskStatus(str, enum.Enum):
    HEALTHY = "healthy"
    FAILED = "failed"
    REBUILDING = "rebuilding"


@dataclass(frozen=True)
class DiskState:
    disk_id: str
    status: DiskStatus = DiskStatus.HEALTHY
    fail_time: int | None = None
    rebuild_eta: int | None = None

    @property
    def has_data(self) -> bool:
        return self.status is DiskStatus.HEALTHY


@dataclass(frozen=True)
class VolumeHealth:
    volume_id: str
    healthy_replicas: tuple[int, ...]
    available: bool


@dataclass(frozen=True)
class SanPath:
    host_id: str
    fabric_id: int
    controller_id: str
    shelf_section: str
    switches: tuple[str, ...] = ()


@dataclass
class SanFaults:
    """Currently failed SAN components (ids as used in the topology)."""

    switches: set[str] = field(default_factory=set)
    controllers: set[str] = field(default_factory=set)
    hbas: set[str] = field(default_factory=set)  # endpoint ids, e.g. "hba:SQL-1:f1"
    fabrics: set[int] = field(default_factory=set)

    def copy(self) -> "SanFaults":
        return SanFaults(set(self.switches), set(self.controllers), set(self.hbas), set(self.fabrics))


def _status(s) -> DiskStatus:
    return s.status if isinstance(s, DiskState) else DiskStatus(s)


def volume_health(v: VolumeSpec, disk_states: Mapping[str, DiskState | str],
                  threshold: int = DEFAULT_THRESHOLD) -> VolumeHealth:
    replicas = []
    for ms in v.mirror_sets:
        healthy = 0
        for d in ms:
            if d not in disk_states:
                raise ConfigurationError(f"no state for disk {d} of volume {v.id}")
            healthy += _status(disk_states[d]) is DiskStatus.HEALTHY
        replicas.append(healthy)
    available = all(len(ms) - h < threshold for ms, h in zip(v.mirror_sets, replicas))
    return VolumeHealth(v.id, tuple(replicas), available)


def volume_available(v: VolumeSpec, disk_states: Mapping[str, DiskState | str],
                     threshold: int = DEFAULT_THRESHOLD) -> bool:
    """False iff some mirror set has at least `threshold` members without data."""
    return volume_health(v, disk_states, threshold).available


def _switch_route(t: Topology, src: str, dst: str, dead: set[str]) -> tuple[str, ...] | None:
    if src in dead or dst in dead:
        return None
    prev = {src: None}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        if cur == dst:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return tuple(reversed(path))
        for nxt in sorted(t.switch(cur).links):
            if nxt not in prev and nxt not in dead:
                prev[nxt] = cur
                queue.append(nxt)
    return None


def route_san(t: Topology, host: str, section: str, faults: SanFaults | None = None) -> SanPath:
    """Lowest-numbered data fabric with a fully healthy host-to-controller path."""
    faults = faults or SanFaults()
    sec = t.section(section)
    where = t.endpoint_switch
    for fabric in t.data_fabrics:
        if fabric.id in faults.fabrics:
            continue
        hba = f"hba:{host}:f{fabric.id}"
        if hba not in where or hba in faults.hbas:
            continue
        for ctl in sec.controller_pair:
            port = f"ctl:{ctl}:f{fabric.id}"
            if ctl in faults.controllers or port not in where:
                continue
            hops = _switch_route(t, where[hba], where[port], faults.switches)
            if hops is not None:
                return SanPath(host, fabric.id, ctl, section, hops)
    raise Unreachable(host, section)


def tape_path_ok(t: Topology, host: str, faults: SanFaults | None = None) -> bool:
    faults = faults or SanFaults()
    if t.tape_library is None:
        return False
    tape = [f for f in t.fabrics if f.purpose == "tape"]
    where = t.endpoint_switch
    for fabric in tape:
        hba = f"hba:{host}:f{fabric.id}"
        if fabric.id in faults.fabrics or hba not in where or hba in faults.hbas:
            continue
        for port in t.tape_library.ports:
            if port in where and _switch_route(t, where[hba], where[port], faults.switches):
                return True
    return False


# ---------------------------------------------------------------------------
# throughput envelope

@dataclass(frozen=True)
class IoProfile:
    op_kind: str
    queue_depth: int = 4
    block_kb: int | None = None

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            raise ValueError(f"unknown op kind {self.op_kind!r}")
        if self.queue_depth not in QUEUE_DEPTHS:
            raise ValueError(f"queue depth must be one of {QUEUE_DEPTHS}")
        expected = 64 if self.op_kind.startswith("seq") else 8
        if self.block_kb is None:
            object.__setattr__(self, "block_kb", expected)
        elif self.block_kb != expected:
            raise ValueError(f"{self.op_kind} uses {expected} KB blocks")

    @property
    def label(self) -> str:
        return f"{self.op_kind} {self.block_kb}KB {self.queue_depth}-deep"


def standard_profiles() -> list[IoProfile]:
    """The measured SQLIO set: sequential 4-deep, random at every queue depth."""
    out = [IoProfile("seq-read", 4), IoProfile("seq-write", 4)]
    out += [IoProfile(k, q) for k in ("rand-read", "rand-write") for q in QUEUE_DEPTHS]
    return out


@dataclass(frozen=True)
class StorageCalibration:
    # per-volume rates at queue depth 4; placeholders, only the cap and the
    # five-volume scaling are anchored to measurements
    seq_read_mbps: float = 45.0
    seq_write_mbps: float = 35.0
    rand_read_iops: Mapping[str, float] = field(
        default_factory=lambda: {FAST: 1200.0, SLOW: 1000.0})
    rand_write_iops: Mapping[str, float] = field(
        default_factory=lambda: {FAST: 900.0, SLOW: 800.0})
    queue_depth_exponent: float = 0.5
    five_volume_scaling: float = 2.0
    san_bandwidth_cap_mbps: float = 100.0

    def __post_init__(self):
        # more volumes never deliver less in aggregate
        if self.five_volume_scaling < 1:
            raise ValueError("five_volume_scaling must be at least 1")
        if self.queue_depth_exponent < 0:
            raise ValueError("queue_depth_exponent must be non-negative")

    @property
    def volume_exponent(self) -> float:
        return math.log(self.five_volume_scaling) / math.log(5)

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "StorageCalibration":
        return cls(**(d or {}))


@dataclass(frozen=True)
class Throughput:
    mbps: float
    iops: float


def throughput(profile: IoProfile, active_volume_count: int,
               calibration: StorageCalibration | None = None,
               disk_class: str = SLOW, demand_mbps: float | None = None) -> Throughput:
    """Aggregate rate of `active_volume_count` volumes driven concurrently.

    Aggregates grow as n**k with k chosen so five volumes deliver
    `five_volume_scaling` times one volume, then the SAN cap applies.
    """
    cal = calibration or StorageCalibration()
    if active_volume_count <= 0 or demand_mbps == 0:
        return Throughput(0.0, 0.0)
    depth = (profile.queue_depth / 4) ** cal.queue_depth_exponent
    if profile.op_kind == "seq-read":
        mbps = cal.seq_read_mbps * depth
    elif profile.op_kind == "seq-write":
        mbps = cal.seq_write_mbps * depth
    else:
        table = cal.rand_read_iops if profile.op_kind == "rand-read" else cal.rand_write_iops
        mbps = table[disk_class] * depth * profile.block_kb / 1024
    mbps *= active_volume_count ** cal.volume_exponent
    mbps = min(mbps, cal.san_bandwidth_cap_mbps)
    if demand_mbps is not None:
        mbps = min(mbps, demand_mbps)
    return Throughput(mbps, mbps * 1024 / profile.block_kb)


def throughput_report_csv(profiles: Iterable[IoProfile] | None = None,
                          volume_counts: Iterable[int] = (1, 5),
                          calibration: StorageCalibration | None = None,
                          disk_class: str = SLOW) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["profile", "volumes", "iops", "mbps"])
    for p in profiles or standard_profiles():
        for n in volume_counts:
            r = throughput(p, n, calibration, disk_class)
            w.writerow([p.label, n, f"{r.iops:.1f}", f"{r.mbps:.2f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# mutable storage state owned by the simulation

class StorageState:
    def __init__(self, topology: Topology, threshold: int = DEFAULT_THRESHOLD,
                 rebuild_s: int = DEFAULT_REBUILD_S):
        if threshold not in (2, 3):
            raise ConfigurationError("mirror-set failure threshold must be 2 or 3")
        self.threshold = threshold
        self.rebuild_s = rebuild_s
        self.faults = SanFaults()
        self._disks: dict[str, DiskState] = {}
        self.set_topology(topology)

    def set_topology(self, topology: Topology) -> None:
        self.topology = topology
        self._set_of = {d: (v.id, i) for v in topology.volumes
                        for i, ms in enumerate(v.mirror_sets) for d in ms}
        self._degraded = Counter(self._set_of[d] for d, s in self._disks.items()
                                 if d in self._set_of and not s.has_data)

    def disk(self, disk_id: str) -> DiskState:
        if disk_id not in self.topology.disk_ids:
            raise ConfigurationError(f"unknown disk {disk_id}")
        return self._disks.get(disk_id) or DiskState(disk_id)

    def disk_states(self) -> dict[str, DiskState]:
        return {d: self.disk(d) for d in self.topology.disk_ids}

    def _put(self, new: DiskState) -> DiskState:
        old = self.disk(new.disk_id)
        key = self._set_of.get(new.disk_id)
        if key is not None:
            self._degraded[key] += (not new.has_data) - (not old.has_data)
        if new.status is DiskStatus.HEALTHY:
            self._disks.pop(new.disk_id, None)
        else:
            self._disks[new.disk_id] = new
        return new

    def fail_disk(self, disk_id: str, t: int) -> DiskState:
        cur = self.disk(disk_id)
        if cur.status is not DiskStatus.HEALTHY:
            raise InvalidTransition(f"disk {disk_id} is {cur.status.value}, cannot fail it")
        return self._put(DiskState(disk_id, DiskStatus.FAILED, t))

    def replace_disk(self, disk_id: str, t: int) -> DiskState:
        cur = self.disk(disk_id)
        if cur.status is not DiskStatus.FAILED:
            raise InvalidTransition(f"disk {disk_id} is {cur.status.value}, nothing to replace")
        return self._put(replace(cur, status=DiskStatus.REBUILDING, rebuild_eta=t + self.rebuild_s))

    def finish_rebuild(self, disk_id: str, t: int) -> DiskState:
        cur = self.disk(disk_id)
        if cur.status is not DiskStatus.REBUILDING:
            raise InvalidTransition(f"disk {disk_id} is not rebuilding")
        return self._put(DiskState(disk_id))

    def volume_ok(self, volume_id: str) -> bool:
        v = self.topology.volume(volume_id)
        return all(self._degraded[(v.id, i)] < self.threshold for i in range(len(v.mirror_sets)))

    def partition_problem(self, partition: str, host: str) -> str | None:
        """None when every volume of the partition is readable from `host`."""
        reached: dict[str, bool] = {}
        for v in self.topology.volumes_for(partition):
            if not self.volume_ok(v.id):
                return f"volume {v.id} lost a mirror set"
            if v.section not in reached:
                try:
                    route_san(self.topology, host, v.section, self.faults)
                    reached[v.section] = True
                except Unreachable:
                    reached[v.section] = False
            if not reached[v.section]:
                return f"{v.section} unreachable from {host}"
        return None
