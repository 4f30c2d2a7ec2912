"""Resource-group ownership, failure detection and failover.

Clients address a database through a virtual server name.  The name
resolves to whichever node currently owns the resource group; while the
group is moving, resolution fails the same way an unreachable server does.

`Cluster` mutates state only from callbacks run by the simulation kernel.
It talks to the kernel through a small duck-typed surface:

    sim.schedule(t, fn, *args, module=...)
    sim.open_outage(partition, t, category, cause, note) -> key
    sim.close_outage(key, t)
    sim.log(t, kind, **fields)
    sim.rng
    sim.placement_changed(t)
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

CLUSTER_GROUP = "Cluster Group"
DB_GROUPS = ("DRG_DB", "DOQ_0", "DOQ_1")
GROUPS = (CLUSTER_GROUP,) + DB_GROUPS
PASSIVE_NODE = "SQL-4"
HOME_NODE = {"DRG_DB": "SQL-1", "DOQ_0": "SQL-2", "DOQ_1": "SQL-3", CLUSTER_GROUP: "SQL-4"}
VIRTUAL_NAMES = {
    "terravs1\\inst1": "DRG_DB",
    "terravs2\\inst1": "DOQ_0",
    "terravs3\\inst1": "DOQ_1",
}
DATABASES = {"DRG_DB": "ts4Drg", "DOQ_0": "ts4Doq0", "DOQ_1": "ts4Doq1"}

# node states the heartbeat LAN reports as alive
CLUSTER_ALIVE = ("up", "hung")


class MoveRejected(RuntimeError):
    pass


class ServerNotFound(ConnectionError):
    pass


class UnknownVirtualName(NameError):
    pass


@dataclass(frozen=True)
class ConnectionString:
    server: str
    database: str = ""
    network: str = "dbmssocn"

    _PHYSICAL = re.compile(r"^sql-\d+", re.I)

    def __post_init__(self):
        if self._PHYSICAL.match(self.server):
            raise ValueError(f"connection string names a physical node: {self.server}")

    @classmethod
    def parse(cls, text: str) -> "ConnectionString":
        pairs = {}
        for part in text.replace("\n", ";").split(";"):
            if "=" in part:
                k, v = part.split("=", 1)
                pairs[k.strip().lower()] = v.strip()
        return cls(pairs.get("server", ""), pairs.get("database", ""),
                   pairs.get("network", "dbmssocn"))

    def __str__(self):
        return (f"Server={self.server};Database={self.database};"
                f"Integrated Security=true;Network={self.network};")


@dataclass
class ResourceGroup:
    name: str
    resources: tuple[str, ...]
    preferred_owners: tuple[str, ...]
    current_owner: str | None
    state: str = "online"  # online | offline | moving
    moving_to: str | None = None
    move_started: int | None = None
    move_eta: int | None = None
    last_owner: str | None = None
    outage_key: object = None
    move_token: int = 0

    @property
    def partition(self) -> str | None:
        return self.name if self.name in DB_GROUPS else None


@dataclass
class NodeHealth:
    node_id: str
    status: str = "up"  # up | down | hung | restarting | maintenance
    last_heartbeat: int = 0

    @property
    def heartbeating(self) -> bool:
        # a hung SQL instance leaves the OS and its heartbeats untouched
        return self.status in CLUSTER_ALIVE


@dataclass(frozen=True)
class FailoverRecord:
    group: str
    from_node: str | None
    to_node: str
    start: int
    duration_s: int
    planned: bool
    cause: str
    detect_s: int = 0

    CSV_HEADER = ("group", "from", "to", "start", "duration_s", "planned", "cause")

    def csv_row(self) -> list:
        return [self.group, self.from_node or "", self.to_node, self.start,
                self.duration_s, str(self.planned).lower(), self.cause]


@dataclass(frozen=True)
class FailoverModel:
    """Triangular failover durations; detection is a fixed heartbeat timeout."""

    min_s: int = 29
    mode_s: int = 45
    max_s: int = 90
    detection_delay_s: int = 10

    def sample(self, rng: random.Random) -> int:
        return int(round(rng.triangular(self.min_s, self.max_s, self.mode_s)))


def preferred_owners(group: str, nodes: Iterable[str]) -> tuple[str, ...]:
    """Home node, then the passive node, then the rest by index."""
    nodes = sorted(nodes)
    home = HOME_NODE.get(group, nodes[0])
    order = [home] + [PASSIVE_NODE] + nodes
    return tuple(dict.fromkeys(n for n in order if n in nodes))


@dataclass
class ClusterState:
    groups: dict[str, ResourceGroup]
    nodes: dict[str, NodeHealth]
    virtual_names: Mapping[str, str] = field(default_factory=lambda: dict(VIRTUAL_NAMES))

    @classmethod
    def default(cls, topology=None, owners: Mapping[str, str] | None = None) -> "ClusterState":
        node_ids = topology.cluster_nodes if topology is not None else ("SQL-1", "SQL-2", "SQL-3", "SQL-4")
        owners = {**HOME_NODE, **(owners or {})}
        groups = {}
        for g in GROUPS:
            if g == CLUSTER_GROUP:
                resources = ("cluster-name", "cluster-ip")
            else:
                vname = next(k for k, v in VIRTUAL_NAMES.items() if v == g)
                vols = tuple(v.id for v in topology.volumes_for(g)) if topology is not None else ()
                resources = vols + (f"vip:{vname.split(chr(92))[0]}", f"sql:{vname}")
            groups[g] = ResourceGroup(g, resources, preferred_owners(g, node_ids), owners[g])
        return cls(groups, {n: NodeHealth(n) for n in node_ids})

    def owner(self, group: str) -> str | None:
        return self.groups[group].current_owner

    def groups_on(self, node: str) -> list[ResourceGroup]:
        return [g for g in self.groups.values() if g.current_owner == node]

    def serving(self, group: str) -> bool:
        g = self.groups[group]
        return (g.state == "online" and g.current_owner is not None
                and self.nodes[g.current_owner].status == "up")

    def online_partitions(self) -> set[str]:
        return {g for g in DB_GROUPS if self.serving(g)}

    def ownership(self) -> dict[str, str | None]:
        return {name: g.current_owner for name, g in sorted(self.groups.items())}


def resolve_connection(cs: ConnectionString | str, state: ClusterState) -> str:
    """Physical node currently hosting the group behind a virtual server name."""
    if isinstance(cs, str):
        cs = ConnectionString.parse(cs) if "=" in cs else ConnectionString(cs)
    server = cs.server.lower()
    if server not in state.virtual_names:
        raise UnknownVirtualName(cs.server)
    g = state.groups[state.virtual_names[server]]
    if g.state != "online" or g.current_owner is None:
        raise ServerNotFound(f"{cs.server}: server not found ({g.name} is {g.state})")
    return g.current_owner


class Cluster:
    def __init__(self, state: ClusterState, sim, model: FailoverModel | None = None):
        self.state = state
        self.sim = sim
        self.model = model or FailoverModel()
        self.records: list[FailoverRecord] = []

    # -- helpers -----------------------------------------------------------
    def _group(self, name: str) -> ResourceGroup:
        try:
            return self.state.groups[name]
        except KeyError:
            raise MoveRejected(f"unknown resource group {name!r}") from None

    def _node(self, node: str) -> NodeHealth:
        try:
            return self.state.nodes[node]
        except KeyError:
            raise MoveRejected(f"unknown node {node!r}") from None

    def pick_target(self, g: ResourceGroup, exclude: Iterable[str] = ()) -> str | None:
        exclude = set(exclude)
        for n in g.preferred_owners:
            if n not in exclude and self.state.nodes[n].heartbeating:
                return n
        return None

    def _open(self, g: ResourceGroup, t: int, category: str, cause: str, note: str) -> None:
        if g.partition and g.outage_key is None:
            g.outage_key = self.sim.open_outage(g.partition, t, category, cause, note)

    def _refresh(self, g: ResourceGroup, t: int) -> None:
        """Close the group's outage once it is online on a serving node."""
        if g.outage_key is not None and self.state.serving(g.name):
            self.sim.close_outage(g.outage_key, t)
            g.outage_key = None

    def _start_move(self, g: ResourceGroup, target: str, t: int, duration: int, planned: bool,
                    category: str, cause: str, note: str, detect_s: int = 0) -> FailoverRecord:
        source = g.current_owner or g.last_owner
        self._open(g, t, category, cause, note)
        if g.current_owner is not None:
            g.last_owner = g.current_owner
        g.state, g.current_owner, g.moving_to = "moving", None, target
        g.move_started, g.move_eta = t, t + duration
        g.move_token += 1
        rec = FailoverRecord(g.name, source, target, t, duration, planned, cause, detect_s)
        self.records.append(rec)
        self.sim.log(t, "move_start", group=g.name, src=source or "-", dst=target,
                     duration_s=duration, planned=planned, cause=cause)
        self.sim.schedule(t + duration, self._finish_move, g.name, g.move_token, module="cluster")
        return rec

    def _finish_move(self, t: int, name: str, token: int) -> None:
        g = self.state.groups[name]
        if token != g.move_token or g.state != "moving":
            return
        target = g.moving_to
        g.moving_to = g.move_eta = None
        if not self.state.nodes[target].heartbeating:
            g.state = "offline"
            self.sim.log(t, "move_failed", group=name, dst=target)
            self._failover_orphan(g, t, exclude=(target,))
            return
        g.state, g.current_owner = "online", target
        self.sim.log(t, "group_online", group=name, node=target)
        self._refresh(g, t)
        self.sim.placement_changed(t)

    def _failover_orphan(self, g: ResourceGroup, t: int, exclude: Iterable[str] = (),
                         duration: int | None = None, detect_s: int = 0) -> FailoverRecord | None:
        target = self.pick_target(g, exclude)
        if target is None:
            self.sim.log(t, "no_target", group=g.name)
            return None
        if duration is None:
            duration = self.model.sample(self.sim.rng)
        return self._start_move(g, target, t, duration, False, "unplanned", "hardware",
                                "automatic failover", detect_s)

    # -- operations --------------------------------------------------------
    def move_group(self, group: str, target: str, t: int, planned: bool = True, *,
                   duration: int | None = None, category: str | None = None,
                   cause: str = "operations", note: str = "") -> FailoverRecord:
        """Administrative move.  Moving a group onto its owner is a free no-op."""
        g = self._group(group)
        node = self._node(target)
        if g.state == "online" and g.current_owner == target:
            return FailoverRecord(group, target, target, t, 0, planned, cause)
        if node.status != "up":
            raise MoveRejected(f"{target} is {node.status}")
        if target not in g.preferred_owners:
            raise MoveRejected(f"{target} may not own {group}")
        if g.state != "online":
            raise MoveRejected(f"{group} is {g.state}")
        if duration is None:
            duration = self.model.sample(self.sim.rng)
        category = category or ("planned" if planned else "unplanned")
        return self._start_move(g, target, t, int(duration), planned, category, cause,
                                note or f"move {group} to {target}")

    def on_node_failure(self, node: str, t: int, *, category: str = "unplanned",
                        cause: str = "hardware", failover_s: int | None = None,
                        note: str = "") -> list[FailoverRecord]:
        """Heartbeat loss: after the detection delay each owned group moves to
        the first live node in its preferred-owner list."""
        n = self._node(node)
        if n.status == "down":
            return []
        n.status = "down"
        self.sim.log(t, "node_down", node=node, cause=cause)
        orphans = []
        for g in self.state.groups_on(node):
            g.state, g.last_owner, g.current_owner = "offline", node, None
            self._open(g, t, category, cause, note or f"{node} failed")
            orphans.append(g.name)
        detect = self.model.detection_delay_s
        planned_records = []
        for name in orphans:
            g = self.state.groups[name]
            duration = int(failover_s) if failover_s is not None else self.model.sample(self.sim.rng)
            target = self.pick_target(g, exclude=(node,))
            planned_records.append(FailoverRecord(name, node, target or "-", t + detect,
                                                  duration, False, cause, detect))
            self.sim.schedule(t + detect, self._detected, name, node, duration, module="cluster")
        self.sim.placement_changed(t)
        return planned_records

    def _detected(self, t: int, name: str, failed_node: str, duration: int) -> None:
        g = self.state.groups[name]
        if g.state != "offline" or g.current_owner is not None:
            return
        self._failover_orphan(g, t, exclude=(failed_node,), duration=duration,
                              detect_s=self.model.detection_delay_s)

    def node_up(self, node: str, t: int) -> None:
        n = self._node(node)
        n.status, n.last_heartbeat = "up", t
        self.sim.log(t, "node_up", node=node)
        for g in self.state.groups_on(node):
            self._refresh(g, t)
        for g in self.state.groups.values():
            if g.state == "offline" and g.current_owner is None and node in g.preferred_owners:
                self._start_move(g, node, t, self.model.sample(self.sim.rng), False,
                                 "unplanned", "hardware", f"recovered onto {node}")
        self.sim.placement_changed(t)

    def hang_node(self, node: str, t: int, detect_after: int, *, restart_s: int = 0,
                  resolution: str = "reboot", move_s: int | None = None,
                  category: str = "unplanned", cause: str = "software", note: str = "") -> list:
        """The node keeps heartbeating but serves nothing, so nothing fails over.
        An operator notices after `detect_after` seconds and reboots (or moves
        the groups off)."""
        n = self._node(node)
        if n.status != "up":
            raise MoveRejected(f"cannot hang {node}: it is {n.status}")
        n.status = "hung"
        self.sim.log(t, "node_hung", node=node, cause=cause)
        keys = []
        for g in self.state.groups_on(node):
            self._open(g, t, category, cause, note or f"{node} hung")
            keys.append(g.outage_key)
        self.sim.schedule(t + detect_after, self._resolve_hang, node, restart_s, resolution,
                          move_s, category, cause, module="cluster")
        return keys

    def _resolve_hang(self, t: int, node: str, restart_s: int, resolution: str,
                      move_s: int | None, category: str, cause: str) -> None:
        if self.state.nodes[node].status != "hung":
            return
        self.sim.log(t, "hang_detected", node=node, resolution=resolution)
        if resolution == "move":
            for g in self.state.groups_on(node):
                target = self.pick_target(g, exclude=(node,))
                if target is not None:
                    dur = int(move_s) if move_s is not None else self.model.sample(self.sim.rng)
                    self._start_move(g, target, t, dur,
                                     False, category, cause, f"operator moved {g.name} off hung {node}")
        self.reboot_node(node, t, restart_s, category=category, cause=cause)

    def reboot_node(self, node: str, t: int, duration: int, *, category: str = "planned",
                    cause: str = "operations", note: str = "") -> None:
        """Restart in place: owned groups stay put and are dark until it is back."""
        n = self._node(node)
        n.status = "restarting"
        self.sim.log(t, "node_restart", node=node, duration_s=duration)
        for g in self.state.groups_on(node):
            self._open(g, t, category, cause, note or f"{node} restart")
        self.sim.schedule(t + duration, self._restarted, node, module="cluster")

    def _restarted(self, t: int, node: str) -> None:
        if self.state.nodes[node].status in ("restarting", "down"):
            self.node_up(node, t)

    def patch_node(self, node: str, t: int, *, move_out_s: int | None = None,
                   patch_s: int = 1800, move_back_s: int | None = None,
                   category: str = "planned", cause: str = "software", note: str = "") -> list[FailoverRecord]:
        """Rolling maintenance: drain the node, work on it, move its groups home."""
        n = self._node(node)
        if n.status != "up":
            raise MoveRejected(f"cannot patch {node}: it is {n.status}")
        records, moved = [], []
        for g in self.state.groups_on(node):
            target = self.pick_target(g, exclude=(node,))
            if target is None:
                raise MoveRejected(f"no node can take {g.name} while {node} is patched")
            dur = int(move_out_s) if move_out_s is not None else self.model.sample(self.sim.rng)
            records.append(self._start_move(g, target, t, dur, True, category, cause,
                                            note or f"drain {node} for maintenance"))
            moved.append(g.name)
        drained = max((r.duration_s for r in records), default=0)
        n.status = "maintenance"
        self.sim.log(t, "maintenance_start", node=node, patch_s=patch_s)
        self.sim.schedule(t + drained + patch_s, self._patched, node, moved, move_back_s,
                          category, cause, note, module="cluster")
        return records

    def _patched(self, t: int, node: str, moved: list[str], move_back_s: int | None,
                 category: str, cause: str, note: str) -> None:
        self.state.nodes[node].status = "up"
        self.sim.log(t, "maintenance_end", node=node)
        for name in moved:
            g = self.state.groups[name]
            if g.state == "online" and g.current_owner != node:
                dur = int(move_back_s) if move_back_s is not None else self.model.sample(self.sim.rng)
                self._start_move(g, node, t, dur, True, category, cause,
                                 note or f"return {name} to {node}")
        self.sim.placement_changed(t)
