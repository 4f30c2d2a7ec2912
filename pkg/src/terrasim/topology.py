"""Static description of the cluster, SAN, LANs, web tier and tape library.

Two builders are provided: the final four-rack, three-fabric configuration
and the three-rack, two-fabric configuration the cluster started with.
Everything here is immutable; other modules only read it.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from terrasim.backup import TapeLibrarySpec
from terrasim.partition_router import PartitionMap

TOPOLOGY_VERSION = 1

FAST = "fast-18GB-15k"
SLOW = "slow-73GB-10k"
DISK_CLASSES = {FAST: (18, 15_000), SLOW: (73, 10_000)}

SECTIONS = ("top", "mid", "bottom")
DATA_FABRICS = (1, 2)
TAPE_FABRIC = 3
SWITCH_PORTS = 16
LANS = ("HBLAN", "BELAN", "FELAN", "CORPNET")
CLUSTER_LANS = frozenset({"HBLAN", "BELAN", "CORPNET"})
CLUSTER_NODES = ("SQL-1", "SQL-2", "SQL-3", "SQL-4")
HTML_SITE = "terraserver-usa.com"
SOAP_SITE = "terraservice.net"
FRONT_SWITCHES = ("summit7i-a", "summit7i-b")

# rack -> (partition, meta volume, two mid volumes, two bottom volumes)
RACK_LAYOUT = {
    1: ("DRG_DB", "E", ("F", "G"), ("H", "I")),
    2: ("DOQ_0", "J", ("K", "L"), ("M", "N")),
    3: ("DOQ_1", "O", ("P", "Q"), ("R", "S")),
}
# fourth rack: one 678 GB imagery volume per section, one per partition
RACK4_LAYOUT = {"top": ("T", "DRG_DB"), "mid": ("U", "DOQ_0"), "bottom": ("V", "DOQ_1")}

# Exposed capacities as the controllers reported them (formatting overhead
# makes these smaller than the raw mirror-set arithmetic).
META_VOLUME_GB = 102
IMAGERY_VOLUME_GB = 339
LARGE_VOLUME_GB = 678


@dataclass(frozen=True)
class NodeSpec:
    id: str
    cpu_count: int
    role: str  # "cluster-db" | "web"
    hba_ports: tuple[int, ...] = ()
    lan_memberships: tuple[str, ...] = ()


@dataclass(frozen=True)
class SwitchSpec:
    id: str
    fabric: int
    endpoints: tuple[str, ...]
    links: tuple[str, ...] = ()
    ports: int = SWITCH_PORTS

    @property
    def ports_used(self) -> int:
        # an inter-switch link takes one port on each end
        return len(self.endpoints) + len(self.links)


@dataclass(frozen=True)
class FabricSpec:
    id: int
    switches: tuple[SwitchSpec, ...]
    purpose: str = "data"  # "data" | "tape"

    @property
    def endpoints(self) -> tuple[str, ...]:
        return tuple(e for sw in self.switches for e in sw.endpoints)


@dataclass(frozen=True)
class DiskSpec:
    id: str
    disk_class: str

    @property
    def capacity_gb(self) -> int:
        return DISK_CLASSES[self.disk_class][0]


@dataclass(frozen=True)
class ShelfSectionSpec:
    rack_id: int
    section: str
    controller_pair: tuple[str, ...]
    disks: tuple[DiskSpec, ...]
    disk_class: str

    @property
    def id(self) -> str:
        return f"R{self.rack_id}-{self.section}"


@dataclass(frozen=True)
class VolumeSpec:
    id: str
    disk_class: str
    mirror_sets: tuple[tuple[str, ...], ...]
    exposed_capacity_gb: int
    partition: str
    content_role: str  # "meta" | "imagery"
    section: str

    @property
    def stripe_width(self) -> int:
        return len(self.mirror_sets)

    @property
    def disks(self) -> tuple[str, ...]:
        return tuple(d for ms in self.mirror_sets for d in ms)


@dataclass(frozen=True)
class LanSpec:
    id: str
    redundant: bool
    members: tuple[str, ...]


@dataclass(frozen=True)
class WebTierSpec:
    sites: Mapping[str, tuple[str, ...]]
    switch_assignment: Mapping[str, str]


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}: {self.subject}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class Topology:
    name: str
    nodes: tuple[NodeSpec, ...]
    fabrics: tuple[FabricSpec, ...]
    sections: tuple[ShelfSectionSpec, ...]
    volumes: tuple[VolumeSpec, ...]
    lans: tuple[LanSpec, ...]
    web_tier: WebTierSpec
    tape_library: TapeLibrarySpec | None = None
    partition_map: PartitionMap = field(default_factory=PartitionMap)

    # -- lookups ---------------------------------------------------------
    @cached_property
    def _nodes(self) -> dict[str, NodeSpec]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _volumes(self) -> dict[str, VolumeSpec]:
        return {v.id: v for v in self.volumes}

    @cached_property
    def _sections(self) -> dict[str, ShelfSectionSpec]:
        return {s.id: s for s in self.sections}

    @cached_property
    def _fabrics(self) -> dict[int, FabricSpec]:
        return {f.id: f for f in self.fabrics}

    @cached_property
    def _switches(self) -> dict[str, SwitchSpec]:
        return {sw.id: sw for f in self.fabrics for sw in f.switches}

    @cached_property
    def endpoint_switch(self) -> dict[str, str]:
        return {e: sw.id for f in self.fabrics for sw in f.switches for e in sw.endpoints}

    @cached_property
    def disk_ids(self) -> frozenset[str]:
        return frozenset(d.id for s in self.sections for d in s.disks)

    @cached_property
    def controller_section(self) -> dict[str, str]:
        return {c: s.id for s in self.sections for c in s.controller_pair}

    def node(self, node_id: str) -> NodeSpec:
        return self._nodes[node_id]

    def volume(self, volume_id: str) -> VolumeSpec:
        return self._volumes[volume_id]

    def section(self, section_id: str) -> ShelfSectionSpec:
        return self._sections[section_id]

    def fabric(self, fabric_id: int) -> FabricSpec:
        return self._fabrics[fabric_id]

    def switch(self, switch_id: str) -> SwitchSpec:
        return self._switches[switch_id]

    @property
    def cluster_nodes(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.role == "cluster-db")

    @property
    def data_fabrics(self) -> tuple[FabricSpec, ...]:
        return tuple(f for f in self.fabrics if f.purpose == "data")

    def volumes_for(self, partition: str) -> tuple[VolumeSpec, ...]:
        return tuple(v for v in self.volumes if v.partition == partition)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "topology_version": TOPOLOGY_VERSION,
            "name": self.name,
            "nodes": [{"id": n.id, "cpu_count": n.cpu_count, "role": n.role,
                       "hba_ports": list(n.hba_ports),
                       "lan_memberships": sorted(n.lan_memberships)} for n in self.nodes],
            "fabrics": [{"id": f.id, "purpose": f.purpose,
                         "switches": [{"id": s.id, "ports": s.ports,
                                       "endpoints": list(s.endpoints),
                                       "links": list(s.links)} for s in f.switches]}
                        for f in self.fabrics],
            "sections": [{"rack_id": s.rack_id, "section": s.section,
                          "controller_pair": list(s.controller_pair),
                          "disk_class": s.disk_class,
                          "disks": [{"id": d.id, "disk_class": d.disk_class} for d in s.disks]}
                         for s in self.sections],
            "volumes": [{"id": v.id, "disk_class": v.disk_class,
                         "mirror_sets": [list(m) for m in v.mirror_sets],
                         "stripe_width": v.stripe_width,
                         "exposed_capacity_gb": v.exposed_capacity_gb,
                         "partition": v.partition, "content_role": v.content_role,
                         "section": v.section} for v in self.volumes],
            "lans": [{"id": l.id, "redundant": l.redundant, "members": list(l.members)}
                     for l in self.lans],
            "web_tier": {"sites": {k: list(v) for k, v in self.web_tier.sites.items()},
                         "switch_assignment": dict(self.web_tier.switch_assignment)},
            "tape_library": self.tape_library.to_dict() if self.tape_library else None,
            "partition_map": self.partition_map.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "Topology":
        version = d.get("topology_version")
        if version != TOPOLOGY_VERSION:
            raise ValueError(f"unsupported topology_version {version!r}")
        return cls(
            name=d["name"],
            nodes=tuple(NodeSpec(n["id"], int(n["cpu_count"]), n["role"],
                                 tuple(n["hba_ports"]), tuple(n["lan_memberships"]))
                        for n in d["nodes"]),
            fabrics=tuple(FabricSpec(int(f["id"]),
                                     tuple(SwitchSpec(s["id"], int(f["id"]), tuple(s["endpoints"]),
                                                      tuple(s["links"]), int(s["ports"]))
                                           for s in f["switches"]),
                                     f["purpose"]) for f in d["fabrics"]),
            sections=tuple(ShelfSectionSpec(int(s["rack_id"]), s["section"],
                                            tuple(s["controller_pair"]),
                                            tuple(DiskSpec(x["id"], x["disk_class"]) for x in s["disks"]),
                                            s["disk_class"]) for s in d["sections"]),
            volumes=tuple(VolumeSpec(v["id"], v["disk_class"],
                                     tuple(tuple(m) for m in v["mirror_sets"]),
                                     int(v["exposed_capacity_gb"]), v["partition"],
                                     v["content_role"], v["section"]) for v in d["volumes"]),
            lans=tuple(LanSpec(l["id"], bool(l["redundant"]), tuple(l["members"])) for l in d["lans"]),
            web_tier=WebTierSpec({k: tuple(v) for k, v in d["web_tier"]["sites"].items()},
                                 dict(d["web_tier"]["switch_assignment"])),
            tape_library=TapeLibrarySpec.from_dict(d["tape_library"]) if d.get("tape_library") else None,
            partition_map=PartitionMap.from_dict(d["partition_map"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# builders

def _section(rack: int, name: str, disk_class: str, n_disks: int) -> ShelfSectionSpec:
    tag = f"R{rack}{name[0].upper()}"
    disks = tuple(DiskSpec(f"{tag}-D{i + 1:02d}", disk_class) for i in range(n_disks))
    return ShelfSectionSpec(rack, name, (f"HSG-{tag}-A", f"HSG-{tag}-B"), disks, disk_class)


def _mirror_sets(disks: Iterable[DiskSpec], n_sets: int) -> tuple[tuple[str, ...], ...]:
    ids = [d.id for d in disks][: 3 * n_sets]
    return tuple(tuple(ids[3 * i: 3 * i + 3]) for i in range(n_sets))


def _storage(racks: int) -> tuple[tuple[ShelfSectionSpec, ...], tuple[VolumeSpec, ...]]:
    sections, volumes = [], []
    for rack in range(1, min(racks, 3) + 1):
        partition, meta, mid, bottom = RACK_LAYOUT[rack]
        top = _section(rack, "top", FAST, 18)
        sections.append(top)
        volumes.append(VolumeSpec(meta, FAST, _mirror_sets(top.disks, 6), META_VOLUME_GB,
                                  partition, "meta", top.id))
        for name, letters in (("mid", mid), ("bottom", bottom)):
            sec = _section(rack, name, SLOW, 30)
            sections.append(sec)
            for i, letter in enumerate(letters):
                volumes.append(VolumeSpec(letter, SLOW, _mirror_sets(sec.disks[15 * i:], 5),
                                          IMAGERY_VOLUME_GB, partition, "imagery", sec.id))
    if racks >= 4:
        for name in SECTIONS:
            sec = _section(4, name, SLOW, 30)
            sections.append(sec)
            letter, partition = RACK4_LAYOUT[name]
            volumes.append(VolumeSpec(letter, SLOW, _mirror_sets(sec.disks, 10), LARGE_VOLUME_GB,
                                      partition, "imagery", sec.id))
    volumes.sort(key=lambda v: v.id)
    return tuple(sections), tuple(volumes)


def _chain(fabric: int, endpoints: list[str], n_switches: int) -> tuple[SwitchSpec, ...]:
    """Spread endpoints evenly over a linear chain of switches."""
    ids = [f"f{fabric}-sw{i + 1}" for i in range(n_switches)]
    per, extra = divmod(len(endpoints), n_switches)
    switches, pos = [], 0
    for i, sid in enumerate(ids):
        take = per + (1 if i < extra else 0)
        links = tuple(x for x in (ids[i - 1] if i else None,
                                  ids[i + 1] if i + 1 < n_switches else None) if x)
        switches.append(SwitchSpec(sid, fabric, tuple(endpoints[pos: pos + take]), links))
        pos += take
    return tuple(switches)


def _build(name: str, racks: int, switches_per_fabric: int, tape: bool) -> Topology:
    sections, volumes = _storage(racks)
    hba = DATA_FABRICS + ((TAPE_FABRIC,) if tape else ())
    nodes = [NodeSpec(n, 8, "cluster-db", hba, tuple(sorted(CLUSTER_LANS))) for n in CLUSTER_NODES]

    html = tuple(f"web-html-{i + 1}" for i in range(6))
    soap = tuple(f"web-soap-{i + 1}" for i in range(4))
    assignment = {}
    for servers in (html, soap):
        for i, s in enumerate(servers):
            assignment[s] = FRONT_SWITCHES[i % 2]
    nodes += [NodeSpec(s, 2, "web", (), ("BELAN", "FELAN")) for s in html + soap]

    fabrics = []
    for f in DATA_FABRICS:
        endpoints = [f"hba:{n}:f{f}" for n in CLUSTER_NODES]
        endpoints += [f"ctl:{c}:f{f}" for s in sections for c in s.controller_pair]
        fabrics.append(FabricSpec(f, _chain(f, endpoints, switches_per_fabric), "data"))
    library = None
    if tape:
        library = TapeLibrarySpec()
        endpoints = [f"hba:{n}:f{TAPE_FABRIC}" for n in CLUSTER_NODES] + list(library.ports)
        fabrics.append(FabricSpec(TAPE_FABRIC, _chain(TAPE_FABRIC, endpoints, 1), "tape"))

    web = html + soap
    lans = (
        LanSpec("HBLAN", True, CLUSTER_NODES),
        LanSpec("BELAN", True, CLUSTER_NODES + web),
        LanSpec("FELAN", True, web),
        LanSpec("CORPNET", False, CLUSTER_NODES),
    )
    return Topology(name, tuple(nodes), tuple(fabrics), sections, volumes, lans,
                    WebTierSpec({HTML_SITE: html, SOAP_SITE: soap}, assignment), library)


@lru_cache(maxsize=None)
def build_default_topology() -> Topology:
    """Final configuration: 4 racks, fabrics 1-2 with 3 switches each, tape fabric 3."""
    return _build("default", racks=4, switches_per_fabric=3, tape=True)


@lru_cache(maxsize=None)
def build_initial_topology() -> Topology:
    """Pre-expansion configuration: 3 racks, 2 data fabrics, no SAN tape library."""
    return _build("initial", racks=3, switches_per_fabric=2, tape=False)


def load_topology(ref: str | Mapping) -> Topology:
    """Resolve "default", "initial", a JSON path, or an inline dict."""
    if isinstance(ref, Mapping):
        if "file" in ref:
            ref = ref["file"]
        else:
            return Topology.from_dict(ref)
    if ref == "default":
        return build_default_topology()
    if ref == "initial":
        return build_initial_topology()
    with open(ref, encoding="utf-8") as fh:
        return Topology.from_json(fh.read())


# ---------------------------------------------------------------------------
# validation

def validate_topology(t: Topology) -> list[Violation]:
    out: list[Violation] = []
    disk_section = {d.id: s.id for s in t.sections for d in s.disks}
    section_class = {s.id: s.disk_class for s in t.sections}

    # disks and mirror sets
    owner: dict[str, str] = {}
    for v in t.volumes:
        for i, ms in enumerate(v.mirror_sets):
            if len(ms) != 3:
                out.append(Violation("MirrorSetSize", f"{v.id}[{i}]", f"{len(ms)} disks"))
            for d in ms:
                if d in owner:
                    out.append(Violation("SharedDisk", d, f"{owner[d]} and {v.id}[{i}]"))
                owner[d] = f"{v.id}[{i}]"
                if d not in disk_section:
                    out.append(Violation("UnknownDisk", d, v.id))
        spans = {disk_section[d] for d in v.disks if d in disk_section}
        if len(spans) > 1:
            out.append(Violation("VolumeSpansSections", v.id, ",".join(sorted(spans))))
        actual = {section_class[s] for s in spans}
        if v.content_role == "meta" and (v.disk_class != FAST or actual - {FAST}):
            out.append(Violation("MetaOnSlowDisk", v.id))
        if v.content_role == "imagery" and (v.disk_class != SLOW or actual - {SLOW}):
            out.append(Violation("ImageryOnFastDisk", v.id))

    # partitions: one meta volume each
    for p in (t.partition_map.drg, t.partition_map.doq_even, t.partition_map.doq_odd):
        metas = [v.id for v in t.volumes_for(p) if v.content_role == "meta"]
        if len(metas) != 1:
            out.append(Violation("PartitionLayout", p, f"{len(metas)} meta volumes"))

    # switch port capacity and fabric roles
    for f in t.fabrics:
        for sw in f.switches:
            if sw.ports_used > sw.ports:
                out.append(Violation("PortOverflow", sw.id, f"{sw.ports_used} > {sw.ports} ports"))
        if f.purpose == "tape" and any(e.startswith("ctl:") for e in f.endpoints):
            out.append(Violation("TapeFabric", f"fabric {f.id}", "carries disk-controller traffic"))
        if f.purpose == "data" and any(e.startswith("tape:") for e in f.endpoints):
            out.append(Violation("TapeFabric", f"fabric {f.id}", "tape port on a data fabric"))
    counts = Counter(e for f in t.fabrics for e in f.endpoints)
    for e, c in sorted(counts.items()):
        if c > 1:
            out.append(Violation("DuplicateEndpoint", e))

    # redundant paths: controllers and hosts on every data fabric
    data_ids = [f.id for f in t.data_fabrics]
    attached = set(t.endpoint_switch)
    if len(data_ids) < 2:
        out.append(Violation("MissingRedundantPath", "SAN", f"{len(data_ids)} data fabric(s)"))
    for s in t.sections:
        if len(s.controller_pair) != 2:
            out.append(Violation("ControllerCount", s.id, f"{len(s.controller_pair)} controllers"))
        for c in s.controller_pair:
            for f in data_ids:
                if f"ctl:{c}:f{f}" not in attached:
                    out.append(Violation("MissingRedundantPath", c, f"not on fabric {f}"))
    for n in t.nodes:
        if n.role != "cluster-db":
            continue
        on = [f for f in n.hba_ports if f in data_ids]
        if len(on) < 2:
            out.append(Violation("MissingRedundantPath", n.id, f"{len(on)} data fabric HBA(s)"))
        for f in n.hba_ports:
            if f"hba:{n.id}:f{f}" not in attached:
                out.append(Violation("MissingRedundantPath", n.id, f"HBA for fabric {f} not cabled"))
        missing = CLUSTER_LANS - set(n.lan_memberships)
        if missing:
            out.append(Violation("LanMembership", n.id, "missing " + ",".join(sorted(missing))))

    for lan in t.lans:
        if lan.redundant != (lan.id != "CORPNET"):
            out.append(Violation("LanRedundancy", lan.id,
                                 "CORPNET must be the only non-redundant LAN"))

    # web tier: each site evenly split across the two front-end switches
    for site, servers in t.web_tier.sites.items():
        per = defaultdict(int)
        for s in servers:
            per[t.web_tier.switch_assignment.get(s)] += 1
        if set(per) - set(FRONT_SWITCHES) or abs(per[FRONT_SWITCHES[0]] - per[FRONT_SWITCHES[1]]) > 1:
            out.append(Violation("WebTierSplit", site, dict(per).__repr__()))
    return out
