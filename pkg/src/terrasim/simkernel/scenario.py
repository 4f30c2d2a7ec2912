"""Scenario files: loading and validation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from terrasim.cluster import GROUPS
from terrasim.partition_router import PARTITIONS
from terrasim.simkernel.ledger import CATEGORIES, CAUSES, HOUR
from terrasim.topology import Topology, load_topology

SCHEMA_VERSION = 1

# action -> (module, default category, default cause)
ACTIONS: dict[str, tuple[str, str, str]] = {
    "fail_disk": ("storage", "unplanned", "hardware"),
    "replace_disk": ("storage", "planned", "firmware"),
    "fail_controller": ("storage", "unplanned", "hardware"),
    "fail_switch": ("storage", "unplanned", "hardware"),
    "fail_fabric": ("storage", "unplanned", "hardware"),
    "fail_hba": ("storage", "unplanned", "hardware"),
    "repair": ("storage", "planned", "firmware"),
    "fail_node": ("cluster", "unplanned", "hardware"),
    "hang_node": ("cluster", "unplanned", "software"),
    "reboot_node": ("cluster", "planned", "operations"),
    "move_group": ("cluster", "planned", "operations"),
    "password_reset": ("cluster", "planned", "operations"),
    "firmware_upgrade": ("cluster", "planned", "firmware"),
    "patch_node": ("cluster", "planned", "software"),
    "expand": ("cluster", "planned", "firmware"),
    "backup": ("backup", "planned", "operations"),
    "verify_restore": ("backup", "planned", "operations"),
    "fail_webserver": ("workload", "unplanned", "hardware"),
    "restore_webserver": ("workload", "planned", "operations"),
}
MODULE_PRIORITY = {"storage": 0, "cluster": 1, "backup": 2, "workload": 3}


class ScenarioError(ValueError):
    def __init__(self, errors: list[str], steps: list[int] | None = None, source: str = ""):
        self.errors = errors
        self.steps = sorted(set(steps or []))
        head = f"invalid scenario {source}".rstrip()
        super().__init__(head + ":\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass(frozen=True)
class ScenarioStep:
    t: int
    action: str
    target: tuple[str, ...] = ()
    params: Mapping[str, Any] = field(default_factory=dict)
    category: str = ""
    cause: str = ""
    note: str = ""

    @property
    def module(self) -> str:
        return ACTIONS[self.action][0]

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"t": self.t, "action": self.action}
        if self.target:
            d["target"] = self.target[0] if len(self.target) == 1 else list(self.target)
        if self.params:
            d["params"] = dict(self.params)
        d["category"], d["cause"] = self.category, self.cause
        if self.note:
            d["note"] = self.note
        return d


@dataclass(frozen=True)
class SimConfig:
    detection_delay_s: int = 10
    failover_min_s: int = 29
    failover_mode_s: int = 45
    failover_max_s: int = 90
    threshold: int = 2
    rebuild_s: int = 4 * HOUR
    owners: Mapping[str, str] = field(default_factory=dict)
    storage_calibration: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "SimConfig":
        d = dict(d or {})
        fo = d.pop("failover_s", {}) or {}
        rebuild = d.pop("rebuild_h", None)
        cfg = cls(**{k: v for k, v in d.items() if k != "rebuild_s"},
                  rebuild_s=int(d.get("rebuild_s", round((rebuild or 4) * HOUR))))
        if fo:
            cfg = cls(**{**cfg.__dict__, "failover_min_s": fo.get("min", 29),
                         "failover_mode_s": fo.get("mode", 45), "failover_max_s": fo.get("max", 90)})
        return cfg


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    horizon_s: int
    steps: tuple[ScenarioStep, ...] = ()
    topology: Any = "default"
    config: SimConfig = field(default_factory=SimConfig)
    backups: Mapping[str, Any] | None = None
    traffic: Mapping[str, Any] | None = None
    description: str = ""
    source: str = ""

    @property
    def horizon_h(self) -> float:
        return self.horizon_s / HOUR


def _targets(raw) -> tuple[str, ...]:
    if raw is None or raw == "":
        return ()
    if isinstance(raw, (list, tuple)):
        return tuple(str(x) for x in raw)
    return (str(raw),)


def _known_ids(topologies: list[Topology]) -> dict[str, set[str]]:
    ids: dict[str, set[str]] = {k: set() for k in
                                ("disk", "controller", "switch", "hba", "fabric", "node", "web")}
    for t in topologies:
        ids["disk"] |= t.disk_ids
        ids["controller"] |= set(t.controller_section)
        ids["switch"] |= {sw.id for f in t.fabrics for sw in f.switches}
        ids["hba"] |= {e for e in t.endpoint_switch if e.startswith("hba:")}
        ids["fabric"] |= {str(f.id) for f in t.fabrics}
        ids["node"] |= set(t.cluster_nodes)
        ids["web"] |= {s for servers in t.web_tier.sites.values() for s in servers}
    ids["group"] = set(GROUPS)
    ids["partition"] = set(PARTITIONS)
    ids["any-san"] = ids["controller"] | ids["switch"] | ids["hba"] | ids["fabric"]
    return ids


TARGET_KIND = {
    "fail_disk": "disk", "replace_disk": "disk", "fail_controller": "controller",
    "fail_switch": "switch", "fail_fabric": "fabric", "fail_hba": "hba", "repair": "any-san",
    "fail_node": "node", "hang_node": "node", "reboot_node": "node", "patch_node": "node",
    "password_reset": "node", "firmware_upgrade": "node", "expand": "node",
    "move_group": "group", "backup": "partition", "verify_restore": "partition",
    "fail_webserver": "web", "restore_webserver": "web",
}
# actions whose target may be omitted
OPTIONAL_TARGET = {"password_reset", "firmware_upgrade", "expand"}


def scenario_from_dict(d: Mapping, source: str = "", base_dir: str = ".") -> Scenario:
    errors: list[str] = []
    bad_steps: list[int] = []
    if d.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"schema_version must be {SCHEMA_VERSION}, got {d.get('schema_version')!r}")
    if "horizon_s" in d:
        horizon_s = d["horizon_s"]
    elif "horizon_h" in d:
        horizon_s = round(float(d["horizon_h"]) * HOUR) if isinstance(d["horizon_h"], (int, float)) else None
    else:
        horizon_s = None
    if not isinstance(horizon_s, int) or isinstance(horizon_s, bool) or horizon_s <= 0:
        errors.append("horizon must be a positive number (horizon_h or horizon_s)")
        horizon_s = 0
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append(f"seed must be an integer, got {seed!r}")
        seed = 0

    def resolve(ref):
        if isinstance(ref, str) and ref not in ("default", "initial") and not os.path.isabs(ref):
            return os.path.join(base_dir, ref)
        if isinstance(ref, Mapping) and "file" in ref and not os.path.isabs(ref["file"]):
            return {"file": os.path.join(base_dir, ref["file"])}
        return ref

    topo_ref = resolve(d.get("topology", "default"))
    topologies: list[Topology] = []
    try:
        topologies.append(load_topology(topo_ref))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        errors.append(f"topology {topo_ref!r} cannot be loaded: {exc}")

    try:
        config = SimConfig.from_dict(d.get("config"))
        if config.threshold not in (2, 3):
            errors.append("config.threshold must be 2 or 3")
    except TypeError as exc:
        errors.append(f"bad config: {exc}")
        config = SimConfig()

    raw_steps = d.get("steps", [])
    if not isinstance(raw_steps, list):
        errors.append("steps must be a list")
        raw_steps = []
    steps: list[ScenarioStep] = []
    for i, s in enumerate(raw_steps):
        msgs = []
        if not isinstance(s, Mapping):
            errors.append(f"step {i}: not an object")
            bad_steps.append(i)
            continue
        action = s.get("action")
        t = s.get("t")
        if action not in ACTIONS:
            msgs.append(f"unknown action {action!r}")
        if not isinstance(t, int) or isinstance(t, bool) or t < 0:
            msgs.append(f"t must be a non-negative integer of seconds, got {t!r}")
            t = 0
        _, dcat, dcause = ACTIONS.get(action, ("", "planned", "operations"))
        category = s.get("category", dcat)
        cause = s.get("cause", dcause)
        if category not in CATEGORIES:
            msgs.append(f"category {category!r} not in {CATEGORIES}")
        if cause not in CAUSES:
            msgs.append(f"cause {cause!r} not in {CAUSES}")
        params = s.get("params", {}) or {}
        if not isinstance(params, Mapping):
            msgs.append("params must be an object")
            params = {}
        if action == "expand" and params.get("topology") is not None:
            try:
                topologies.append(load_topology(resolve(params["topology"])))
            except (OSError, ValueError, KeyError, TypeError) as exc:
                msgs.append(f"expansion topology cannot be loaded: {exc}")
        if action == "move_group" and "to" not in params:
            msgs.append("move_group needs params.to")
        if action == "hang_node" and "detect_after_s" not in params:
            msgs.append("hang_node needs params.detect_after_s")
        if action == "password_reset" and not isinstance(params.get("correct", True), bool):
            msgs.append("password_reset params.correct must be a boolean")
        if action == "password_reset" and params.get("correct") is False and not s.get("target"):
            msgs.append("an incorrect password_reset needs a target node")
        if action == "firmware_upgrade" and "outage_s" not in params and "outage_h" not in params:
            msgs.append("firmware_upgrade needs params.outage_h or params.outage_s")
        step = ScenarioStep(t, action, _targets(s.get("target")), dict(params),
                            category, cause, str(s.get("note", "")))
        if not step.target and action in ACTIONS and action not in OPTIONAL_TARGET:
            msgs.append("missing target")
        if steps and t < steps[-1].t:
            msgs.append(f"t={t} is earlier than the previous step (t={steps[-1].t}); steps must be sorted")
        steps.append(step)
        if msgs:
            bad_steps.append(i)
            errors.extend(f"step {i} ({action}): {m}" for m in msgs)

    if topologies:
        ids = _known_ids(topologies)
        for i, st in enumerate(steps):
            kind = TARGET_KIND.get(st.action)
            for tgt in st.target if kind else ():
                if tgt not in ids[kind]:
                    bad_steps.append(i)
                    errors.append(f"step {i} ({st.action}): unknown {kind} {tgt!r}")
            to = st.params.get("to")
            if st.action == "move_group" and to is not None and to not in ids["node"]:
                bad_steps.append(i)
                errors.append(f"step {i} (move_group): unknown node {to!r}")

    if errors:
        raise ScenarioError(errors, bad_steps, source)
    return Scenario(name=str(d.get("name", os.path.splitext(os.path.basename(source))[0] or "scenario")),
                    seed=seed, horizon_s=horizon_s, steps=tuple(steps), topology=topo_ref,
                    config=config, backups=d.get("backups"), traffic=d.get("traffic"),
                    description=str(d.get("description", "")), source=source)


def load_scenario(src: str | os.PathLike | Mapping) -> Scenario:
    """Parse and validate a scenario from a path or an already-decoded dict.

    Raises FileNotFoundError for a missing path and ScenarioError otherwise.
    """
    if isinstance(src, Mapping):
        return scenario_from_dict(src)
    path = os.fspath(src)
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"not valid JSON: {exc}"], source=path) from exc
    if not isinstance(data, Mapping):
        raise ScenarioError(["top level must be an object"], source=path)
    return scenario_from_dict(data, source=path, base_dir=os.path.dirname(os.path.abspath(path)))
