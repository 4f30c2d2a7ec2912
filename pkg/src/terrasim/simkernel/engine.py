"""Deterministic discrete-event engine.

Events are ordered by (time, originating step index, module priority,
insertion order).  Derived events inherit the step index and the
(category, cause) context of whatever scheduled them, so an automatic
failover is charged to the fault that triggered it.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from terrasim import backup as bk
from terrasim.cluster import Cluster, ClusterState, FailoverModel, FailoverRecord, MoveRejected
from terrasim.partition_router import PARTITIONS
from terrasim.simkernel.ledger import DowntimeLedger, Interval
from terrasim.simkernel.report import AvailabilityReport, build_report
from terrasim.simkernel.scenario import MODULE_PRIORITY, Scenario, ScenarioStep, load_scenario
from terrasim.storage import InvalidTransition, SanFaults, StorageState, tape_path_ok
from terrasim.topology import Topology, load_topology
from terrasim.workload import KIND_GAZETTEER, generate, web_states

# derived events that no step caused (weekly backups) sort after every step
NO_STEP = 1 << 30


@dataclass
class WebOutage:
    site: str
    start: int
    end: int | None = None


@dataclass
class RestoreTest:
    t: int
    partition: str
    result: str


@dataclass
class SimResult:
    scenario: Scenario
    seed: int
    threshold: int
    ledger: DowntimeLedger
    report: AvailabilityReport
    events: list[str]
    failovers: list[FailoverRecord]
    backups: list[bk.BackupJob]
    restores: list[RestoreTest] = field(default_factory=list)
    web_outages: list[WebOutage] = field(default_factory=list)
    traffic: dict | None = None

    def events_text(self) -> str:
        return "".join(e + "\n" for e in self.events)

    def failovers_csv(self) -> str:
        rows = [",".join(FailoverRecord.CSV_HEADER)]
        rows += [",".join(str(x) for x in r.csv_row()) for r in self.failovers]
        return "\n".join(rows) + "\n"

    def backups_csv(self) -> str:
        return bk.backup_report_csv(self.backups)


class Simulation:
    def __init__(self, scenario: Scenario, *, seed: int | None = None, threshold: int | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else int(seed)
        self.rng = random.Random(self.seed)
        cfg = scenario.config
        self.threshold = threshold or cfg.threshold
        self.horizon_s = scenario.horizon_s
        self.topology: Topology = load_topology(scenario.topology)
        self.storage = StorageState(self.topology, self.threshold, cfg.rebuild_s)
        model = FailoverModel(cfg.failover_min_s, cfg.failover_mode_s, cfg.failover_max_s,
                              cfg.detection_delay_s)
        self.cluster = Cluster(ClusterState.default(self.topology, cfg.owners), self, model)
        self.web = web_states(self.topology)

        self.events: list[str] = []
        self.intervals: list[Interval] = []
        self._open: dict[int, tuple] = {}
        self._next_key = 0
        self._queue: list[tuple] = []
        self._seq = 0
        self._origin = NO_STEP
        self._ctx = ("unplanned", "hardware")
        self._storage_outage: dict[str, int] = {}
        self.backup_jobs: list[bk.BackupJob] = []
        self._running: list[bk.BackupJob] = []
        self.restores: list[RestoreTest] = []
        self.web_outages: list[WebOutage] = []

    # -- kernel surface used by the component models -----------------------
    def schedule(self, t: int, fn: Callable, *args, module: str = "cluster") -> None:
        self._seq += 1
        heapq.heappush(self._queue, (int(t), self._origin, MODULE_PRIORITY[module], self._seq,
                                     fn, args, self._ctx))

    def log(self, t: int, kind: str, **fields: Any) -> int:
        # values never contain spaces so every line splits cleanly into k=v pairs
        body = " ".join(f"{k}={str(v).replace(' ', '_')}" for k, v in fields.items())
        self.events.append(f"{t}\t{kind}\t{body}".rstrip())
        return len(self.events) - 1

    def open_outage(self, partition: str, t: int, category: str, cause: str, note: str = "") -> int:
        key = self._next_key
        self._next_key += 1
        eid = self.log(t, "outage_open", key=key, partition=partition, category=category,
                       cause=cause, note=note or "-")
        self._open[key] = (partition, t, category, cause, note, eid)
        return key

    def close_outage(self, key: int, t: int) -> None:
        partition, start, category, cause, note, eid = self._open.pop(key)
        self.log(t, "outage_close", key=key, partition=partition, seconds=t - start)
        self.intervals.append(Interval(start, t, partition, category, cause, note, eid))

    def placement_changed(self, t: int) -> None:
        self._check_storage(t)

    # -- storage-caused outages --------------------------------------------
    def _check_storage(self, t: int) -> None:
        st = self.cluster.state
        for p in PARTITIONS:
            g = st.groups[p]
            if g.state != "online" or g.current_owner is None:
                continue  # re-checked when the move completes
            problem = self.storage.partition_problem(p, g.current_owner)
            key = self._storage_outage.get(p)
            if problem and key is None:
                cat, cause = self._ctx
                self._storage_outage[p] = self.open_outage(p, t, cat, cause, problem)
            elif not problem and key is not None:
                self.close_outage(self._storage_outage.pop(p), t)

    def _timed_outage(self, partitions, t: int, end: int, category: str, cause: str, note: str) -> None:
        if end <= t:
            return
        for p in partitions:
            key = self.open_outage(p, t, category, cause, note)
            self.schedule(end, self._close_key, key, module="cluster")

    def _close_key(self, t: int, key: int) -> None:
        self.close_outage(key, t)

    # -- main loop ---------------------------------------------------------
    def run(self) -> SimResult:
        self.log(0, "start", scenario=self.scenario.name, seed=self.seed,
                 threshold=self.threshold, horizon_s=self.horizon_s, topology=self.topology.name)
        for i, step in enumerate(self.scenario.steps):
            self._origin, self._ctx = i, (step.category, step.cause)
            self.schedule(step.t, self._apply, step, module=step.module)
        self._origin = NO_STEP
        self._schedule_backups()
        while self._queue:
            t, origin, _, _, fn, args, ctx = heapq.heappop(self._queue)
            if t >= self.horizon_s:
                break
            self._origin, self._ctx = origin, ctx
            fn(t, *args)
            self._check_storage(t)
        for key in sorted(self._open):
            self.close_outage(key, self.horizon_s)
        for w in self.web_outages:
            if w.end is None:
                w.end = self.horizon_s
        self.log(self.horizon_s, "end", open_queue=len(self._queue))

        ledger = DowntimeLedger(self.horizon_s)
        for iv in sorted(self.intervals):
            ledger.add(iv)
        meta = {"scenario": self.scenario.name, "seed": self.seed, "threshold": self.threshold}
        report = build_report(ledger, meta)
        traffic = self._traffic(ledger) if self.scenario.traffic else None
        return SimResult(self.scenario, self.seed, self.threshold, ledger, report, self.events,
                         list(self.cluster.records), self.backup_jobs, self.restores,
                         self.web_outages, traffic)

    # -- step dispatch -----------------------------------------------------
    def _apply(self, t: int, step: ScenarioStep) -> None:
        self.log(t, "step", action=step.action, target=",".join(step.target) or "-",
                 category=step.category, cause=step.cause)
        try:
            getattr(self, f"_do_{step.action}")(t, step)
        except (MoveRejected, InvalidTransition) as exc:
            # an operator action that makes no sense in the current state is
            # refused, the way the real console would, and the run goes on
            self.log(t, "step_rejected", action=step.action, reason=exc)

    def _p(self, step: ScenarioStep, name: str, default=None):
        return step.params.get(name, default)

    def _do_fail_disk(self, t, step):
        for d in step.target:
            self.storage.fail_disk(d, t)
            self.log(t, "disk_failed", disk=d)
            if self._p(step, "replace_after_s") is not None:
                self.schedule(t + int(step.params["replace_after_s"]), self._replace, d, module="storage")

    def _do_replace_disk(self, t, step):
        for d in step.target:
            self._replace(t, d)

    def _replace(self, t: int, disk: str) -> None:
        st = self.storage.replace_disk(disk, t)
        self.log(t, "disk_rebuilding", disk=disk, eta=st.rebuild_eta)
        self.schedule(st.rebuild_eta, self._rebuilt, disk, module="storage")

    def _rebuilt(self, t: int, disk: str) -> None:
        self.storage.finish_rebuild(disk, t)
        self.log(t, "disk_healthy", disk=disk)

    def _san_fault(self, t, step, kind: str) -> None:
        faults: SanFaults = self.storage.faults
        for x in step.target:
            if kind == "fabrics":
                faults.fabrics.add(int(x))
            else:
                getattr(faults, kind).add(x)
            self.log(t, "san_fault", component=x)
            if self._p(step, "repair_after_s") is not None:
                self.schedule(t + int(step.params["repair_after_s"]), self._repair, x, module="storage")
        self._check_running_backups(t)

    def _do_fail_controller(self, t, step):
        self._san_fault(t, step, "controllers")

    def _do_fail_switch(self, t, step):
        self._san_fault(t, step, "switches")

    def _do_fail_fabric(self, t, step):
        self._san_fault(t, step, "fabrics")

    def _do_fail_hba(self, t, step):
        self._san_fault(t, step, "hbas")

    def _do_repair(self, t, step):
        for x in step.target:
            self._repair(t, x)

    def _repair(self, t: int, component: str) -> None:
        f = self.storage.faults
        f.switches.discard(component)
        f.controllers.discard(component)
        f.hbas.discard(component)
        if component.isdigit():
            f.fabrics.discard(int(component))
        self.log(t, "san_repaired", component=component)

    def _do_fail_node(self, t, step):
        fo = self._p(step, "failover_s")
        for node in step.target:
            self.cluster.on_node_failure(node, t, category=step.category, cause=step.cause,
                                         failover_s=fo, note=step.note)
            if self._p(step, "recover_after_s") is not None:
                self.schedule(t + int(step.params["recover_after_s"]), self._node_up, node,
                              module="cluster")
        self._check_running_backups(t)

    def _node_up(self, t: int, node: str) -> None:
        if self.cluster.state.nodes[node].status == "down":
            self.cluster.node_up(node, t)

    def _do_hang_node(self, t, step):
        for node in step.target:
            self.cluster.hang_node(node, t, int(step.params["detect_after_s"]),
                                   restart_s=int(self._p(step, "restart_s", 0)),
                                   resolution=self._p(step, "resolution", "reboot"),
                                   move_s=self._p(step, "move_s"),
                                   category=step.category, cause=step.cause, note=step.note)

    def _do_reboot_node(self, t, step):
        for node in step.target:
            self.cluster.reboot_node(node, t, int(self._p(step, "duration_s", 120)),
                                     category=step.category, cause=step.cause, note=step.note)

    def _do_move_group(self, t, step):
        for group in step.target:
            try:
                self.cluster.move_group(group, step.params["to"], t,
                                        planned=step.category == "planned",
                                        duration=self._p(step, "duration_s"),
                                        category=step.category, cause=step.cause, note=step.note)
            except MoveRejected as exc:
                self.log(t, "move_rejected", group=group, reason=exc)

    def _db_nodes(self) -> list[str]:
        st = self.cluster.state
        return sorted({g.current_owner for g in st.groups.values()
                       if g.partition and g.current_owner is not None})

    def _do_password_reset(self, t, step):
        correct = self._p(step, "correct", True)
        if correct:
            restart = int(self._p(step, "restart_s", 0))
            self.log(t, "password_reset", correct=True, restart_s=restart)
            if restart:
                for node in step.target or self._db_nodes():
                    self.cluster.reboot_node(node, t, restart, category=step.category,
                                             cause=step.cause, note=step.note or "service restart")
            return
        # services on the node cannot log in and stop answering; the OS keeps
        # heartbeating so the cluster sees nothing wrong
        self.log(t, "password_reset", correct=False)
        for node in step.target:
            self.cluster.hang_node(node, t, int(self._p(step, "detect_after_s", 1800)),
                                   restart_s=int(self._p(step, "restart_s", 60)),
                                   category=step.category, cause=step.cause,
                                   note=step.note or "password mismatch")

    def _affected(self, step: ScenarioStep) -> list[str]:
        if "partitions" in step.params:
            return list(step.params["partitions"])
        if step.target:
            st = self.cluster.state
            return [g.name for g in st.groups.values()
                    if g.partition and (g.current_owner in step.target or g.last_owner in step.target
                                        and g.current_owner is None)]
        return list(PARTITIONS)

    def _do_firmware_upgrade(self, t, step):
        total = int(self._p(step, "outage_s", round(float(self._p(step, "outage_h", 0)) * 3600)))
        planned = min(total, int(self._p(step, "planned_s", total if step.category == "planned" else 0)))
        parts = self._affected(step)
        note = step.note or "firmware upgrade"
        self._timed_outage(parts, t, t + planned, "planned", step.cause, note)
        self._timed_outage(parts, t + planned, t + total, "unplanned", step.cause, note + " overran")

    def _do_patch_node(self, t, step):
        for node in step.target:
            try:
                self.cluster.patch_node(node, t, move_out_s=self._p(step, "move_out_s"),
                                        patch_s=int(self._p(step, "patch_s", 1800)),
                                        move_back_s=self._p(step, "move_back_s"),
                                        category=step.category, cause=step.cause, note=step.note)
            except MoveRejected as exc:
                self.log(t, "patch_rejected", node=node, reason=exc)

    def _do_expand(self, t, step):
        label = self._p(step, "label", step.note or "expand")
        self.log(t, "expand", label=label)
        if self._p(step, "topology") is not None:
            self._swap_topology(t, load_topology(step.params["topology"]))
        outage = int(self._p(step, "outage_s", 0))
        self._timed_outage(self._affected(step), t, t + outage, step.category, step.cause, label)

    def _swap_topology(self, t: int, new: Topology) -> None:
        self.topology = new
        self.storage.set_topology(new)
        for g in self.cluster.state.groups.values():
            if g.partition:
                extra = tuple(r for r in g.resources if r.startswith(("vip:", "sql:")))
                g.resources = tuple(v.id for v in new.volumes_for(g.partition)) + extra
        for s, w in web_states(new).items():
            self.web.setdefault(s, w)
        self.log(t, "topology", name=new.name, volumes=len(new.volumes))

    def _do_fail_webserver(self, t, step):
        for s in step.target:
            self.web[s].status = "down"
            self.log(t, "web_down", server=s)
            site = self.web[s].site
            if all(w.status != "up" for w in self.web.values() if w.site == site):
                self.web_outages.append(WebOutage(site, t))
                self.log(t, "site_down", site=site)

    def _do_restore_webserver(self, t, step):
        for s in step.target:
            self.web[s].status = "up"
            self.log(t, "web_up", server=s)
            for w in self.web_outages:
                if w.site == self.web[s].site and w.end is None:
                    w.end = t
                    self.log(t, "site_up", site=w.site)

    # -- backups -------------------------------------------------------------
    def _schedule_backups(self) -> None:
        cfg = self.scenario.backups
        if not cfg or not cfg.get("weekly", True):
            return
        start = int(cfg.get("start_s", 0))
        end = min(int(cfg.get("end_s", self.horizon_s)), self.horizon_s)
        sizes = cfg.get("sizes_tb")
        rates = cfg.get("throughput_gb_per_h", {})
        week = 0
        while week * bk.WEEK < end:
            for job in bk.schedule_weekend(week, sizes):
                if start <= job.start < end:
                    self._ctx = ("planned", "operations")
                    self.schedule(job.start, self._backup, job.partition, job.data_tb,
                                  rates.get(job.partition), module="backup")
            week += 1

    def _do_backup(self, t, step):
        for p in step.target:
            tb = float(self._p(step, "tb", bk.DEFAULT_BACKUP_TB[p]))
            self._backup(t, p, tb, self._p(step, "throughput_gb_per_h"))

    def _backup(self, t: int, partition: str, tb: float, rate: float | None) -> None:
        if self._running:
            # one library user at a time: wait for the current saveset
            busy_until = max(j.end for j in self._running)
            self.log(t, "backup_queued", partition=partition, until=busy_until)
            self.schedule(busy_until, self._backup, partition, tb, rate, module="backup")
            return
        host = self.cluster.state.owner(partition)
        tape_ok = host is not None and tape_path_ok(self.topology, host, self.storage.faults)
        online = partition in self.cluster.state.online_partitions()
        lib = self.topology.tape_library or bk.TapeLibrarySpec()
        job = bk.run_backup(partition, tb, lib, start=t, throughput_gb_per_h=rate,
                            tape_fabric_ok=tape_ok, partition_online=online)
        self.backup_jobs.append(job)
        self.log(t, "backup_start", partition=partition, tb=tb, hours=f"{job.duration_h:.2f}",
                 tapes=job.tapes_used, status=job.status)
        if job.status != "ok":
            self.log(t, "backup_alert", partition=partition, cause=job.cause, retry="next-weekly-slot")
            return
        self._running.append(job)
        self.schedule(job.end, self._backup_done, job, module="backup")

    def _backup_done(self, t: int, job: bk.BackupJob) -> None:
        if job in self._running:
            self._running.remove(job)
            self.log(t, "backup_done", partition=job.partition, status=job.status)

    def _check_running_backups(self, t: int) -> None:
        for job in list(self._running):
            host = self.cluster.state.owner(job.partition)
            if host is None or not tape_path_ok(self.topology, host, self.storage.faults):
                job.status, job.cause = "failed", "tape-fabric"
                self._running.remove(job)
                self.log(t, "backup_alert", partition=job.partition, cause=job.cause,
                         retry="next-weekly-slot")

    def _do_verify_restore(self, t, step):
        for p in step.target:
            done = [j for j in self.backup_jobs if j.partition == p and j.status == "ok" and j.end <= t]
            if not done:
                self.log(t, "restore_skipped", partition=p, reason="no_completed_backup")
                continue
            res = bk.verify_restore(done[-1], label_fault=bool(self._p(step, "label_fault", False)))
            self.restores.append(RestoreTest(t, p, str(res)))
            self.log(t, "restore_test", partition=p, result=str(res))

    # -- traffic -------------------------------------------------------------
    def _traffic(self, ledger: DowntimeLedger) -> dict:
        cfg = self.scenario.traffic
        days = cfg.get("days", 7)
        days = list(range(days)) if isinstance(days, int) else list(days)
        scale = float(cfg.get("scale", 0.01))
        prof = cfg.get("profile", "weekday-peak")
        spans = {p: sorted((iv.start, iv.end) for iv in ledger.intervals if iv.partition == p)
                 for p in PARTITIONS}
        pmap = self.topology.partition_map
        out = {"requests": 0, "failed": 0,
               "by_partition": {p: {"requests": 0, "failed": 0} for p in PARTITIONS},
               "gazetteer": {"requests": 0, "failed": 0}}
        for day in days:
            stream = generate(prof, day, self.seed, scale=scale)
            parts = stream.partitions(pmap)
            down = {p: _covered(stream.t, spans[p]) for p in PARTITIONS}
            for p in PARTITIONS:
                sel = parts == p
                n, f = int(sel.sum()), int((sel & down[p]).sum())
                out["by_partition"][p]["requests"] += n
                out["by_partition"][p]["failed"] += f
            gaz = stream.kind == KIND_GAZETTEER
            all_down = down[PARTITIONS[0]] & down[PARTITIONS[1]] & down[PARTITIONS[2]]
            out["gazetteer"]["requests"] += int(gaz.sum())
            out["gazetteer"]["failed"] += int((gaz & all_down).sum())
        out["requests"] = sum(v["requests"] for v in out["by_partition"].values()) + out["gazetteer"]["requests"]
        out["failed"] = sum(v["failed"] for v in out["by_partition"].values()) + out["gazetteer"]["failed"]
        out["days"], out["scale"], out["profile"] = len(days), scale, prof if isinstance(prof, str) else "custom"
        return out


def _covered(t: np.ndarray, spans: list[tuple[int, int]]) -> np.ndarray:
    mask = np.zeros(t.size, dtype=bool)
    for s, e in spans:
        lo, hi = np.searchsorted(t, [s, e], side="left")
        mask[lo:hi] = True
    return mask


def run(scenario: Scenario | str | dict, *, seed: int | None = None,
        threshold: int | None = None) -> SimResult:
    """Load (if needed) and simulate a scenario."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return Simulation(scenario, seed=seed, threshold=threshold).run()


__all__ = ["Simulation", "SimResult", "run"]
