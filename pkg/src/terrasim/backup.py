"""SAN-attached LTO tape library: full-backup jobs, weekend schedule, restore checks.

Backups are online: they never take a partition offline.  The only things
that stop a job are an unusable tape fabric or an offline partition.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

# Tape capacities are quoted in GB per TB of database pages at 1024 GB/TB;
# 1.05 TB then yields 1075 GB, which is what fills 12 tapes on 4 drives.
GB_PER_TB = 1024
HOUR = 3600
DAY = 86400
WEEK = 7 * DAY

# (partition, weekday with Monday=0, hour) for the weekend full backups
WEEKEND_SLOTS = (
    ("DRG_DB", 5, 2),
    ("DOQ_0", 5, 14),
    ("DOQ_1", 6, 2),
)

DEFAULT_BACKUP_TB = {"DRG_DB": 0.9, "DOQ_0": 1.17, "DOQ_1": 1.33}


class BackupError(RuntimeError):
    pass


@dataclass(frozen=True)
class TapeLibrarySpec:
    drives: int = 4
    tape_native_capacity_gb: float = 100.0
    per_drive_throughput_gb_per_h: float = 34.0
    saveset_retention: int = 3
    name: str = "scalar-1000"

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(f"tape:{self.name}:drive{i + 1}" for i in range(self.drives))

    def to_dict(self) -> dict:
        return {
            "drives": self.drives,
            "tape_native_capacity_gb": self.tape_native_capacity_gb,
            "per_drive_throughput_gb_per_h": self.per_drive_throughput_gb_per_h,
            "saveset_retention": self.saveset_retention,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TapeLibrarySpec":
        return cls(**d)


@dataclass
class BackupJob:
    partition: str
    data_tb: float
    start: int
    duration_h: float
    tapes_used: int
    status: str = "ok"
    loader_paused: bool = True
    cause: str | None = None

    @property
    def data_gb(self) -> float:
        return self.data_tb * GB_PER_TB

    @property
    def end(self) -> int:
        return self.start + round(self.duration_h * HOUR)


@dataclass(frozen=True)
class ScheduledBackup:
    partition: str
    start: int
    data_tb: float


@dataclass(frozen=True)
class RestoreResult:
    ok: bool
    cause: str | None = None

    def __str__(self):
        return "ok" if self.ok else f"failed({self.cause})"


def tapes_for(data_gb: float, library: TapeLibrarySpec) -> int:
    """Each drive writes its own stream, so every stream rounds up to whole tapes."""
    if data_gb <= 0:
        return 0
    per_drive = data_gb / library.drives
    # round first so 300.0000001 GB/drive does not spill onto a fourth tape
    return library.drives * max(1, math.ceil(round(per_drive / library.tape_native_capacity_gb, 9)))


def backup_hours(data_gb: float, library: TapeLibrarySpec,
                 throughput_gb_per_h: float | None = None) -> float:
    rate = throughput_gb_per_h or library.drives * library.per_drive_throughput_gb_per_h
    return data_gb / rate


def run_backup(partition: str, data_tb: float, library: TapeLibrarySpec | None = None,
               *, start: int = 0, throughput_gb_per_h: float | None = None,
               tape_fabric_ok: bool = True, partition_online: bool = True) -> BackupJob:
    """Full online backup of one partition.

    `throughput_gb_per_h` overrides the aggregate library rate for one job
    (e.g. 165 GB/h reproduces an 8.25 h run of 1.33 TB).
    """
    library = library or TapeLibrarySpec()
    data_gb = data_tb * GB_PER_TB
    job = BackupJob(partition, data_tb, start,
                    backup_hours(data_gb, library, throughput_gb_per_h),
                    tapes_for(data_gb, library))
    if not tape_fabric_ok:
        job.status, job.cause = "failed", "tape-fabric"
    elif not partition_online:
        job.status, job.cause = "failed", "partition-offline"
    return job


def schedule_weekend(week: int, sizes_tb: Mapping[str, float] | None = None,
                     week_origin: int = 0) -> list[ScheduledBackup]:
    """Sat 02:00 DRG, Sat 14:00 DOQ0, Sun 02:00 DOQ1 for the given week index.

    Simulation time 0 is a Monday 00:00 unless `week_origin` shifts it.
    """
    sizes_tb = sizes_tb or DEFAULT_BACKUP_TB
    return [ScheduledBackup(p, week_origin + week * WEEK + day * DAY + hour * HOUR,
                            sizes_tb[p])
            for p, day, hour in WEEKEND_SLOTS]


def verify_restore(job: BackupJob, target_library: TapeLibrarySpec | None = None,
                   *, label_fault: bool = False) -> RestoreResult:
    if job.status != "ok":
        raise BackupError(f"cannot restore from a {job.status} backup of {job.partition}")
    if label_fault:
        return RestoreResult(False, "tape-labeling")
    return RestoreResult(True)


def backup_report_csv(jobs: Iterable[BackupJob]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["partition", "start", "hours", "tb", "tapes", "status"])
    for j in jobs:
        w.writerow([j.partition, j.start, f"{j.duration_h:.2f}", f"{j.data_tb:.2f}",
                    j.tapes_used, j.status])
    return buf.getvalue()
