"""Theme + UTM-zone-parity routing of requests to database partitions.

DRG tiles live on one partition; DOQ tiles are interleaved across two
partitions by zone parity (even zones on DOQ_0, odd zones on DOQ_1).  The
gazetteer is replicated on every partition, so place-name searches can be
served by whichever replica is online.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Collection, Iterable, Mapping

PARTITIONS = ("DRG_DB", "DOQ_0", "DOQ_1")
THEMES = ("DOQ", "DRG")
MIN_ZONE, MAX_ZONE = 10, 19

TB = 10**12
GB = 10**9
TOTAL_TILES = 331_000_000
# 3.3 TB of compressed imagery over 331 M tiles
AVG_TILE_BYTES = 10_000


class BadRequest(ValueError):
    pass


class PartitionUnavailable(RuntimeError):
    def __init__(self, partition: str):
        super().__init__(f"partition {partition} is offline")
        self.partition = partition


class RequestClass(str, enum.Enum):
    GAZETTEER_SEARCH = "gazetteer-search"
    PAGE_METADATA = "page-metadata"
    TILE_FETCH = "tile-fetch"


@dataclass(frozen=True)
class TileKey:
    theme: str
    utm_zone: int
    scale: int = 0
    row: int = 0
    col: int = 0

    def __post_init__(self):
        if self.theme not in THEMES:
            raise BadRequest(f"unknown theme {self.theme!r}")
        if not MIN_ZONE <= self.utm_zone <= MAX_ZONE:
            raise BadRequest(f"UTM zone {self.utm_zone} outside {MIN_ZONE}..{MAX_ZONE}")


@dataclass(frozen=True)
class PartitionMap:
    drg: str = "DRG_DB"
    doq_even: str = "DOQ_0"
    doq_odd: str = "DOQ_1"
    gazetteer_replicas: tuple[str, ...] = PARTITIONS
    drg_bytes: int = 900 * GB
    doq_bytes: int = 2_500 * GB
    # share of the DOQ bytes held by the odd-zone partition; 1.33 of 2.5 TB
    doq_odd_weight: float = 1.33 / 2.5
    meta_bytes: Mapping[str, int] = field(
        default_factory=lambda: {p: 30 * GB for p in PARTITIONS})

    def partition_for(self, theme: str, zone: int) -> str:
        if not MIN_ZONE <= zone <= MAX_ZONE:
            raise BadRequest(f"UTM zone {zone} outside {MIN_ZONE}..{MAX_ZONE}")
        if theme == "DRG":
            return self.drg
        if theme == "DOQ":
            return self.doq_odd if zone % 2 else self.doq_even
        raise BadRequest(f"unknown theme {theme!r}")

    def to_dict(self) -> dict:
        return {
            "drg": self.drg,
            "doq_even": self.doq_even,
            "doq_odd": self.doq_odd,
            "gazetteer_replicas": list(self.gazetteer_replicas),
            "drg_bytes": self.drg_bytes,
            "doq_bytes": self.doq_bytes,
            "doq_odd_weight": self.doq_odd_weight,
            "meta_bytes": dict(sorted(self.meta_bytes.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PartitionMap":
        return cls(
            drg=d["drg"],
            doq_even=d["doq_even"],
            doq_odd=d["doq_odd"],
            gazetteer_replicas=tuple(d["gazetteer_replicas"]),
            drg_bytes=int(d["drg_bytes"]),
            doq_bytes=int(d["doq_bytes"]),
            doq_odd_weight=float(d["doq_odd_weight"]),
            meta_bytes={k: int(v) for k, v in d["meta_bytes"].items()},
        )


DEFAULT_MAP = PartitionMap()


class PartitionRouter:
    """Stateful router; the only state is the gazetteer round-robin cursor."""

    def __init__(self, partition_map: PartitionMap = DEFAULT_MAP):
        self.map = partition_map
        self._cursor = 0

    def route(self, req: RequestClass | str, key: TileKey | None,
              online: Collection[str]) -> str:
        req = RequestClass(req)
        if req is RequestClass.GAZETTEER_SEARCH:
            replicas = [p for p in self.map.gazetteer_replicas if p in online]
            if not replicas:
                raise PartitionUnavailable("gazetteer")
            choice = replicas[self._cursor % len(replicas)]
            self._cursor += 1
            return choice
        if key is None:
            raise BadRequest(f"{req.value} requires a tile key")
        partition = self.map.partition_for(key.theme, key.utm_zone)
        if partition not in online:
            raise PartitionUnavailable(partition)
        return partition


def route(req: RequestClass | str, key: TileKey | None,
          online: Collection[str] = PARTITIONS,
          router: PartitionRouter | None = None) -> str:
    """Route one request.  `online` is the set of partitions currently serving."""
    return (router or PartitionRouter()).route(req, key, online)


def partition_sizes(partition_map: PartitionMap = DEFAULT_MAP,
                    include_meta: bool = False) -> dict[str, int]:
    """Imagery bytes per partition (optionally plus its meta-data tables)."""
    odd = round(partition_map.doq_bytes * partition_map.doq_odd_weight)
    sizes = {
        partition_map.drg: partition_map.drg_bytes,
        partition_map.doq_even: partition_map.doq_bytes - odd,
        partition_map.doq_odd: odd,
    }
    if include_meta:
        for p, extra in partition_map.meta_bytes.items():
            sizes[p] += extra
    return sizes


def partitions_for_zones(theme: str, zones: Iterable[int],
                         partition_map: PartitionMap = DEFAULT_MAP) -> dict[int, str]:
    return {z: partition_map.partition_for(theme, z) for z in zones}
