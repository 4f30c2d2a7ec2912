"""Diurnal request generation and the load-balanced web tier.

Users browse during their local working day and look at imagery near home,
so each page view is assigned a UTM zone first and a local hour second.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from terrasim.partition_router import MAX_ZONE, MIN_ZONE, PartitionMap
from terrasim.topology import FRONT_SWITCHES, Topology

ZONES = tuple(range(MIN_ZONE, MAX_ZONE + 1))
# approximate: Pacific 10-11, Mountain 12-13, Central 14-16, Eastern 17-19
ZONE_UTC_OFFSET = {10: -8, 11: -8, 12: -7, 13: -7, 14: -6, 15: -6, 16: -6,
                   17: -5, 18: -5, 19: -5}
DAY = 86400

KIND_GAZETTEER, KIND_PAGE, KIND_TILE = 0, 1, 2
KIND_NAMES = ("gazetteer-search", "page-metadata", "tile-fetch")
THEME_NAMES = ("DOQ", "DRG")


@dataclass(frozen=True)
class TrafficProfile:
    day_class: str
    visitors: int
    pages: int
    tiles: int
    peak_pages_per_s: float
    peak_tiles_per_s: float
    tiles_per_page: tuple[int, int] = (2, 12)
    gazetteer_per_page: float = 0.2
    doq_share: float = 2 / 3
    html_share: float = 0.8

    def __post_init__(self):
        lo, hi = self.tiles_per_page
        if self.pages and not lo * self.pages <= self.tiles <= hi * self.pages:
            raise ValueError(f"{self.tiles} tiles cannot come from {self.pages} pages "
                             f"at {lo}-{hi} tiles per page")
        if self.pages == 0 and self.tiles:
            raise ValueError("tiles without pages")

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrafficProfile":
        d = dict(d)
        if "tiles_per_page" in d:
            d["tiles_per_page"] = tuple(d["tiles_per_page"])
        return cls(**d)


PROFILES = {
    "weekday-peak": TrafficProfile("weekday-peak", 50_000, 1_200_000, 5_500_000, 40, 225),
    "weekend": TrafficProfile("weekend", 30_000, 700_000, 4_000_000, 40 * 0.7 / 1.2, 225 * 4 / 5.5),
    # press-driven spike days peak at 2.5x the typical rates
    "spike": TrafficProfile("spike", 277_000, 4_500_000, 12_000_000, 40 * 2.5, 225 * 2.5),
    "zero": TrafficProfile("zero", 0, 0, 0, 0, 0),
}


def profile(name_or_dict: str | Mapping | TrafficProfile) -> TrafficProfile:
    if isinstance(name_or_dict, TrafficProfile):
        return name_or_dict
    if isinstance(name_or_dict, str):
        return PROFILES[name_or_dict]
    return TrafficProfile.from_dict(name_or_dict)


@dataclass(frozen=True)
class ZoneActivity:
    """Trapezoid of local-time activity with an overnight floor."""

    floor: float = 0.1
    ramp_up: tuple[float, float] = (7.0, 8.0)
    ramp_down: tuple[float, float] = (17.0, 19.0)

    def level(self, local_hour: float) -> float:
        a, b = self.ramp_up
        c, d = self.ramp_down
        if a <= local_hour < b:
            return self.floor + (1 - self.floor) * (local_hour - a) / (b - a)
        if b <= local_hour < c:
            return 1.0
        if c <= local_hour < d:
            return 1.0 - (1 - self.floor) * (local_hour - c) / (d - c)
        return self.floor

    def hourly(self) -> np.ndarray:
        return np.array([self.level(h + 0.5) for h in range(24)])

    def utc_hourly(self, zone: int) -> np.ndarray:
        """Weights indexed by UTC hour for one zone."""
        return np.roll(self.hourly(), -ZONE_UTC_OFFSET[zone])


@dataclass
class RequestStream:
    t: np.ndarray
    site: np.ndarray   # 0 = html, 1 = soap
    kind: np.ndarray
    theme: np.ndarray  # 0 = DOQ, 1 = DRG, -1 for gazetteer
    zone: np.ndarray   # 0 for gazetteer

    def __len__(self):
        return int(self.t.size)

    def count(self, kind: int) -> int:
        return int(np.count_nonzero(self.kind == kind))

    def partitions(self, pmap: PartitionMap | None = None) -> np.ndarray:
        """Partition name per request; "" for gazetteer searches."""
        pmap = pmap or PartitionMap()
        out = np.full(self.t.size, "", dtype=object)
        data = self.kind != KIND_GAZETTEER
        drg = data & (self.theme == 1)
        doq = data & (self.theme == 0)
        out[drg] = pmap.drg
        out[doq & (self.zone % 2 == 0)] = pmap.doq_even
        out[doq & (self.zone % 2 == 1)] = pmap.doq_odd
        return out

    def to_csv(self, sites: tuple[str, str] = ("terraserver-usa.com", "terraservice.net")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "site", "request_class", "theme", "zone"])
        for t, s, k, th, z in zip(self.t.tolist(), self.site.tolist(), self.kind.tolist(),
                                  self.theme.tolist(), self.zone.tolist()):
            w.writerow([t, sites[s], KIND_NAMES[k], THEME_NAMES[th] if th >= 0 else "",
                        z if k != KIND_GAZETTEER else ""])
        return buf.getvalue()


def _tiles_per_page(rng: np.random.Generator, n_pages: int, n_tiles: int,
                    lo: int, hi: int) -> np.ndarray:
    """Per-page tile counts in [lo, hi] summing to exactly n_tiles."""
    span = hi - lo
    p = (n_tiles / n_pages - lo) / span
    counts = lo + rng.binomial(span, p, size=n_pages)
    diff = n_tiles - int(counts.sum())
    while diff:
        room = np.flatnonzero(counts < hi) if diff > 0 else np.flatnonzero(counts > lo)
        pick = rng.choice(room, size=min(abs(diff), room.size), replace=False)
        counts[pick] += 1 if diff > 0 else -1
        diff = n_tiles - int(counts.sum())
    return counts


def generate(prof: TrafficProfile | str, day: int, seed: int, *, scale: float = 1.0,
             zone_shares: Mapping[int, float] | None = None,
             activity: ZoneActivity | None = None) -> RequestStream:
    """One simulated day of requests, reproducible from (profile, day, seed).

    `scale` shrinks every daily total for desk-sized runs.
    """
    prof = profile(prof)
    activity = activity or ZoneActivity()
    rng = np.random.default_rng([seed, day])
    n_pages = int(round(prof.pages * scale))
    n_tiles = int(round(prof.tiles * scale))
    if n_pages == 0:
        empty = np.zeros(0, dtype=np.int64)
        return RequestStream(empty, empty.astype(np.int8), empty.astype(np.int8),
                             empty.astype(np.int8), empty.astype(np.int8))

    shares = np.array([(zone_shares or {}).get(z, 1.0) for z in ZONES], dtype=float)
    shares /= shares.sum()
    zone = np.asarray(ZONES)[rng.choice(len(ZONES), size=n_pages, p=shares)]

    t = np.empty(n_pages, dtype=np.int64)
    for z in ZONES:
        idx = np.flatnonzero(zone == z)
        if idx.size:
            w = activity.utc_hourly(z)
            hour = rng.choice(24, size=idx.size, p=w / w.sum())
            t[idx] = hour * 3600 + rng.integers(0, 3600, size=idx.size)
    t += day * DAY
    site = (rng.random(n_pages) >= prof.html_share).astype(np.int8)
    theme = (rng.random(n_pages) >= prof.doq_share).astype(np.int8)

    lo, hi = prof.tiles_per_page
    counts = _tiles_per_page(rng, n_pages, n_tiles, lo, hi)
    owner = np.repeat(np.arange(n_pages), counts)
    # tiles follow their page by a few seconds, staying inside the day
    tile_t = np.minimum(t[owner] + rng.integers(1, 6, size=owner.size), (day + 1) * DAY - 1)

    gaz = np.flatnonzero(rng.random(n_pages) < prof.gazetteer_per_page)

    all_t = np.concatenate([t[gaz], t, tile_t])
    kind = np.concatenate([np.full(gaz.size, KIND_GAZETTEER), np.full(n_pages, KIND_PAGE),
                           np.full(owner.size, KIND_TILE)]).astype(np.int8)
    all_site = np.concatenate([site[gaz], site, site[owner]])
    all_theme = np.concatenate([np.full(gaz.size, -1), theme, theme[owner]]).astype(np.int8)
    all_zone = np.concatenate([np.zeros(gaz.size, dtype=np.int64), zone, zone[owner]]).astype(np.int8)
    order = np.lexsort((kind, all_t))
    return RequestStream(all_t[order], all_site[order], kind[order], all_theme[order], all_zone[order])


def per_minute_rates(stream: RequestStream, kind: int) -> np.ndarray:
    """Requests of one kind per minute-of-stream, starting at the first minute."""
    sel = stream.t[stream.kind == kind]
    if sel.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.bincount((sel - sel.min()) // 60)


# ---------------------------------------------------------------------------
# web tier

class SiteDown(RuntimeError):
    pass


@dataclass
class WebServerState:
    server_id: str
    site: str
    switch_id: str
    status: str = "up"


def web_states(topology: Topology) -> dict[str, WebServerState]:
    wt = topology.web_tier
    return {s: WebServerState(s, site, wt.switch_assignment[s])
            for site, servers in wt.sites.items() for s in servers}


@dataclass
class SymmetricLoadBalancer:
    """Per-switch round robin over live servers; the other switch is a fallback.

    Requests that do not say which switch received them alternate between
    the two uplinks.
    """

    switches: tuple[str, ...] = FRONT_SWITCHES
    _cursor: dict = field(default_factory=dict)
    _uplink: int = 0

    def route(self, site: str, states: Mapping[str, WebServerState],
              switch: str | None = None) -> str:
        if switch is None:
            switch = self.switches[self._uplink % len(self.switches)]
            self._uplink += 1
        servers = [s for s in sorted(states) if states[s].site == site]
        if not servers:
            raise KeyError(f"unknown site {site!r}")
        up = [s for s in servers if states[s].status == "up"]
        if not up:
            raise SiteDown(site)
        local = [s for s in up if states[s].switch_id == switch]
        pool_switch = switch
        if not local:
            pool_switch = next(sw for sw in self.switches if sw != switch)
            local = [s for s in up if states[s].switch_id == pool_switch]
        key = (site, pool_switch)
        i = self._cursor.get(key, 0)
        self._cursor[key] = i + 1
        return local[i % len(local)]


def lb_route(site: str, request, states: Mapping[str, WebServerState],
             balancer: SymmetricLoadBalancer | None = None) -> str:
    """Pick a live server for `request`; `request` may carry a `switch` attribute or key."""
    switch = getattr(request, "switch", None)
    if switch is None and isinstance(request, Mapping):
        switch = request.get("switch")
    return (balancer or SymmetricLoadBalancer()).route(site, states, switch)
