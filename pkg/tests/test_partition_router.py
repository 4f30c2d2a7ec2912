import pytest
from hypothesis import given, strategies as st

from terrasim.partition_router import (GB, PARTITIONS, BadRequest, PartitionMap,
                                       PartitionRouter, PartitionUnavailable, RequestClass, TileKey,
                                       partition_sizes, route)

ZONES = st.integers(10, 19)
THEMES = st.sampled_from(["DOQ", "DRG"])
ONLINE = st.sets(st.sampled_from(PARTITIONS))


def test_drg_zone_13():
    assert route("tile-fetch", TileKey("DRG", 13)) == "DRG_DB"


def test_doq_zone_11_is_odd_partition():
    assert route(RequestClass.TILE_FETCH, TileKey("DOQ", 11)) == "DOQ_1"
    assert route(RequestClass.TILE_FETCH, TileKey("DOQ", 12)) == "DOQ_0"


def test_gazetteer_survives_drg_outage():
    assert route("gazetteer-search", None, {"DOQ_0", "DOQ_1"}) in {"DOQ_0", "DOQ_1"}


def test_gazetteer_round_robins_over_replicas():
    r = PartitionRouter()
    got = [r.route("gazetteer-search", None, PARTITIONS) for _ in range(6)]
    assert got == list(PARTITIONS) * 2


def test_offline_data_partition_raises():
    with pytest.raises(PartitionUnavailable):
        route("tile-fetch", TileKey("DOQ", 15), {"DRG_DB", "DOQ_0"})


def test_bad_keys():
    with pytest.raises(BadRequest):
        TileKey("DOQ", 9)
    with pytest.raises(BadRequest):
        TileKey("SPOT", 12)
    with pytest.raises(BadRequest):
        route("page-metadata", None)


def test_sizes():
    sizes = partition_sizes()
    assert sizes["DRG_DB"] == 900 * GB
    assert sizes["DOQ_1"] == pytest.approx(1330 * GB)
    assert sizes["DOQ_0"] + sizes["DOQ_1"] == 2500 * GB
    assert sum(sizes.values()) == pytest.approx(3.3e12 + 100 * GB, rel=0.04)
    with_meta = partition_sizes(include_meta=True)
    assert sum(with_meta.values()) - sum(sizes.values()) < 100 * GB


def test_map_round_trip():
    m = PartitionMap()
    assert PartitionMap.from_dict(m.to_dict()) == m


@given(THEMES, ZONES, st.sampled_from(list(RequestClass)[1:]))
def test_routing_is_pure_in_theme_and_parity(theme, zone, req):
    a = route(req, TileKey(theme, zone))
    assert a == route(req, TileKey(theme, zone, scale=3, row=7, col=9))
    if zone + 2 <= 19:
        assert a == route(req, TileKey(theme, zone + 2))
    expected = "DRG_DB" if theme == "DRG" else ("DOQ_1" if zone % 2 else "DOQ_0")
    assert a == expected


@given(ONLINE, st.integers(1, 10))
def test_gazetteer_succeeds_iff_any_partition_online(online, n):
    r = PartitionRouter()
    for _ in range(n):
        if online:
            assert r.route("gazetteer-search", None, online) in online
        else:
            with pytest.raises(PartitionUnavailable):
                r.route("gazetteer-search", None, online)
