import pytest
from hypothesis import given, strategies as st

import oracles
from terrasim.simkernel import run
from terrasim.storage import (QUEUE_DEPTHS, ConfigurationError, DiskStatus, InvalidTransition,
                              IoProfile, SanFaults, StorageCalibration, StorageState, Unreachable,
                              route_san, standard_profiles, tape_path_ok, throughput,
                              volume_available)
from terrasim.topology import build_default_topology, build_initial_topology

TOPO = build_default_topology()
HOSTS = TOPO.cluster_nodes
SECTIONS = [s.id for s in TOPO.sections]
SWITCHES = sorted(sw.id for f in TOPO.data_fabrics for sw in f.switches)
CONTROLLERS = sorted(c for s in TOPO.sections for c in s.controller_pair)
HBAS = sorted(f"hba:{h}:f{f}" for h in HOSTS for f in (1, 2))


def healthy_states(volume):
    return {d: "healthy" for d in volume.disks}


def test_all_healthy_volume_available():
    v = TOPO.volume("F")
    assert volume_available(v, healthy_states(v))


def test_one_failure_in_each_of_five_sets_keeps_volume():
    v = TOPO.volume("F")
    states = healthy_states(v)
    for ms in v.mirror_sets:
        states[ms[0]] = "failed"
    assert volume_available(v, states, threshold=2)


def test_two_failures_in_one_set_lose_volume_at_threshold_2():
    v = TOPO.volume("F")
    states = healthy_states(v)
    a, b, _ = v.mirror_sets[0]
    states[a] = states[b] = "failed"
    assert not volume_available(v, states, threshold=2)
    assert volume_available(v, states, threshold=3)


def test_missing_disk_state_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        volume_available(TOPO.volume("F"), {})


def test_route_prefers_fabric_1():
    assert route_san(TOPO, "SQL-1", "R1-top").fabric_id == 1


def test_fabric1_switch_failure_reroutes_over_fabric_2():
    path = route_san(TOPO, "SQL-1", "R4-bottom", SanFaults(switches={"f1-sw2"}))
    assert path.fabric_id == 2


def test_failed_controller_uses_its_partner():
    path = route_san(TOPO, "SQL-2", "R2-mid", SanFaults(controllers={"HSG-R2M-A"}))
    assert path.controller_id == "HSG-R2M-B"


def test_both_fabrics_down_is_unreachable():
    with pytest.raises(Unreachable):
        route_san(TOPO, "SQL-1", "R1-top", SanFaults(fabrics={1, 2}))


def single_faults():
    out = [SanFaults(switches={s}) for s in SWITCHES]
    out += [SanFaults(controllers={c}) for c in CONTROLLERS]
    out += [SanFaults(hbas={h}) for h in HBAS]
    out += [SanFaults(fabrics={f}) for f in (1, 2)]
    return out


@pytest.mark.parametrize("topo", [build_default_topology(), build_initial_topology()],
                         ids=["default", "initial"])
def test_every_single_san_fault_leaves_every_section_reachable(topo):
    sections = [s.id for s in topo.sections]
    for faults in single_faults():
        if faults.switches and not faults.switches <= set(topo.endpoint_switch.values()):
            continue
        for h in topo.cluster_nodes:
            for sec in sections:
                route_san(topo, h, sec, faults)


def _oracle_reachable(faults, host, section):
    adjacency = {sw.id: sw.links for f in TOPO.fabrics for sw in f.switches}
    where = TOPO.endpoint_switch
    for f in (1, 2):
        if f in faults.fabrics or f"hba:{host}:f{f}" in faults.hbas:
            continue
        for ctl in TOPO.section(section).controller_pair:
            if ctl in faults.controllers:
                continue
            if oracles.fabric_reachable(adjacency, where[f"hba:{host}:f{f}"],
                                        where[f"ctl:{ctl}:f{f}"], faults.switches):
                return True
    return False


fault_sets = st.builds(
    SanFaults,
    switches=st.sets(st.sampled_from(SWITCHES), max_size=3),
    controllers=st.sets(st.sampled_from(CONTROLLERS), max_size=4),
    hbas=st.sets(st.sampled_from(HBAS), max_size=3),
    fabrics=st.sets(st.sampled_from([1, 2]), max_size=1),
)


@given(fault_sets, st.sampled_from(HOSTS), st.sampled_from(SECTIONS))
def test_route_san_matches_reachability_oracle(faults, host, section):
    expected = _oracle_reachable(faults, host, section)
    try:
        path = route_san(TOPO, host, section, faults)
    except Unreachable:
        assert not expected
        return
    assert expected
    assert path.fabric_id not in faults.fabrics
    assert path.controller_id not in faults.controllers
    assert not set(path.switches) & faults.switches


@given(fault_sets, st.sampled_from(HOSTS), st.sampled_from(SECTIONS))
def test_route_san_is_deterministic(faults, host, section):
    def attempt():
        try:
            return route_san(TOPO, host, section, faults.copy())
        except Unreachable:
            return None
    assert attempt() == attempt()


def test_tape_path():
    assert tape_path_ok(TOPO, "SQL-1")
    assert not tape_path_ok(TOPO, "SQL-1", SanFaults(fabrics={3}))
    assert not tape_path_ok(build_initial_topology(), "SQL-1")


# -- disk state machine -------------------------------------------------------

def test_fail_replace_rebuild_cycle():
    s = StorageState(TOPO)
    d = TOPO.volume("F").mirror_sets[0][0]
    assert s.fail_disk(d, 10).status is DiskStatus.FAILED
    assert s.volume_ok("F")
    st_ = s.replace_disk(d, 20)
    assert st_.status is DiskStatus.REBUILDING and st_.rebuild_eta == 20 + s.rebuild_s
    assert s.volume_ok("F")
    assert s.finish_rebuild(d, st_.rebuild_eta).status is DiskStatus.HEALTHY
    assert s.partition_problem("DRG_DB", "SQL-1") is None


def test_invalid_transitions():
    s = StorageState(TOPO)
    d = "R1T-D01"
    s.fail_disk(d, 0)
    with pytest.raises(InvalidTransition):
        s.fail_disk(d, 1)
    with pytest.raises(InvalidTransition):
        s.replace_disk("R1T-D02", 1)
    with pytest.raises(InvalidTransition):
        s.finish_rebuild(d, 1)


def test_rebuilding_member_counts_toward_threshold():
    s = StorageState(TOPO)
    a, b, _ = TOPO.volume("E").mirror_sets[0]
    s.fail_disk(a, 0)
    s.replace_disk(a, 5)
    s.fail_disk(b, 10)
    assert not s.volume_ok("E")
    assert "E" in s.partition_problem("DRG_DB", "SQL-1")


def test_threshold_must_be_2_or_3():
    with pytest.raises(ConfigurationError):
        StorageState(TOPO, threshold=1)


@given(st.data())
def test_one_failed_disk_per_mirror_set_never_loses_a_volume(data):
    s = StorageState(TOPO)
    for v in TOPO.volumes:
        for ms in v.mirror_sets:
            pick = data.draw(st.sampled_from((None,) + ms))
            if pick:
                s.fail_disk(pick, 0)
                if data.draw(st.booleans()):
                    s.replace_disk(pick, 1)
    assert all(s.volume_ok(v.id) for v in TOPO.volumes)
    for p, host in (("DRG_DB", "SQL-1"), ("DOQ_0", "SQL-2"), ("DOQ_1", "SQL-3")):
        assert s.partition_problem(p, host) is None


def test_fail_then_replace_in_a_run_costs_nothing():
    res = run({"schema_version": 1, "horizon_h": 24, "steps": [
        {"t": 60, "action": "fail_disk", "target": "R2M-D07"},
        {"t": 3600, "action": "replace_disk", "target": "R2M-D07"}]})
    assert res.ledger.intervals == []
    assert any("disk_healthy" in e for e in res.events)


def test_twenty_four_independent_disk_failures_over_three_years():
    disks = sorted(TOPO.disk_ids)[::13][:24]
    assert len(disks) == 24
    steps = [{"t": (i + 1) * 40 * 86400, "action": "fail_disk", "target": d,
              "params": {"replace_after_s": 86400}} for i, d in enumerate(disks)]
    res = run({"schema_version": 1, "horizon_h": 3 * 8760, "steps": steps})
    assert res.ledger.union_s() == 0
    assert sum("disk_failed" in e for e in res.events) == 24


# -- throughput envelope -----------------------------------------------------

SEQ_READ = IoProfile("seq-read", 4)


def test_seq_read_five_volumes_within_cap():
    assert throughput(SEQ_READ, 5).mbps <= 100.0


@pytest.mark.parametrize("prof", standard_profiles(), ids=lambda p: p.label)
def test_five_to_one_ratio_is_about_two(prof):
    one, five = throughput(prof, 1).mbps, throughput(prof, 5).mbps
    assert five / one == pytest.approx(2.0, rel=0.10)


def test_zero_demand_or_volumes_gives_zero():
    assert throughput(SEQ_READ, 0).mbps == 0
    assert throughput(SEQ_READ, 3, demand_mbps=0).mbps == 0


@given(st.sampled_from(standard_profiles()), st.integers(1, 40),
       st.floats(1.0, 5.0), st.floats(10, 500))
def test_throughput_monotone_and_capped(prof, n, scaling, seq_rate):
    cal = StorageCalibration(seq_read_mbps=seq_rate, five_volume_scaling=scaling)
    a, b = throughput(prof, n, cal), throughput(prof, n + 1, cal)
    assert a.mbps <= b.mbps <= cal.san_bandwidth_cap_mbps + 1e-9


def test_profile_validation():
    with pytest.raises(ValueError):
        IoProfile("seq-read", 3)
    with pytest.raises(ValueError):
        IoProfile("rand-read", 4, block_kb=64)
    assert {p.queue_depth for p in standard_profiles()} == set(QUEUE_DEPTHS)


def test_shrinking_calibration_rejected():
    with pytest.raises(ValueError):
        StorageCalibration(five_volume_scaling=0.5)
