import pytest
from hypothesis import given, settings, strategies as st

from conftest import SCENARIOS, scenario, step
from terrasim.simkernel import run
from terrasim.simkernel.engine import Simulation
from terrasim.simkernel.scenario import load_scenario
from terrasim.topology import build_default_topology

TOPO = build_default_topology()
H = 3600


def test_empty_long_horizon():
    res = run(SCENARIOS / "empty.json")
    assert res.ledger.intervals == []
    assert res.report.percent_available == 100.0
    assert res.report.horizon_h == 28647


def test_pinned_failover_hand_sum():
    res = run(scenario([step(600, "fail_node", "SQL-1", failover_s=45)]))
    (iv,) = res.ledger.intervals
    assert (iv.start, iv.end, iv.partition) == (600, 655, "DRG_DB")
    assert (iv.category, iv.cause) == ("unplanned", "hardware")
    assert res.report.cell_s("hardware", "unplanned") == 55


def test_detection_delay_is_configurable():
    res = run(scenario([step(0, "fail_node", "SQL-2", failover_s=30)],
                       config={"detection_delay_s": 25}))
    assert res.ledger.union_s() == 55


def test_double_disk_failure_down_until_rebuild():
    a, b, _ = TOPO.volume("K").mirror_sets[2]
    steps = [step(100, "fail_disk", a, replace_after_s=600),
             step(200, "fail_disk", b, replace_after_s=600)]
    res = run(scenario(steps, config={"rebuild_h": 1}))
    (iv,) = res.ledger.intervals
    # back up once the first disk finishes rebuilding at 100 + 600 + 3600
    assert (iv.partition, iv.start, iv.end) == ("DOQ_0", 200, 4300)
    assert "lost a mirror set" in iv.note
    assert run(scenario(steps, config={"rebuild_h": 1}), threshold=3).ledger.intervals == []


def test_both_fabrics_down_takes_everything_offline():
    steps = [step(100, "fail_fabric", "1", repair_after_s=50),
             step(120, "fail_fabric", "2", repair_after_s=100)]
    res = run(scenario(steps))
    assert {(iv.partition, iv.start, iv.end) for iv in res.ledger.intervals} == {
        (p, 120, 150) for p in ("DRG_DB", "DOQ_0", "DOQ_1")}


def test_outage_open_at_horizon_is_clipped():
    res = run(scenario([step(H, "fail_node", "SQL-1", failover_s=60)], horizon_h=1.01))
    assert res.ledger.intervals[0].end == res.ledger.horizon_s


def test_events_at_or_after_horizon_are_ignored():
    res = run(scenario([step(2 * H, "fail_node", "SQL-1")], horizon_h=1))
    assert res.ledger.intervals == []
    assert not any("node_down" in e for e in res.events)


def test_same_time_steps_run_in_file_order():
    steps = [step(50, "move_group", "DOQ_0", to="SQL-4", duration_s=30),
             step(50, "move_group", "DOQ_1", to="SQL-4", duration_s=30)]
    res = run(scenario(steps))
    starts = [e for e in res.events if "\tmove_start\t" in e]
    assert "group=DOQ_0" in starts[0] and "group=DOQ_1" in starts[1]


def test_firmware_upgrade_split():
    res = run(scenario([step(0, "firmware_upgrade", None, outage_s=1000, planned_s=400)]))
    rep = res.report
    assert rep.cell_s("firmware", "planned") == 400
    assert rep.cell_s("firmware", "unplanned") == 600


def test_correct_password_reset_restarts_every_db_node():
    res = run(scenario([step(0, "password_reset", None, restart_s=48)]))
    assert {iv.partition for iv in res.ledger.intervals} == {"DRG_DB", "DOQ_0", "DOQ_1"}
    assert res.ledger.union_s() == 48
    assert run(scenario([step(0, "password_reset", None)])).ledger.union_s() == 0


def test_mistyped_password_behaves_like_a_hang():
    s = step(0, "password_reset", "SQL-3", correct=False, detect_after_s=1800, restart_s=60)
    s.update(category="unplanned", cause="operations")
    res = run(scenario([s]))
    assert res.report.cell_s("operations", "unplanned") == 1860
    assert res.failovers == []


def test_expand_swaps_topology():
    steps = [step(10, "expand", None, topology="default", outage_s=30),
             step(20, "fail_disk", "R4T-D01")]
    res = run(scenario(steps, topology="initial"))
    assert res.ledger.union_s() == 30
    assert any("disk_failed\tdisk=R4T-D01" in e for e in res.events)


def test_web_outages_stay_out_of_the_ledger():
    steps = [step(i, "fail_webserver", f"web-soap-{i}") for i in range(1, 5)]
    steps.append(step(100, "restore_webserver", "web-soap-2"))
    res = run(scenario(steps))
    assert [(w.site, w.start, w.end) for w in res.web_outages] == [("terraservice.net", 4, 100)]
    assert res.ledger.intervals == []


def test_impossible_steps_are_logged_not_fatal():
    steps = [step(0, "fail_node", "SQL-1"), step(5, "hang_node", "SQL-1", detect_after_s=60),
             step(6, "fail_disk", "R1T-D01"), step(7, "fail_disk", "R1T-D01")]
    res = run(scenario(steps))
    assert sum("\tstep_rejected\t" in e for e in res.events) == 2


def test_move_rejection_is_logged_not_fatal():
    steps = [step(0, "fail_node", "SQL-4"), step(100, "move_group", "DRG_DB", to="SQL-4")]
    res = run(scenario(steps))
    assert any("move_rejected" in e for e in res.events)


def test_traffic_counts_requests_during_outages():
    res = run(scenario([step(12 * H, "fail_node", "SQL-3", failover_s=90)],
                       traffic={"profile": "weekday-peak", "days": 1, "scale": 0.01}))
    t = res.traffic
    assert t["requests"] > 0
    assert 0 < t["failed"] < t["requests"]


def test_every_interval_traces_to_an_outage_event():
    res = run(SCENARIOS / "paper-history.json")
    for iv in res.ledger.intervals:
        line = res.events[iv.event_id]
        assert "\toutage_open\t" in line
        assert f"partition={iv.partition}" in line
        assert f"category={iv.category}" in line and f"cause={iv.cause}" in line


def test_paper_history_cells():
    rep = run(SCENARIOS / "paper-history.json").report
    assert [rep.cell_h(c, k) for c in ("hardware", "firmware", "software", "operations")
            for k in ("planned", "unplanned")] == [0.0, 0.09, 1.75, 15.80, 0.35, 0.83, 0.16, 8.39]


def test_paper_history_backups_and_restores():
    res = run(SCENARIOS / "paper-history.json")
    assert res.backups and all(j.status == "ok" for j in res.backups)
    assert [r.result for r in res.restores][:2] == ["failed(tape-labeling)", "ok"]
    assert sum(r.result == "ok" for r in res.restores) == 9


def test_cluster_expansion_subtotals():
    res = run(SCENARIOS / "cluster-expansion.json")
    by_note = {}
    for iv in res.ledger.intervals:
        by_note.setdefault(iv.note, []).append(iv)
    from terrasim.simkernel.ledger import union_seconds

    sub = {k: union_seconds(v) for k, v in by_note.items()}
    assert sub["table2-day2"] == 129
    assert [sub[f"table2-day11-{k}"] for k in ("failover", "discover", "sql1", "sql2-sql3")] == [
        127, 41, 47, 44]
    assert res.report.column_s("planned") <= 450
    assert res.ledger.union_s() == 636


def test_simulation_object_is_single_use_state():
    sc = load_scenario(scenario([step(0, "fail_node", "SQL-1", failover_s=30)]))
    a = Simulation(sc).run()
    b = Simulation(sc).run()
    assert a.ledger == b.ledger


def test_seed_and_threshold_overrides():
    sc = scenario([step(0, "fail_node", "SQL-1")], seed=1)
    assert run(sc, seed=7).seed == 7
    assert run(sc, threshold=3).threshold == 3


# -- properties ------------------------------------------------------------

def _disk_plan(draw):
    """Failures spread so no mirror set ever has two members out at once."""
    vols = draw(st.lists(st.sampled_from(TOPO.volumes), min_size=1, max_size=6, unique=True))
    steps = []
    for v in vols:
        ms = draw(st.sampled_from(v.mirror_sets))
        d = draw(st.sampled_from(ms))
        t = draw(st.integers(0, 40 * H))
        steps.append(step(t, "fail_disk", d, replace_after_s=draw(st.integers(60, 2 * H))))
    return sorted(steps, key=lambda s: s["t"])


@given(st.data(), st.integers(0, 10 ** 6))
@settings(max_examples=60)
def test_backups_and_single_disk_failures_never_reach_the_ledger(data, seed):
    steps = _disk_plan(data.draw)
    res = run(scenario(steps, horizon_h=24 * 7, seed=seed, backups={"weekly": True}))
    assert res.ledger.intervals == []


@given(st.lists(st.tuples(st.integers(0, 20 * H), st.sampled_from(["SQL-1", "SQL-2", "SQL-3", "SQL-4"])),
                max_size=6),
       st.integers(0, 2 ** 20))
@settings(max_examples=40)
def test_runs_are_deterministic(fails, seed):
    steps = [step(t, "fail_node", n, recover_after_s=1800) for t, n in sorted(fails)]
    sc = scenario(steps, horizon_h=30, seed=seed)
    a, b = run(sc), run(sc)
    assert a.ledger.to_csv() == b.ledger.to_csv()
    assert a.report.render_table() == b.report.render_table()
    assert a.events_text() == b.events_text()


@given(st.lists(st.tuples(st.integers(0, 20 * H), st.sampled_from(["SQL-1", "SQL-2", "SQL-3"]),
                          st.sampled_from(["fail_node", "reboot_node", "hang_node"])), max_size=6))
@settings(max_examples=40)
def test_every_interval_has_one_known_category_and_cause(events):
    steps = []
    for t, node, action in sorted(events):
        params = {"detect_after_s": 600} if action == "hang_node" else {}
        steps.append(step(t, action, node, **params))
    res = run(scenario(steps, horizon_h=24))
    for iv in res.ledger.intervals:
        assert "\toutage_open\t" in res.events[iv.event_id]
    assert res.report.total_s == res.ledger.union_s()
