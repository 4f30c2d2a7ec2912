import pytest
from hypothesis import given, strategies as st

import oracles
from conftest import scenario, step
from terrasim.backup import (DEFAULT_BACKUP_TB, BackupError, TapeLibrarySpec, run_backup,
                             schedule_weekend, verify_restore)
from terrasim.simkernel import run

DAY, HOUR, WEEK = 86400, 3600, 7 * 86400


def test_table1_job():
    job = run_backup("DRG_DB", 1.05, TapeLibrarySpec(drives=4))
    assert job.duration_h == pytest.approx(oracles.backup_hours(1.05, 4))
    assert job.duration_h == pytest.approx(7.9, abs=0.1)
    assert job.tapes_used == 12
    assert job.loader_paused


def test_empty_backup():
    job = run_backup("DOQ_0", 0)
    assert job.duration_h == 0 and job.tapes_used == 0


def test_two_drives_double_the_time():
    job = run_backup("DRG_DB", 1.05, TapeLibrarySpec(drives=2))
    assert job.duration_h == pytest.approx(oracles.backup_hours(1.05, 2))
    assert job.duration_h == pytest.approx(15.81, abs=0.01)
    assert job.tapes_used == oracles.backup_tapes(1.05, 2) == 12


def test_throughput_override_reproduces_doq1_run():
    job = run_backup("DOQ_1", 1.33, throughput_gb_per_h=165)
    assert job.duration_h == pytest.approx(8.25, abs=0.02)


def test_weekend_schedule():
    jobs = schedule_weekend(3)
    assert [j.partition for j in jobs] == ["DRG_DB", "DOQ_0", "DOQ_1"]
    base = 3 * WEEK
    assert [j.start - base for j in jobs] == [5 * DAY + 2 * HOUR, 5 * DAY + 14 * HOUR,
                                              6 * DAY + 2 * HOUR]
    assert jobs[2].data_tb == 1.33 == DEFAULT_BACKUP_TB["DOQ_1"]


def test_verify_restore():
    ok = run_backup("DRG_DB", 0.9)
    assert verify_restore(ok).ok
    bad = verify_restore(ok, label_fault=True)
    assert not bad.ok and str(bad) == "failed(tape-labeling)"
    failed = run_backup("DRG_DB", 0.9, tape_fabric_ok=False)
    with pytest.raises(BackupError):
        verify_restore(failed)


@given(st.floats(0.01, 5), st.integers(1, 8))
def test_duration_linear_in_size_and_inverse_in_drives(tb, drives):
    a = run_backup("DRG_DB", tb, TapeLibrarySpec(drives=drives))
    b = run_backup("DRG_DB", 2 * tb, TapeLibrarySpec(drives=drives))
    c = run_backup("DRG_DB", tb, TapeLibrarySpec(drives=2 * drives))
    assert b.duration_h == pytest.approx(2 * a.duration_h)
    assert c.duration_h == pytest.approx(a.duration_h / 2)


@given(st.floats(0, 5), st.integers(1, 8))
def test_tapes_hold_the_data(tb, drives):
    lib = TapeLibrarySpec(drives=drives)
    job = run_backup("DOQ_0", tb, lib)
    assert job.tapes_used * lib.tape_native_capacity_gb >= job.data_gb - 1e-6
    assert job.tapes_used == oracles.backup_tapes(tb, drives)


@given(st.floats(0.5, 1.05))
def test_terabyte_class_backup_under_eight_hours(tb):
    assert run_backup("DRG_DB", tb).duration_h < 8


def test_fabric3_down_all_weekend_fails_all_three():
    res = run(scenario([step(4 * DAY, "fail_fabric", "3", repair_after_s=4 * DAY)],
                       horizon_h=24 * 7, backups={"weekly": True}))
    assert [j.status for j in res.backups] == ["failed"] * 3
    assert sum("backup_alert" in e or "alert" in e for e in res.events) >= 3
    assert res.ledger.union_s() == 0


def test_weekly_backups_never_touch_the_ledger():
    res = run(scenario(horizon_h=24 * 7 * 8, backups={"weekly": True}))
    assert len(res.backups) == 24
    assert all(j.status == "ok" for j in res.backups)
    assert res.ledger.intervals == []


def test_restore_steps():
    steps = [step(DAY, "backup", "DOQ_1", tb=1.33),
             step(2 * DAY, "verify_restore", "DOQ_1", label_fault=True),
             step(3 * DAY, "verify_restore", "DOQ_1")]
    res = run(scenario(steps, horizon_h=24 * 4))
    assert [r.result for r in res.restores] == ["failed(tape-labeling)", "ok"]
    assert res.ledger.union_s() == 0
