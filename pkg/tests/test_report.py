from datetime import date, datetime, timedelta, timezone

import pytest

from scenarios import SHIFT_DAY, CREW_NAMES, crew_observations
from shiftwatch.errors import UsageError
from shiftwatch.gallery import MatchResult
from shiftwatch.report import ABSENT, UNKNOWN, generate_report, render_report
from shiftwatch.tracker import Observation

D = date(2020, 3, 2)
MID = datetime(2020, 3, 2, tzinfo=timezone.utc)


def obs(at, op, ref=None):
    return Observation(at, ref or f"r{int(at.timestamp())}",
                       MatchResult(op, 0.2) if op else MatchResult.unknown(1.2))


def test_crew_day_rows():
    rep = generate_report(crew_observations(), None, SHIFT_DAY.date(), names=CREW_NAMES)
    assert [(r.hour.hour, r.operator, r.hours_in_shift) for r in rep.present_rows()] == [
        (0, "TK Tiwari", 8), (4, "SK Sharma", 0), (8, "SK Sharma", 4)]
    assert [r.hour.hour for r in rep.rows] == [0, 4, 8, 12, 16, 20]
    assert all(r.absent for r in rep.rows[3:])


def test_empty_log_all_absent():
    rep = generate_report([], None, D)
    assert len(rep.rows) == 6 and all(r.operator == ABSENT and r.snapshot_ref == "" for r in rep.rows)
    assert rep.generated_at == MID


def test_ninety_minutes_floors_to_one():
    log = [obs(MID + timedelta(hours=2, minutes=30) + timedelta(minutes=m), "a") for m in range(0, 91, 10)]
    rep = generate_report(log, None, D)
    row = rep.rows[1]
    assert row.operator == "a" and row.hours_in_shift == 1


def test_unknown_row_and_tie_breaks():
    at = MID + timedelta(hours=4)
    log = [obs(at - timedelta(minutes=5), None, "early"), obs(at + timedelta(minutes=5), "b", "late")]
    assert generate_report(log, None, D).rows[1].snapshot_ref == "early"
    log = [obs(at, None, "u"), obs(at, "b", "m")]
    assert generate_report(log, None, D).rows[1].operator == "b"
    log = [obs(at, None, "u")]
    assert generate_report(log, None, D).rows[1].operator == UNKNOWN


def test_window_is_half_cadence():
    log = [obs(MID + timedelta(hours=2, seconds=1), "a")]
    rows = generate_report(log, None, D).rows
    assert rows[0].absent and rows[1].operator == "a"


def test_cadence_changes_row_count():
    assert len(generate_report([], None, D, cadence=1).rows) == 24
    assert len(generate_report([], None, D, cadence=24).rows) == 1
    for bad in (0, 25, 2.5):
        with pytest.raises(UsageError):
            generate_report([], None, D, cadence=bad)


def test_unsorted_log_rejected():
    with pytest.raises(ValueError):
        generate_report([obs(MID + timedelta(hours=1), "a"), obs(MID, "a")], None, D)


def test_csv_rendering():
    rep = generate_report(crew_observations(), None, SHIFT_DAY.date(), names=CREW_NAMES)
    lines = render_report(rep, "csv").decode().split("\n")
    assert lines[0] == "HOUR,SNAPSHOT,OPERATOR,HOURS_IN_SHIFT"
    assert lines[1] == "2017-05-17T00:00:00.000000Z,1494979200_0,TK Tiwari,8"
    assert lines[4] == "2017-05-17T12:00:00.000000Z,,—,0"
    assert lines[-1] == "" and len(lines) == 8


def test_text_rendering_and_determinism():
    log = crew_observations()
    a = render_report(generate_report(log, None, SHIFT_DAY.date(), names=CREW_NAMES), "text")
    b = render_report(generate_report(log, None, SHIFT_DAY.date(), names=CREW_NAMES), "text")
    assert a == b
    text = a.decode()
    assert text.startswith("Train Operator report for 2017-05-17\n")
    assert "operator: SK Sharma\nhours_in_shift: 4" in text


def test_unknown_format():
    with pytest.raises(UsageError):
        render_report(generate_report([], None, D), "pdf")
