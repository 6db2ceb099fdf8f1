from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from scenarios import SHIFT_DAY, crew_observations
from shiftwatch.errors import InvalidClockError, OutOfOrderError
from shiftwatch.gallery import MatchResult
from shiftwatch.tracker import (AlertEvent, AlertKind, Observation, ShiftSession, ShiftTracker,
                                TrackerConfig, read_observations, replay, shift_duration,
                                write_observations)

T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)
M = timedelta(minutes=1)


def seen(op, minutes):
    return Observation(T0 + minutes * M, f"f{int(minutes * 60)}",
                       MatchResult(op, 0.1) if op else MatchResult.unknown(1.3))


def test_crew_day_sessions_and_single_overtime():
    tracker, alerts = replay(crew_observations())
    sessions = tracker.sessions()
    assert [(s.operator_id, s.start, s.last_seen) for s in sessions] == [
        ("tk_tiwari", SHIFT_DAY - timedelta(hours=8), SHIFT_DAY),
        ("sk_sharma", SHIFT_DAY + timedelta(hours=4), SHIFT_DAY + timedelta(hours=9)),
    ]
    assert len(alerts) == 1
    a = alerts[0]
    assert (a.kind, a.operator_id, a.timestamp) == (AlertKind.OVERTIME, "tk_tiwari", SHIFT_DAY)
    assert a.shift_duration == timedelta(hours=8)


def test_gap_within_tolerance_extends():
    tracker, _ = replay([seen("a", 0), seen("a", 30), seen("a", 40)])
    assert len(tracker.sessions()) == 1


def test_gap_beyond_tolerance_splits():
    tracker, _ = replay([seen("a", 0), seen("a", 30.5)])
    ss = tracker.sessions()
    assert len(ss) == 2 and ss[0].closed and not ss[1].closed


def test_overtime_fires_once_and_rearms_on_new_session():
    obs = [seen("a", m) for m in range(0, 8 * 60 + 60, 10)]
    _, alerts = replay(obs)
    assert [a.timestamp for a in alerts] == [T0 + 8 * 60 * M]
    later = obs + [seen("a", m) for m in range(10 * 60, 18 * 60 + 1, 10)]
    _, alerts = replay(later)
    assert len(alerts) == 2


def test_just_under_limit_no_overtime():
    _, alerts = replay([seen("a", m) for m in range(0, 8 * 60, 20)])
    assert alerts == []


def test_trespass_throttle_global():
    obs = [seen(None, 0), seen(None, 2), seen(None, 4.9), seen(None, 5), seen(None, 9), seen(None, 10)]
    _, alerts = replay(obs)
    assert [a.timestamp for a in alerts] == [T0, T0 + 5 * M, T0 + 10 * M]
    assert all(a.kind is AlertKind.TRESPASS and a.operator_id is None for a in alerts)


def test_out_of_order_rejected_without_state_change():
    tr = ShiftTracker()
    tr.ingest(seen("a", 10))
    before = tr.sessions()
    with pytest.raises(OutOfOrderError):
        tr.ingest(seen("a", 5))
    assert tr.sessions() == before and tr.last_timestamp == T0 + 10 * M
    tr.ingest(seen("a", 10))  # equal timestamps are fine


def test_close_stale():
    tr = ShiftTracker()
    tr.ingest(seen("a", 0))
    assert tr.close_stale(T0 + 29 * M) == []
    assert [s.operator_id for s in tr.close_stale(T0 + 31 * M)] == ["a"]
    assert tr.open_sessions == {}


def test_shift_duration_clock():
    s = ShiftSession("a", T0, T0 + 60 * M)
    assert shift_duration(s, T0 + 90 * M) == 90 * M
    s.closed = True
    assert shift_duration(s, T0 + 90 * M) == 60 * M
    with pytest.raises(InvalidClockError):
        shift_duration(s, T0 - M)


def test_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(gap_tolerance=timedelta(hours=9))
    with pytest.raises(ValueError):
        TrackerConfig(trespass_throttle=timedelta(0))


def test_alert_payload_round_trip():
    a = AlertEvent(AlertKind.OVERTIME, T0, "ref", "a", timedelta(hours=8, seconds=20))
    body = a.to_payload()
    assert list(body) == ["schema_version", "kind", "timestamp", "operator_id",
                          "shift_duration_seconds", "frame_ref"]
    assert body["shift_duration_seconds"] == 28820.0
    assert AlertEvent.from_payload(body) == a
    t = AlertEvent(AlertKind.TRESPASS, T0, "ref")
    assert "operator_id" not in t.to_payload()
    assert t.idempotency_key == "2020-01-01T00:00:00.000000Z|trespass|"
    with pytest.raises(ValueError):
        AlertEvent(AlertKind.TRESPASS, T0, "ref", "a")


def test_observation_log_round_trip(tmp_path):
    obs = [seen("a", 0), seen(None, 1), Observation(T0, "x", MatchResult.unknown())]
    write_observations(obs, tmp_path / "o.jsonl", append=False)
    assert read_observations(tmp_path / "o.jsonl") == obs
    first = (tmp_path / "o.jsonl").read_text().splitlines()[0]
    assert first == ('{"timestamp":"2020-01-01T00:00:00.000000Z","frame_ref":"f0",'
                     '"outcome":"matched","operator_id":"a","distance":0.1}')


events = st.lists(st.tuples(st.sampled_from(["a", "b", "c", None]), st.integers(0, 40)),
                  max_size=80)


@settings(max_examples=60, deadline=None)
@given(events)
def test_invariants(seq):
    t, obs = 0, []
    for op, step in seq:
        t += step
        obs.append(seen(op, t))
    tr1, al1 = replay(obs)
    tr2, al2 = replay(obs)
    assert al1 == al2 and tr1.sessions() == tr2.sessions()
    by_op = {}
    for s in tr1.sessions():
        assert s.start <= s.last_seen
        by_op.setdefault(s.operator_id, []).append(s)
    for ss in by_op.values():
        for a, b in zip(ss, ss[1:]):
            assert b.start - a.last_seen > TrackerConfig().gap_tolerance
    trespass = [a.timestamp for a in al1 if a.kind is AlertKind.TRESPASS]
    assert all(b - a >= TrackerConfig().trespass_throttle for a, b in zip(trespass, trespass[1:]))
    overtime = [a for a in al1 if a.kind is AlertKind.OVERTIME]
    assert all(a.shift_duration >= TrackerConfig().shift_limit for a in overtime)
