"""Daily operator shift report (hour, snapshot, operator, hours in shift)."""
from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass
from datetime import date as Date, datetime, time, timedelta
from typing import Mapping, Sequence

from .errors import UsageError
from .timeutil import UTC, format_utc
from .tracker import Observation, ShiftSession, TrackerConfig, replay, shift_duration

UNKNOWN = "UNKNOWN"
ABSENT = "—"
CSV_HEADER = ("HOUR", "SNAPSHOT", "OPERATOR", "HOURS_IN_SHIFT")
FORMATS = ("csv", "text")


@dataclass(frozen=True)
class ReportRow:
    hour: datetime
    snapshot_ref: str
    operator: str
    hours_in_shift: int

    @property
    def absent(self) -> bool:
        return self.operator == ABSENT


@dataclass(frozen=True)
class DailyReport:
    date: Date
    rows: tuple[ReportRow, ...]
    generated_at: datetime

    def present_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.absent]


def _pick(log: Sequence[Observation], stamps: list[datetime], instant: datetime,
          half: timedelta) -> Observation | None:
    lo = bisect.bisect_left(stamps, instant - half)
    hi = bisect.bisect_right(stamps, instant + half)
    if lo == hi:
        return None

    def rank(obs: Observation):
        return (abs(obs.timestamp - instant), obs.timestamp,
                not obs.result.matched, obs.result.operator_id or "", obs.frame_ref)

    return min(log[lo:hi], key=rank)


def _session_at(sessions: Sequence[ShiftSession], operator_id: str, ts: datetime) -> ShiftSession | None:
    for s in sessions:
        if s.operator_id == operator_id and s.start <= ts and (not s.closed or ts <= s.last_seen):
            return s
    return None


def generate_report(
    log: Sequence[Observation],
    sessions: Sequence[ShiftSession] | None,
    date: Date,
    cadence: int = 4,
    names: Mapping[str, str] | None = None,
    tracker_config: TrackerConfig | None = None,
    generated_at: datetime | None = None,
) -> DailyReport:
    """One row per cadence-aligned hour of ``date``.

    Each row uses the observation nearest that hour within +/- cadence/2.
    ``sessions`` default to a replay of ``log``. ``generated_at`` defaults
    to the last log timestamp (or the date's midnight) so output is a pure
    function of the inputs.
    """
    if not (isinstance(cadence, int) and 1 <= cadence <= 24):
        raise UsageError(f"cadence must be an integer number of hours in [1, 24], got {cadence!r}")
    stamps = [o.timestamp for o in log]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("observation log must be sorted by timestamp")
    if sessions is None:
        sessions = replay(log, tracker_config)[0].sessions()
    names = names or {}
    midnight = datetime.combine(date, time(0), tzinfo=UTC)
    half = timedelta(hours=cadence) / 2
    rows = []
    for h in range(0, 24, cadence):
        instant = midnight + timedelta(hours=h)
        obs = _pick(log, stamps, instant, half)
        if obs is None:
            rows.append(ReportRow(instant, "", ABSENT, 0))
        elif not obs.result.matched:
            rows.append(ReportRow(instant, obs.frame_ref, UNKNOWN, 0))
        else:
            op = obs.result.operator_id
            session = _session_at(sessions, op, obs.timestamp)
            hours = 0
            if session is not None:
                hours = int(shift_duration(session, obs.timestamp) // timedelta(hours=1))
            rows.append(ReportRow(instant, obs.frame_ref, names.get(op, op), hours))
    if generated_at is None:
        generated_at = stamps[-1] if stamps else midnight
    return DailyReport(date, tuple(rows), generated_at)


def render_report(report: DailyReport, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.rows:
            w.writerow((format_utc(r.hour), r.snapshot_ref, r.operator, r.hours_in_shift))
        return buf.getvalue().encode("utf-8")
    if fmt == "text":
        parts = [
            f"Train Operator report for {report.date.isoformat()}",
            f"generated_at: {format_utc(report.generated_at)}",
        ]
        for r in report.rows:
            parts.append("")
            parts.append(f"hour: {format_utc(r.hour)}")
            parts.append(f"snapshot: {r.snapshot_ref}")
            parts.append(f"operator: {r.operator}")
            parts.append(f"hours_in_shift: {r.hours_in_shift}")
        return ("\n".join(parts) + "\n").encode("utf-8")
    raise UsageError(f"unsupported report format {fmt!r}; choose one of {', '.join(FORMATS)}")
