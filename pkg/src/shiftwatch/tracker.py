"""Shift sessions from per-frame match results, with overtime and trespass alerts.

Observation log: UTF-8, one JSON object per line, keys in this order::

    {"timestamp":"2017-05-17T04:00:00.000000Z","frame_ref":"1494993600_0",
     "outcome":"matched","operator_id":"sk_sharma","distance":0.0731}

``outcome`` is ``matched`` or ``unknown``; ``operator_id`` is null for
unknown faces and ``distance`` is null when the gallery was empty. Compact
separators, floats as shortest round-trip repr.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InvalidClockError, OutOfOrderError
from .gallery import MatchResult
from .timeutil import format_utc, parse_utc

ALERT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Observation:
    timestamp: datetime
    frame_ref: str
    result: MatchResult

    def to_json(self) -> str:
        return json.dumps(
            {
                "timestamp": format_utc(self.timestamp),
                "frame_ref": self.frame_ref,
                "outcome": "matched" if self.result.matched else "unknown",
                "operator_id": self.result.operator_id,
                "distance": self.result.distance,
            },
            separators=(",", ":"),
            allow_nan=False,
        )

    @classmethod
    def from_json(cls, line: str) -> Observation:
        d = json.loads(line)
        outcome = d["outcome"]
        if outcome not in ("matched", "unknown"):
            raise ValueError(f"bad outcome {outcome!r}")
        op = d.get("operator_id")
        if (outcome == "matched") != (op is not None):
            raise ValueError("operator_id must be set exactly for matched outcomes")
        dist = d.get("distance")
        return cls(parse_utc(d["timestamp"]), str(d["frame_ref"]),
                   MatchResult(op, None if dist is None else float(dist)))


def write_observations(observations: Iterable[Observation], path: str | Path, append: bool = True) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for obs in observations:
            fh.write(obs.to_json() + "\n")


def read_observations(path: str | Path) -> list[Observation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Observation.from_json(line))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad observation record: {exc}") from exc
    return out


@dataclass
class ShiftSession:
    operator_id: str
    start: datetime
    last_seen: datetime
    alerted: bool = False
    closed: bool = False


def shift_duration(session: ShiftSession, now: datetime) -> timedelta:
    """Wall-clock time in shift as of ``now``; closed sessions stop at ``last_seen``."""
    if now < session.start:
        raise InvalidClockError(f"now ({now}) precedes session start ({session.start})")
    end = min(now, session.last_seen) if session.closed else now
    return end - session.start


@dataclass(frozen=True)
class TrackerConfig:
    shift_limit: timedelta = timedelta(hours=8)
    gap_tolerance: timedelta = timedelta(minutes=30)
    trespass_throttle: timedelta = timedelta(minutes=5)

    def __post_init__(self) -> None:
        zero = timedelta(0)
        if min(self.shift_limit, self.gap_tolerance, self.trespass_throttle) <= zero:
            raise ValueError("tracker durations must be positive")
        if self.gap_tolerance >= self.shift_limit:
            raise ValueError("gap_tolerance must be shorter than shift_limit")


class AlertKind(str, enum.Enum):
    OVERTIME = "overtime"
    TRESPASS = "trespass"


@dataclass(frozen=True)
class AlertEvent:
    kind: AlertKind
    timestamp: datetime
    frame_ref: str
    operator_id: str | None = None
    shift_duration: timedelta | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AlertKind(self.kind))
        overtime = self.kind is AlertKind.OVERTIME
        if overtime != (self.operator_id is not None) or overtime != (self.shift_duration is not None):
            raise ValueError(f"{self.kind.value} alert has the wrong field set")

    @property
    def idempotency_key(self) -> str:
        return f"{format_utc(self.timestamp)}|{self.kind.value}|{self.operator_id or ''}"

    def to_payload(self) -> dict:
        """Webhook/alert-log body."""
        body: dict = {
            "schema_version": ALERT_SCHEMA_VERSION,
            "kind": self.kind.value,
            "timestamp": format_utc(self.timestamp),
        }
        if self.operator_id is not None:
            body["operator_id"] = self.operator_id
            body["shift_duration_seconds"] = self.shift_duration.total_seconds()
        body["frame_ref"] = self.frame_ref
        return body

    @classmethod
    def from_payload(cls, body: dict) -> AlertEvent:
        secs = body.get("shift_duration_seconds")
        return cls(
            AlertKind(body["kind"]),
            parse_utc(body["timestamp"]),
            body["frame_ref"],
            body.get("operator_id"),
            None if secs is None else timedelta(seconds=secs),
        )


@dataclass
class ShiftTracker:
    """Single-writer session state machine. Feed observations in timestamp order."""

    config: TrackerConfig = field(default_factory=TrackerConfig)
    open_sessions: dict[str, ShiftSession] = field(default_factory=dict)
    closed_sessions: list[ShiftSession] = field(default_factory=list)
    last_timestamp: datetime | None = None
    last_trespass: datetime | None = None

    def ingest(self, obs: Observation) -> list[AlertEvent]:
        ts = obs.timestamp
        if self.last_timestamp is not None and ts < self.last_timestamp:
            raise OutOfOrderError(
                f"observation {obs.frame_ref} at {format_utc(ts)} precedes {format_utc(self.last_timestamp)}"
            )
        self.last_timestamp = ts
        if not obs.result.matched:
            if self.last_trespass is not None and ts - self.last_trespass < self.config.trespass_throttle:
                return []
            self.last_trespass = ts
            return [AlertEvent(AlertKind.TRESPASS, ts, obs.frame_ref)]

        op = obs.result.operator_id
        session = self.open_sessions.get(op)
        if session is not None and ts - session.last_seen <= self.config.gap_tolerance:
            session.last_seen = ts
        else:
            if session is not None:
                self._close(session)
            session = ShiftSession(op, ts, ts)
            self.open_sessions[op] = session
        duration = session.last_seen - session.start
        if duration >= self.config.shift_limit and not session.alerted:
            session.alerted = True
            return [AlertEvent(AlertKind.OVERTIME, ts, obs.frame_ref, op, duration)]
        return []

    def _close(self, session: ShiftSession) -> None:
        session.closed = True
        del self.open_sessions[session.operator_id]
        self.closed_sessions.append(session)

    def close_stale(self, now: datetime) -> list[ShiftSession]:
        stale = [s for s in self.open_sessions.values()
                 if now - s.last_seen > self.config.gap_tolerance]
        for s in stale:
            self._close(s)
        return stale

    def sessions(self) -> list[ShiftSession]:
        """Every session so far (copies), ordered by (start, operator_id)."""
        allv = [*self.closed_sessions, *self.open_sessions.values()]
        return [replace(s) for s in sorted(allv, key=lambda s: (s.start, s.operator_id))]


def replay(observations: Iterable[Observation],
           config: TrackerConfig | None = None) -> tuple[ShiftTracker, list[AlertEvent]]:
    tracker = ShiftTracker(config or TrackerConfig())
    alerts: list[AlertEvent] = []
    for obs in observations:
        alerts.extend(tracker.ingest(obs))
    return tracker, alerts


def iter_alert_log(path: str | Path) -> Iterator[AlertEvent]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield AlertEvent.from_payload(json.loads(line))
