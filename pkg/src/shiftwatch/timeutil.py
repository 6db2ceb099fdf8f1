"""UTC timestamp helpers. Every persisted timestamp uses RFC 3339 with a Z suffix."""
from __future__ import annotations

from datetime import datetime, timedelta, timezone

UTC = timezone.utc


def format_utc(ts: datetime) -> str:
    """``YYYY-MM-DDTHH:MM:SS.ffffffZ``, always six fractional digits."""
    if ts.tzinfo is None:
        raise ValueError("naive datetime; timestamps must be UTC-aware")
    return ts.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_utc(text: str) -> datetime:
    if not isinstance(text, str):
        raise TypeError(f"timestamp must be a string, got {type(text).__name__}")
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return ts.astimezone(UTC)


def from_epoch(seconds: float) -> datetime:
    return datetime(1970, 1, 1, tzinfo=UTC) + timedelta(seconds=seconds)


def to_epoch(ts: datetime) -> float:
    return (ts - datetime(1970, 1, 1, tzinfo=UTC)).total_seconds()
