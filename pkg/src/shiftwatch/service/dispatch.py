"""Alert delivery to the control-room webhook, with retry and a dead-letter spool.

Request: ``POST <webhook_url>`` with ``Content-Type: application/json`` and an
``Idempotency-Key`` header (``<timestamp>|<kind>|<operator_id>``). The body is
the alert payload::

    {"schema_version": 1, "kind": "overtime" | "trespass", "timestamp": "...Z",
     "operator_id": str, "shift_duration_seconds": float,   # overtime only
     "frame_ref": str}

Dead-letter file: one JSON object per line,
``{"idempotency_key", "url", "error", "payload"}``.
"""
from __future__ import annotations

import enum
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from ..errors import WebhookConfigError
from ..tracker import AlertEvent

log = logging.getLogger(__name__)


class Delivery(str, enum.Enum):
    DELIVERED = "delivered"
    SPOOLED = "spooled"
    LOCAL_ONLY = "local_only"
    DUPLICATE = "duplicate"


def post_json(url: str, body: dict, headers: dict[str, str], timeout: float) -> int:
    """POST and return the HTTP status (raises OSError on transport failure)."""
    data = json.dumps(body, separators=(",", ":")).encode("utf-8")
    req = urllib.request.Request(url, data=data, method="POST",
                                 headers={"Content-Type": "application/json", **headers})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status
    except urllib.error.HTTPError as exc:
        return exc.code


@dataclass
class DispatchStats:
    delivered: int = 0
    undelivered: int = 0
    local_only: int = 0


class AlertDispatcher:
    """Delivers each distinct alert at most once; failures land in the dead-letter file."""

    def __init__(
        self,
        webhook_url: str | None,
        dead_letter_path: str | Path,
        attempts: int = 3,
        backoff: float = 0.5,
        timeout: float = 5.0,
        sleep: Callable[[float], None] = time.sleep,
        post: Callable[[str, dict, dict, float], int] = post_json,
    ):
        self.webhook_url = webhook_url
        self.dead_letter_path = Path(dead_letter_path)
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self._sleep = sleep
        self._post = post
        self._seen: set[str] = set()
        self._lock = threading.Lock()
        self.stats = DispatchStats()
        self._executor: ThreadPoolExecutor | None = None
        self._pending: list[Future] = []

    def dispatch(self, event: AlertEvent) -> Delivery:
        key = event.idempotency_key
        with self._lock:
            if key in self._seen:
                return Delivery.DUPLICATE
            self._seen.add(key)
        if not self.webhook_url:
            log.info("alert (no webhook configured): %s", key)
            self.stats.local_only += 1
            return Delivery.LOCAL_ONLY
        payload = event.to_payload()
        error = ""
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                status = self._post(self.webhook_url, payload, {"Idempotency-Key": key}, self.timeout)
            except OSError as exc:
                error = f"transport error: {exc}"
                log.warning("alert %s attempt %d failed: %s", key, attempt + 1, error)
                continue
            if 200 <= status < 300:
                self.stats.delivered += 1
                return Delivery.DELIVERED
            if 400 <= status < 500:
                self._spool(key, payload, f"HTTP {status}")
                raise WebhookConfigError(status, self.webhook_url)
            error = f"HTTP {status}"
            log.warning("alert %s attempt %d failed: %s", key, attempt + 1, error)
        self._spool(key, payload, error)
        return Delivery.SPOOLED

    def _spool(self, key: str, payload: dict, error: str) -> None:
        rec = {"idempotency_key": key, "url": self.webhook_url, "error": error, "payload": payload}
        with self._lock:
            self.dead_letter_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.dead_letter_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
            self.stats.undelivered += 1

    def submit(self, event: AlertEvent) -> Future:
        """Deliver in the background, in submission order."""
        self._raise_pending_config_error()
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="alert-dispatch")
        fut = self._executor.submit(self.dispatch, event)
        self._pending.append(fut)
        return fut

    def _raise_pending_config_error(self) -> None:
        done = [f for f in self._pending if f.done()]
        self._pending = [f for f in self._pending if not f.done()]
        for f in done:
            f.result()

    def close(self) -> DispatchStats:
        """Wait for queued deliveries; re-raises a WebhookConfigError if one occurred."""
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        pending, self._pending = self._pending, []
        for f in pending:
            f.result()
        return self.stats


def dispatch_alert(event: AlertEvent, webhook_url: str | None, dead_letter_path: str | Path,
                   **kwargs) -> Delivery:
    return AlertDispatcher(webhook_url, dead_letter_path, **kwargs).dispatch(event)


def replay_dead_letters(path: str | Path, webhook_url: str | None = None, **kwargs) -> tuple[int, int]:
    """Retry spooled alerts; undelivered ones stay in the file. Returns (delivered, remaining)."""
    path = Path(path)
    if not path.exists():
        return 0, 0
    records = [json.loads(ln) for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    tmp = path.with_name(path.name + ".retry")
    tmp.unlink(missing_ok=True)
    delivered = 0
    for rec in records:
        url = webhook_url or rec["url"]
        d = AlertDispatcher(url, tmp, **kwargs)
        if d.dispatch(AlertEvent.from_payload(rec["payload"])) is Delivery.DELIVERED:
            delivered += 1
    remaining = len(records) - delivered
    if tmp.exists():
        tmp.replace(path)
    else:
        path.unlink()
    return delivered, remaining
