"""Frame sources and fixed-interval sampling.

Two on-disk sources are supported:

* a directory of ``<unix_epoch_seconds>_<seq>.png|jpg`` files, ordered by
  (epoch, seq); the frame_ref is the file stem;
* a manifest text file, one frame per line: ``<timestamp> <frame_ref> <image_path>``
  where timestamp is epoch seconds or RFC 3339 UTC. Blank lines and ``#``
  comments are skipped. Several frames may share one image file.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Iterator

from ..errors import OutOfOrderError, SourceError
from ..imaging import GrayImage, load_gray
from ..timeutil import from_epoch, parse_utc

log = logging.getLogger(__name__)

FRAME_NAME = re.compile(r"^(\d+)_(\d+)\.(png|jpe?g)$", re.IGNORECASE)


@dataclass(frozen=True, eq=False)
class Frame:
    timestamp: datetime
    frame_ref: str
    loader: Callable[[], GrayImage] | None = None

    def load(self) -> GrayImage:
        if self.loader is None:
            raise SourceError(f"frame {self.frame_ref} has no pixel data")
        return self.loader()


@lru_cache(maxsize=64)
def _cached_gray(path: str) -> GrayImage:
    return load_gray(path)


class DirectorySource:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def __iter__(self) -> Iterator[Frame]:
        if not self.directory.is_dir():
            raise SourceError(f"source directory not found: {self.directory}")
        entries = []
        for p in self.directory.iterdir():
            m = FRAME_NAME.match(p.name)
            if m is None:
                log.debug("skipping %s: not a frame filename", p.name)
                continue
            entries.append((int(m.group(1)), int(m.group(2)), p))
        for epoch, _seq, p in sorted(entries):
            yield Frame(from_epoch(epoch), p.stem, lambda p=p: load_gray(p))


class ManifestSource:
    def __init__(self, manifest: str | Path):
        self.manifest = Path(manifest)

    def __iter__(self) -> Iterator[Frame]:
        try:
            lines = self.manifest.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise SourceError(f"cannot read manifest {self.manifest}: {exc}") from exc
        base = self.manifest.parent
        for lineno, line in enumerate(lines, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise SourceError(f"{self.manifest}:{lineno}: expected '<timestamp> <frame_ref> <path>'")
            ts_raw, ref, img = parts
            try:
                ts = from_epoch(float(ts_raw))
            except ValueError:
                try:
                    ts = parse_utc(ts_raw)
                except ValueError as exc:
                    raise SourceError(f"{self.manifest}:{lineno}: bad timestamp {ts_raw!r}") from exc
            path = str(base / img)
            yield Frame(ts, ref, lambda path=path: _cached_gray(path))


def sample_frames(source: Iterable[Frame], interval: float | timedelta) -> Iterator[Frame]:
    """Emit the first frame, then each first frame at least ``interval`` after the last emitted."""
    step = interval if isinstance(interval, timedelta) else timedelta(seconds=interval)
    if step <= timedelta(0):
        raise ValueError("sampling interval must be positive")
    last_seen: datetime | None = None
    next_due: datetime | None = None
    for frame in source:
        if last_seen is not None and frame.timestamp < last_seen:
            raise OutOfOrderError(f"frame {frame.frame_ref} goes back in time")
        last_seen = frame.timestamp
        if next_due is None or frame.timestamp >= next_due:
            next_due = frame.timestamp + step
            yield frame
