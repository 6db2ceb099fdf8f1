"""Operator enrollment database and nearest-neighbor matching.

Gallery file (UTF-8 JSON, written with ``indent=1`` and a trailing newline)::

    {"format": "shiftwatch-gallery", "format_version": 1, "version": <int>,
     "records": [{"operator_id": str, "display_name": str,
                  "enrolled_at": "YYYY-MM-DDTHH:MM:SS.ffffffZ",
                  "source_image_ref": str, "embedding": [128 floats]}, ...]}

Keys appear in exactly that order. Floats use Python's shortest round-trip
repr, so embeddings survive a save/load cycle bit for bit.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .embed import as_embedding
from .errors import AlreadyEnrolledError, CorruptGalleryError, InvalidEmbeddingError
from .timeutil import format_utc, parse_utc

GALLERY_FORMAT = "shiftwatch-gallery"
GALLERY_FORMAT_VERSION = 1
DEFAULT_THRESHOLD = 0.9


@dataclass(frozen=True, eq=False)
class OperatorRecord:
    operator_id: str
    display_name: str
    embedding: np.ndarray
    enrolled_at: datetime
    source_image_ref: str = ""

    def __post_init__(self) -> None:
        if not self.operator_id:
            raise ValueError("operator_id must be non-empty")
        object.__setattr__(self, "embedding", as_embedding(self.embedding))
        if self.enrolled_at.tzinfo is None:
            raise ValueError("enrolled_at must be timezone-aware UTC")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OperatorRecord):
            return NotImplemented
        return (
            self.operator_id == other.operator_id
            and self.display_name == other.display_name
            and self.enrolled_at == other.enrolled_at
            and self.source_image_ref == other.source_image_ref
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True)
class Gallery:
    """Immutable snapshot; every mutation returns a new gallery with version + 1."""

    records: Mapping[str, OperatorRecord] = field(default_factory=dict)
    version: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, operator_id: object) -> bool:
        return operator_id in self.records

    def __getitem__(self, operator_id: str) -> OperatorRecord:
        return self.records[operator_id]

    def ids(self) -> list[str]:
        return list(self.records)

    def display_names(self) -> dict[str, str]:
        return {k: r.display_name for k, r in self.records.items()}

    def remove(self, operator_id: str) -> Gallery:
        recs = dict(self.records)
        del recs[operator_id]
        return Gallery(recs, self.version + 1)


def enroll(
    gallery: Gallery,
    operator_id: str,
    display_name: str,
    embedding,
    source_image_ref: str = "",
    enrolled_at: datetime | None = None,
    replace_existing: bool = False,
) -> Gallery:
    if operator_id in gallery.records and not replace_existing:
        raise AlreadyEnrolledError(operator_id)
    rec = OperatorRecord(
        operator_id, display_name, embedding,
        enrolled_at or datetime.now(timezone.utc), source_image_ref,
    )
    recs = dict(gallery.records)
    recs[operator_id] = rec
    return Gallery(recs, gallery.version + 1)


@dataclass(frozen=True)
class MatchPolicy:
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        if not (0 < self.threshold <= 2):
            raise ValueError(f"threshold must lie in (0, 2], got {self.threshold}")


@dataclass(frozen=True)
class MatchResult:
    """``operator_id`` is None for an Unknown outcome; ``distance`` is None only for an empty gallery."""

    operator_id: str | None
    distance: float | None

    @property
    def matched(self) -> bool:
        return self.operator_id is not None

    @classmethod
    def unknown(cls, best_distance: float | None = None) -> MatchResult:
        return cls(None, best_distance)


def nearest(embedding, gallery: Gallery) -> tuple[str, float] | None:
    """Closest record, ties broken by the lexicographically smallest operator_id."""
    if not gallery.records:
        return None
    ids = list(gallery.records)
    mat = np.stack([gallery.records[i].embedding for i in ids])
    d = np.linalg.norm(mat - np.asarray(embedding, dtype=np.float64), axis=1)
    best = float(d.min())
    winner = min(i for i, di in zip(ids, d) if di == best)
    return winner, best


def match(embedding, gallery: Gallery, policy: MatchPolicy = MatchPolicy()) -> MatchResult:
    hit = nearest(embedding, gallery)
    if hit is None:
        return MatchResult.unknown()
    op, d = hit
    return MatchResult(op, d) if d <= policy.threshold else MatchResult.unknown(d)


def _record_to_json(r: OperatorRecord) -> dict:
    return {
        "operator_id": r.operator_id,
        "display_name": r.display_name,
        "enrolled_at": format_utc(r.enrolled_at),
        "source_image_ref": r.source_image_ref,
        "embedding": [float(v) for v in r.embedding],
    }


def save_gallery(gallery: Gallery, path: str | Path) -> None:
    doc = {
        "format": GALLERY_FORMAT,
        "format_version": GALLERY_FORMAT_VERSION,
        "version": gallery.version,
        "records": [_record_to_json(r) for r in gallery.records.values()],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def load_gallery(path: str | Path) -> Gallery:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptGalleryError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != GALLERY_FORMAT:
        raise CorruptGalleryError(f"{path} is not a gallery file")
    if doc.get("format_version") != GALLERY_FORMAT_VERSION:
        raise CorruptGalleryError(f"unsupported gallery format_version {doc.get('format_version')!r}")
    version = doc.get("version")
    if not isinstance(version, int) or version < 0:
        raise CorruptGalleryError(f"bad gallery version {version!r}")
    raw = doc.get("records")
    if not isinstance(raw, list):
        raise CorruptGalleryError("'records' must be a list")
    recs: dict[str, OperatorRecord] = {}
    for idx, item in enumerate(raw):
        ident = item.get("operator_id", idx) if isinstance(item, dict) else idx
        try:
            emb = item["embedding"]
            if not isinstance(emb, list) or not all(
                isinstance(v, (int, float)) and math.isfinite(v) for v in emb
            ):
                raise InvalidEmbeddingError("embedding must be a list of finite numbers")
            rec = OperatorRecord(
                operator_id=str(item["operator_id"]),
                display_name=str(item["display_name"]),
                embedding=np.array(emb, dtype=np.float64),
                enrolled_at=parse_utc(item["enrolled_at"]),
                source_image_ref=str(item.get("source_image_ref", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptGalleryError(str(exc), record=ident) from exc
        if rec.operator_id in recs:
            raise CorruptGalleryError("duplicate operator_id", record=rec.operator_id)
        recs[rec.operator_id] = rec
    return Gallery(recs, version)

