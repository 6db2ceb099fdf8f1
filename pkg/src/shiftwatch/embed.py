"""128-d face embeddings: contract, metric, triplet loss and a mock provider."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .align import AlignedFace
from .errors import DegenerateVectorError, InvalidEmbeddingError

EMBEDDING_DIM = 128
UNIT_TOL = 1e-6


def l2_normalize(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0 or not math.isfinite(norm):
        raise DegenerateVectorError("cannot normalize a zero or non-finite vector")
    return arr / norm


def as_embedding(v) -> np.ndarray:
    """Validate ``v`` as an embedding; returns a read-only float64 copy."""
    arr = np.array(v, dtype=np.float64, copy=True).ravel()
    if arr.size != EMBEDDING_DIM:
        raise InvalidEmbeddingError(f"embedding must have {EMBEDDING_DIM} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InvalidEmbeddingError("embedding contains non-finite values")
    if abs(float(np.linalg.norm(arr)) - 1.0) > UNIT_TOL:
        raise InvalidEmbeddingError(f"embedding is not unit norm (|v| = {np.linalg.norm(arr):.9f})")
    arr.setflags(write=False)
    return arr


def distance(a, b) -> float:
    """Euclidean distance, the matching metric."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


@dataclass(frozen=True)
class TripletConfig:
    margin: float = 0.2

    def __post_init__(self) -> None:
        if not (math.isfinite(self.margin) and self.margin > 0):
            raise ValueError(f"margin must be positive and finite, got {self.margin}")


def triplet_loss(anchor, positive, negative, cfg: TripletConfig = TripletConfig()) -> float:
    a = np.asarray(anchor, dtype=np.float64)
    dp = float(np.sum((a - np.asarray(positive, dtype=np.float64)) ** 2))
    dn = float(np.sum((a - np.asarray(negative, dtype=np.float64)) ** 2))
    return max(0.0, dp - dn + cfg.margin)


class EmbeddingProvider(Protocol):
    """``embed`` must be deterministic and return a valid embedding."""

    thread_safe: bool

    def embed(self, face: AlignedFace) -> np.ndarray: ...


def _gaussian(*parts: bytes) -> np.ndarray:
    h = hashlib.blake2b(digest_size=32)
    for p in parts:
        h.update(len(p).to_bytes(8, "little"))
        h.update(p)
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))
    return rng.standard_normal(EMBEDDING_DIM)


def pixel_digest(face: AlignedFace) -> bytes:
    data = np.ascontiguousarray(face.image.data, dtype="<f8")
    return hashlib.blake2b(
        data.shape[0].to_bytes(4, "little") + data.shape[1].to_bytes(4, "little") + data.tobytes(),
        digest_size=32,
    ).digest()


# Same-tag embeddings sit within chord ~0.1 of their identity center, so any
# two of them are < 0.2 apart; centers of distinct tags are ~sqrt(2) apart.
FIXTURE_SPREAD = 0.1


def mock_embed(face: AlignedFace, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in for the pretrained network.

    Without a tag the embedding is a seeded hash of the pixels. With an
    identity tag, it is the tag's center perturbed by a pixel-seeded offset.
    """
    seed_b = int(seed).to_bytes(8, "little", signed=True)
    noise = _gaussian(b"pixels", pixel_digest(face), seed_b)
    if face.identity_tag is None:
        return as_embedding(l2_normalize(noise))
    center = l2_normalize(_gaussian(b"identity", face.identity_tag.encode(), seed_b))
    offset = noise - center * float(noise @ center)
    offset = l2_normalize(offset) * FIXTURE_SPREAD
    return as_embedding(l2_normalize(center + offset))


class MockEmbeddingProvider:
    thread_safe = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def embed(self, face: AlignedFace) -> np.ndarray:
        return mock_embed(face, self.seed)
