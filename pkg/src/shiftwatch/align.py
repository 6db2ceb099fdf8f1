"""Landmark-based face alignment onto a canonical 68-point template."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Protocol

import numpy as np

from . import kernels
from .errors import DegenerateConfigurationError, ModelFormatError
from .imaging import N_LANDMARKS, BoundingBox, GrayImage, LandmarkSet, iou

DEFAULT_CROP = 96
TEMPLATE_PADDING = 0.1
SIDECAR_MAGIC = "# shiftwatch landmarks 1"


@dataclass(frozen=True)
class SimilarityTransform:
    """x' = scale * R(rotation) @ x + (tx, ty)."""

    scale: float
    rotation: float
    tx: float
    ty: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be finite and positive, got {self.scale}")
        if not all(math.isfinite(v) for v in (self.rotation, self.tx, self.ty)):
            raise ValueError("transform parameters must be finite")

    @classmethod
    def identity(cls) -> SimilarityTransform:
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        c, s = self.scale * math.cos(self.rotation), self.scale * math.sin(self.rotation)
        return np.array([[c, -s, self.tx], [s, c, self.ty]])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        m = self.matrix
        return pts @ m[:, :2].T + m[:, 2]

    def inverse(self) -> SimilarityTransform:
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx = -inv_scale * (c * self.tx - s * self.ty)
        ty = -inv_scale * (s * self.tx + c * self.ty)
        return SimilarityTransform(inv_scale, -self.rotation, tx, ty)


@dataclass(frozen=True, eq=False)
class LandmarkTemplate:
    points: np.ndarray
    crop_size: int = DEFAULT_CROP

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"template needs {N_LANDMARKS} points, got shape {pts.shape}")
        if np.any(pts < 0) or np.any(pts >= self.crop_size):
            raise ValueError("template points must lie inside the crop")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def default(cls, crop_size: int = DEFAULT_CROP, padding: float = TEMPLATE_PADDING) -> LandmarkTemplate:
        unit = _unit_template()
        return cls(crop_size * (padding + unit * (1 - 2 * padding)), crop_size)


@lru_cache(maxsize=1)
def _unit_template() -> np.ndarray:
    text = resources.files("shiftwatch").joinpath("data/mean_face_68.txt").read_text("ascii")
    pts = [tuple(map(float, ln.split())) for ln in text.splitlines() if ln and not ln.startswith("#")]
    arr = np.array(pts)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AlignedFace:
    image: GrayImage
    source_box: BoundingBox
    residual: float = 0.0
    identity_tag: str | None = None


class LandmarkProvider(Protocol):
    def landmarks(self, image: GrayImage, box: BoundingBox,
                  frame_ref: str | None = None) -> LandmarkSet: ...


def _points(obj) -> np.ndarray:
    return np.asarray(getattr(obj, "points", obj), dtype=np.float64)


def estimate_similarity(src, dst) -> SimilarityTransform:
    """Least-squares similarity mapping ``src`` points onto ``dst`` (no reflection).

    Accepts LandmarkSet / LandmarkTemplate or plain (N, 2) arrays.
    """
    s, d = _points(src), _points(dst)
    if s.shape != d.shape or s.ndim != 2 or s.shape[1] != 2:
        raise ValueError(f"point sets differ in shape: {s.shape} vs {d.shape}")
    mu_s, mu_d = s.mean(axis=0), d.mean(axis=0)
    sc, dc = s - mu_s, d - mu_d
    var = float(np.sum(sc * sc))
    if not var > 1e-12 * max(1.0, float(np.sum(s * s))):
        raise DegenerateConfigurationError("source landmarks are coincident")
    # 2-D cross-covariance reduces to these two sums
    a = float(np.sum(sc[:, 0] * dc[:, 0] + sc[:, 1] * dc[:, 1])) / var
    b = float(np.sum(sc[:, 0] * dc[:, 1] - sc[:, 1] * dc[:, 0])) / var
    scale = math.hypot(a, b)
    if scale == 0:
        raise DegenerateConfigurationError("destination landmarks are coincident")
    theta = math.atan2(b, a)
    tx = mu_d[0] - (a * mu_s[0] - b * mu_s[1])
    ty = mu_d[1] - (b * mu_s[0] + a * mu_s[1])
    return SimilarityTransform(scale, theta, tx, ty)


def alignment_residual(src, dst, transform: SimilarityTransform) -> float:
    """Mean Euclidean landmark error after mapping ``src`` through ``transform``."""
    diff = transform.apply(_points(src)) - _points(dst)
    return float(np.mean(np.hypot(diff[:, 0], diff[:, 1])))


def warp_face(img: GrayImage, transform: SimilarityTransform, template: LandmarkTemplate,
              source_box: BoundingBox | None = None, residual: float = 0.0,
              identity_tag: str | None = None) -> AlignedFace:
    """Resample ``img`` into the template crop; ``transform`` maps source to crop."""
    inv = np.ascontiguousarray(transform.inverse().matrix)
    n = template.crop_size
    out = kernels.warp_affine(np.ascontiguousarray(img.data), inv, n, n)
    if source_box is None:
        source_box = BoundingBox(0, 0, img.width, img.height)
    return AlignedFace(GrayImage(np.clip(out, 0, 255)), source_box, residual, identity_tag)


def align_face(img: GrayImage, landmarks: LandmarkSet, template: LandmarkTemplate,
               source_box: BoundingBox | None = None) -> AlignedFace:
    t = estimate_similarity(landmarks, template)
    return warp_face(img, t, template, source_box or landmarks.bounds(),
                     alignment_residual(landmarks, template, t), landmarks.identity_tag)


def box_transform(box: BoundingBox, crop_size: int) -> SimilarityTransform:
    """Map a detection box onto the crop without landmarks (center and scale only)."""
    scale = crop_size / max(box.width, box.height)
    cx, cy = box.x + box.width / 2, box.y + box.height / 2
    c = (crop_size - 1) / 2
    return SimilarityTransform(scale, 0.0, c - scale * cx, c - scale * cy)


class LandmarkSidecar:
    """Fixture annotations: known faces per frame, as a detector and landmark provider.

    File format (ASCII, whitespace separated)::

        # shiftwatch landmarks 1
        <frame_ref> <identity_tag or -> x0 y0 x1 y1 ... x67 y67

    A frame may have several lines, one per face. Lines starting with ``#``
    after the header are comments.
    """

    def __init__(self, records: dict[str, list[LandmarkSet]] | None = None, margin: float = 0.1):
        self.records: dict[str, list[LandmarkSet]] = records or {}
        self.margin = margin

    @classmethod
    def load(cls, path: str | Path, margin: float = 0.1) -> LandmarkSidecar:
        lines = Path(path).read_text(encoding="ascii").splitlines()
        if not lines or lines[0].strip() != SIDECAR_MAGIC:
            raise ModelFormatError(f"{path}: missing header {SIDECAR_MAGIC!r}")
        records: dict[str, list[LandmarkSet]] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2 + 2 * N_LANDMARKS:
                raise ModelFormatError(f"{path}:{lineno}: expected {2 + 2 * N_LANDMARKS} fields, got {len(parts)}")
            try:
                pts = np.array([float(v) for v in parts[2:]]).reshape(N_LANDMARKS, 2)
                lm = LandmarkSet(pts, None if parts[1] == "-" else parts[1])
            except ValueError as exc:
                raise ModelFormatError(f"{path}:{lineno}: {exc}") from exc
            records.setdefault(parts[0], []).append(lm)
        return cls(records, margin)

    def save(self, path: str | Path) -> None:
        out = [SIDECAR_MAGIC]
        for ref, faces in self.records.items():
            for lm in faces:
                coords = " ".join(repr(float(v)) for v in lm.points.ravel())
                out.append(f"{ref} {lm.identity_tag or '-'} {coords}")
        Path(path).write_text("\n".join(out) + "\n", encoding="ascii")

    def add(self, frame_ref: str, landmarks: LandmarkSet) -> None:
        if any(c.isspace() for c in frame_ref) or not frame_ref:
            raise ValueError(f"frame_ref must be a non-empty token: {frame_ref!r}")
        self.records.setdefault(frame_ref, []).append(landmarks)

    def _box(self, lm: LandmarkSet, image: GrayImage) -> BoundingBox:
        b = lm.bounds()
        mx, my = b.width * self.margin, b.height * self.margin
        grown = BoundingBox(b.x - mx, b.y - my, b.width + 2 * mx, b.height + 2 * my, 1.0)
        return grown.clip(image.width, image.height)

    def detect(self, image: GrayImage, frame_ref: str | None = None) -> list[BoundingBox]:
        return [self._box(lm, image) for lm in self.records.get(frame_ref or "", [])]

    def landmarks(self, image: GrayImage, box: BoundingBox,
                  frame_ref: str | None = None) -> LandmarkSet:
        faces = self.records.get(frame_ref or "", [])
        if not faces:
            raise LookupError(f"no landmark record for frame {frame_ref!r}")
        return max(faces, key=lambda lm: iou(self._box(lm, image), box))
