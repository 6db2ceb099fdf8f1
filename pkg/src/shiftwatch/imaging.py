"""Raster types and geometry shared by the vision stages.

Pixel origin is the top-left corner with y growing downward. Pixel centers
sit on integer coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedImageError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
N_LANDMARKS = 68


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Luminance raster stored as a read-only ``(height, width)`` float64 array."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MalformedImageError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise MalformedImageError("raster contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, values, width: int, height: int) -> GrayImage:
        flat = np.asarray(values, dtype=np.float64).ravel()
        if width < 1 or height < 1 or flat.size != width * height:
            raise MalformedImageError(
                f"data length {flat.size} does not match {width}x{height}"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    width: float
    height: float
    score: float = 0.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box must have positive size, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    def clip(self, width: int, height: int) -> BoundingBox:
        x0 = min(max(self.x, 0.0), width)
        y0 = min(max(self.y, 0.0), height)
        x1 = min(max(self.x + self.width, 0.0), width)
        y1 = min(max(self.y + self.height, 0.0), height)
        return BoundingBox(x0, y0, x1 - x0, y1 - y0, self.score)


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    """68 facial points as a read-only ``(68, 2)`` array of (x, y).

    ``identity_tag`` is only set by fixture providers; it lets the mock
    embedding provider group faces of the same synthetic person.
    """

    points: np.ndarray
    identity_tag: str | None = field(default=None)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValueError(f"expected {N_LANDMARKS} (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def bounds(self) -> BoundingBox:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return BoundingBox(lo[0], lo[1], max(hi[0] - lo[0], 1e-9), max(hi[1] - lo[1], 1e-9))


def to_grayscale(rgb, width: int | None = None, height: int | None = None) -> GrayImage:
    """Convert an interleaved 8-bit RGB raster to BT.601 luma.

    ``rgb`` is either an ``(H, W, 3)`` array or a flat buffer, in which case
    ``width`` and ``height`` are required.
    """
    arr = np.asarray(rgb)
    if width is not None or height is not None:
        if width is None or height is None or width < 1 or height < 1:
            raise MalformedImageError("both width and height (>= 1) are required")
        flat = np.frombuffer(arr, dtype=np.uint8) if isinstance(rgb, (bytes, bytearray)) else arr.ravel()
        if flat.size != width * height * 3:
            raise MalformedImageError(
                f"RGB data length {flat.size} does not match {width}x{height}x3"
            )
        arr = flat.reshape(height, width, 3)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise MalformedImageError(f"expected an (H, W, 3) raster, got shape {arr.shape}")
    rgbf = arr.astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    luma = r * rgbf[..., 0] + g * rgbf[..., 1] + b * rgbf[..., 2]
    # round half up; np.round would round half to even
    return GrayImage(np.clip(np.floor(luma + 0.5), 0, 255))


def load_gray(path: str | Path) -> GrayImage:
    """Decode a PNG/JPEG file into a GrayImage."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise MalformedImageError(f"cannot decode {path}: {exc}") from exc
    return to_grayscale(rgb)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x + a.width, b.x + b.width) - max(a.x, b.x)
    iy = min(a.y + a.height, b.y + b.height) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    # rounding in the edge arithmetic can push identical boxes a hair above 1
    return min(1.0, inter / (a.area + b.area - inter))
