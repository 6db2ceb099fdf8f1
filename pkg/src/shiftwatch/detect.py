"""HOG features, linear sliding-window face detection and NMS."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, ModelFormatError
from .imaging import BoundingBox, GrayImage, iou

MODEL_MAGIC = "shiftwatch-linear-detector"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    bins: int = 9
    signed: bool = False
    clip: float = 0.2
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if min(self.cell_size, self.block_size, self.block_stride) < 1:
            raise ValueError("cell_size, block_size and block_stride must be positive")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if not 0 < self.clip <= 1:
            raise ValueError("clip must lie in (0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def layout(self, width: int, height: int) -> tuple[int, int, int, int]:
        """(blocks_y, blocks_x, cells per block, bins) for a window of this size."""
        if width % self.cell_size or height % self.cell_size:
            raise DimensionError(
                f"window {width}x{height} is not a multiple of cell size {self.cell_size}"
            )
        if width < 3 or height < 3:
            raise DimensionError(f"window {width}x{height} is smaller than 3x3")
        cy, cx = height // self.cell_size, width // self.cell_size
        if cy < self.block_size or cx < self.block_size:
            raise DimensionError(f"window {width}x{height} does not fit one block")
        by = (cy - self.block_size) // self.block_stride + 1
        bx = (cx - self.block_size) // self.block_stride + 1
        return by, bx, self.block_size**2, self.bins

    def descriptor_length(self, width: int, height: int) -> int:
        return math.prod(self.layout(width, height))


@dataclass(frozen=True, eq=False)
class HogDescriptor:
    values: np.ndarray
    layout: tuple[int, int, int, int]

    def blocks(self) -> np.ndarray:
        return self.values.reshape(self.layout)


@dataclass(eq=False)
class LinearDetectorModel:
    window_width: int
    window_height: int
    weights: np.ndarray
    bias: float
    score_threshold: float = 0.0
    params: HogParams = field(default_factory=HogParams)

    def __post_init__(self) -> None:
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64).ravel()
        expected = self.params.descriptor_length(self.window_width, self.window_height)
        if self.weights.size != expected:
            raise ModelFormatError(
                f"weights length {self.weights.size} != descriptor length {expected}"
            )
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ModelFormatError("model weights and bias must be finite")

    def save(self, path: str | Path) -> None:
        p = self.params
        lines = [
            f"{MODEL_MAGIC} {MODEL_FORMAT_VERSION}",
            f"window_width {self.window_width}",
            f"window_height {self.window_height}",
            f"cell_size {p.cell_size}",
            f"block_size {p.block_size}",
            f"block_stride {p.block_stride}",
            f"bins {p.bins}",
            f"signed {int(p.signed)}",
            f"clip {p.clip!r}",
            f"epsilon {p.epsilon!r}",
            f"score_threshold {float(self.score_threshold)!r}",
            f"bias {float(self.bias)!r}",
            f"weights {self.weights.size}",
        ]
        lines.extend(repr(float(w)) for w in self.weights)
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

    @classmethod
    def load(cls, path: str | Path) -> LinearDetectorModel:
        try:
            lines = Path(path).read_text(encoding="ascii").split("\n")
        except (OSError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"cannot read detector model {path}: {exc}") from exc
        magic = lines[0].split()
        if len(magic) != 2 or magic[0] != MODEL_MAGIC or magic[1] != str(MODEL_FORMAT_VERSION):
            raise ModelFormatError(f"{path}: not a detector model (bad header {lines[0]!r})")
        keys = ("window_width", "window_height", "cell_size", "block_size", "block_stride",
                "bins", "signed", "clip", "epsilon", "score_threshold", "bias", "weights")
        header: dict[str, str] = {}
        for i, key in enumerate(keys, start=1):
            parts = lines[i].split() if i < len(lines) else []
            if len(parts) != 2 or parts[0] != key:
                raise ModelFormatError(f"{path}:{i + 1}: expected '{key} <value>'")
            header[key] = parts[1]
        try:
            n = int(header["weights"])
            weights = np.array([float(v) for v in lines[len(keys) + 1 : len(keys) + 1 + n]])
            params = HogParams(
                cell_size=int(header["cell_size"]),
                block_size=int(header["block_size"]),
                block_stride=int(header["block_stride"]),
                bins=int(header["bins"]),
                signed=header["signed"] == "1",
                clip=float(header["clip"]),
                epsilon=float(header["epsilon"]),
            )
            if weights.size != n:
                raise ModelFormatError(f"{path}: expected {n} weights, found {weights.size}")
            return cls(
                window_width=int(header["window_width"]),
                window_height=int(header["window_height"]),
                weights=weights,
                bias=float(header["bias"]),
                score_threshold=float(header["score_threshold"]),
                params=params,
            )
        except ValueError as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"{path}: {exc}") from exc


class FaceDetector(Protocol):
    """Anything that locates faces. ``frame_ref`` lets fixture detectors look up annotations."""

    def detect(self, image: GrayImage, frame_ref: str | None = None) -> list[BoundingBox]: ...


def compute_gradients(img: GrayImage, signed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and orientation in degrees.

    Centered differences in the interior, one-sided at the borders.
    Orientation is folded to [0, 180) unless ``signed``.
    """
    if img.width < 3 or img.height < 3:
        raise DimensionError(f"gradients need an image of at least 3x3, got {img.width}x{img.height}")
    return kernels.gradients(np.ascontiguousarray(img.data), signed)


def hog_descriptor(img: GrayImage, params: HogParams = HogParams()) -> HogDescriptor:
    layout = params.layout(img.width, img.height)
    values = kernels.hog_window(
        np.ascontiguousarray(img.data), params.cell_size, params.block_size,
        params.block_stride, params.bins, params.signed, params.clip, params.epsilon,
    )
    return HogDescriptor(values, layout)


def _pyramid(img: GrayImage, scale: float, win_w: int, win_h: int):
    """Yield (level array, fx, fy) until the window no longer fits."""
    base = np.ascontiguousarray(img.data)
    k = 0
    while True:
        f = scale**k
        lw, lh = int(math.floor(img.width / f)), int(math.floor(img.height / f))
        if lw < win_w or lh < win_h:
            return
        if k == 0:
            yield base, 1.0, 1.0
        else:
            fx, fy = img.width / lw, img.height / lh
            m = np.array([[fx, 0.0, 0.0], [0.0, fy, 0.0]])
            yield kernels.warp_affine(base, m, lh, lw), fx, fy
        k += 1


def sliding_window_detect(
    img: GrayImage,
    model: LinearDetectorModel,
    params: HogParams | None = None,
    pyramid_scale: float = 1.2,
    stride: int = 8,
) -> list[BoundingBox]:
    """Score every stride-aligned window of an image pyramid. Not suppressed."""
    params = params or model.params
    if pyramid_scale <= 1:
        raise ValueError("pyramid_scale must be > 1")
    if stride < 1:
        raise ValueError("stride must be positive")
    if params.descriptor_length(model.window_width, model.window_height) != model.weights.size:
        raise DimensionError("HOG params do not match the model's weight vector")
    ww, wh = model.window_width, model.window_height
    boxes: list[BoundingBox] = []
    for level, fx, fy in _pyramid(img, pyramid_scale, ww, wh):
        scores = kernels.scan_windows(
            level, model.weights, float(model.bias), ww, wh, stride,
            params.cell_size, params.block_size, params.block_stride, params.bins,
            params.signed, params.clip, params.epsilon,
        )
        for iy, ix in zip(*np.nonzero(scores > model.score_threshold)):
            box = BoundingBox(float(ix * stride * fx), float(iy * stride * fy), ww * fx, wh * fy,
                              float(scores[iy, ix]))
            boxes.append(box.clip(img.width, img.height))
    return boxes


def _nms_order(box: BoundingBox) -> tuple[float, float, float]:
    return (-box.score, box.x, box.y)


def non_max_suppression(boxes: Sequence[BoundingBox], iou_threshold: float = 0.3) -> list[BoundingBox]:
    remaining = sorted(boxes, key=_nms_order)
    kept: list[BoundingBox] = []
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [b for b in remaining if iou(best, b) <= iou_threshold]
    return kept


class HogFaceDetector:
    """Sliding-window HOG detector followed by greedy NMS."""

    def __init__(self, model: LinearDetectorModel, pyramid_scale: float = 1.2,
                 stride: int = 8, iou_threshold: float = 0.3):
        self.model = model
        self.pyramid_scale = pyramid_scale
        self.stride = stride
        self.iou_threshold = iou_threshold

    def detect(self, image: GrayImage, frame_ref: str | None = None) -> list[BoundingBox]:
        raw = sliding_window_detect(image, self.model, pyramid_scale=self.pyramid_scale,
                                    stride=self.stride)
        return non_max_suppression(raw, self.iou_threshold)
