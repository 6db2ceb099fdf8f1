"""Frame-to-alert pipeline: detect, align, embed, match, track, dispatch."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Iterable

import numpy as np

from ..align import (AlignedFace, LandmarkProvider, LandmarkSidecar, LandmarkTemplate,
                     align_face, box_transform, warp_face)
from ..detect import FaceDetector, HogFaceDetector, LinearDetectorModel, non_max_suppression
from ..embed import EmbeddingProvider, MockEmbeddingProvider
from ..errors import ConfigError, CorruptGalleryError, ModelFormatError, OutOfOrderError, SourceError
from ..gallery import Gallery, MatchPolicy, load_gallery, match
from ..imaging import BoundingBox, GrayImage
from ..tracker import AlertEvent, AlertKind, Observation, ShiftTracker
from .config import PipelineConfig
from .dispatch import AlertDispatcher
from .sources import DirectorySource, Frame, ManifestSource, sample_frames

log = logging.getLogger(__name__)

OBSERVATION_LOG = "observations.jsonl"
ALERT_LOG = "alerts.jsonl"
DEAD_LETTER = "dead_letter.jsonl"


@dataclass
class RunSummary:
    frames: int = 0
    frames_failed: int = 0
    detections: int = 0
    matches: int = 0
    unknown: int = 0
    alerts: int = 0
    overtime: int = 0
    trespass: int = 0
    delivered: int = 0
    undelivered: int = 0


@dataclass
class RunResult:
    observations: list[Observation] = field(default_factory=list)
    alerts: list[AlertEvent] = field(default_factory=list)
    summary: RunSummary = field(default_factory=RunSummary)


@dataclass
class FaceStages:
    """The per-face stages, wired from config or injected directly in tests."""

    detector: FaceDetector | None
    landmarks: LandmarkProvider | None
    embedder: EmbeddingProvider
    template: LandmarkTemplate = field(default_factory=LandmarkTemplate.default)
    nms_iou: float = 0.3

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> FaceStages:
        sidecar = None
        if cfg.detector == "fixture" or cfg.landmark_provider == "fixture":
            try:
                sidecar = LandmarkSidecar.load(cfg.landmarks_path)
            except (OSError, ModelFormatError) as exc:
                raise ConfigError(f"cannot load landmark sidecar: {exc}") from exc
        if cfg.detector == "hog":
            try:
                model = LinearDetectorModel.load(cfg.detector_model)
            except ModelFormatError as exc:
                raise ConfigError(str(exc)) from exc
            detector: FaceDetector = HogFaceDetector(model, cfg.pyramid_scale, cfg.stride, cfg.nms_iou)
        else:
            detector = sidecar
        provider = sidecar if cfg.landmark_provider == "fixture" else None
        return cls(detector, provider, MockEmbeddingProvider(cfg.mock_seed), nms_iou=cfg.nms_iou)

    def align(self, image: GrayImage, box: BoundingBox, frame_ref: str | None) -> AlignedFace:
        if self.landmarks is None:
            t = box_transform(box, self.template.crop_size)
            return warp_face(image, t, self.template, box)
        lm = self.landmarks.landmarks(image, box, frame_ref)
        return align_face(image, lm, self.template, box)

    def faces(self, image: GrayImage, frame_ref: str | None) -> list[tuple[BoundingBox, np.ndarray]]:
        if self.detector is None:
            boxes = [BoundingBox(0, 0, image.width, image.height, 1.0)]
        else:
            boxes = non_max_suppression(self.detector.detect(image, frame_ref), self.nms_iou)
        return [(b, self.embedder.embed(self.align(image, b, frame_ref))) for b in boxes]


def embed_enrollment_image(image: GrayImage, stages: FaceStages, frame_ref: str | None = None) -> np.ndarray:
    """Embedding of the highest-scoring face in an enrollment photo."""
    faces = stages.faces(image, frame_ref)
    if not faces:
        raise ValueError("no face found in enrollment image")
    return faces[0][1]


class Pipeline:
    def __init__(self, stages: FaceStages, gallery: Gallery, policy: MatchPolicy,
                 tracker: ShiftTracker, dispatcher: AlertDispatcher | None = None,
                 sample_interval: float = 20.0, output_dir: str | Path | None = None,
                 workers: int = 1):
        self.stages = stages
        self.gallery = gallery
        self.policy = policy
        self.tracker = tracker
        self.dispatcher = dispatcher
        self.sample_interval = sample_interval
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.workers = workers

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> Pipeline:
        cfg.validate()
        try:
            gallery = load_gallery(cfg.gallery_path)
        except CorruptGalleryError as exc:
            raise ConfigError(f"gallery failed to load: {exc}") from exc
        out = Path(cfg.output_dir)
        dispatcher = AlertDispatcher(cfg.webhook_url, out / DEAD_LETTER, attempts=cfg.webhook_attempts,
                                     backoff=cfg.webhook_backoff, timeout=cfg.webhook_timeout)
        return cls(FaceStages.from_config(cfg), gallery, MatchPolicy(cfg.match_threshold),
                   ShiftTracker(cfg.tracker), dispatcher, cfg.sample_interval, out, cfg.workers)

    def process_frame(self, frame: Frame) -> list[Observation]:
        image = frame.load()
        return [Observation(frame.timestamp, frame.frame_ref, match(emb, self.gallery, self.policy))
                for _box, emb in self.stages.faces(image, frame.frame_ref)]

    def _safe_process(self, frame: Frame) -> list[Observation] | None:
        try:
            return self.process_frame(frame)
        except Exception:  # one bad frame must not stop a multi-hour run
            log.exception("frame %s failed; skipping", frame.frame_ref)
            return None

    def _processed(self, frames: Iterable[Frame]):
        it = iter(frames)
        if self.workers == 1:
            for frame in it:
                yield frame, self._safe_process(frame)
            return
        with ThreadPoolExecutor(self.workers) as pool:
            while batch := list(islice(it, self.workers * 4)):
                # map preserves input order, so ingestion stays in timestamp order
                yield from zip(batch, pool.map(self._safe_process, batch))

    def run(self, source: Iterable[Frame]) -> RunResult:
        result = RunResult()
        s = result.summary
        obs_fh = alert_fh = None
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            obs_fh = open(self.output_dir / OBSERVATION_LOG, "a", encoding="utf-8")
            alert_fh = open(self.output_dir / ALERT_LOG, "a", encoding="utf-8")
        try:
            try:
                for frame, observations in self._processed(sample_frames(source, self.sample_interval)):
                    s.frames += 1
                    if observations is None:
                        s.frames_failed += 1
                        continue
                    for obs in observations:
                        s.detections += 1
                        if obs.result.matched:
                            s.matches += 1
                        else:
                            s.unknown += 1
                        alerts = self.tracker.ingest(obs)
                        result.observations.append(obs)
                        if obs_fh:
                            obs_fh.write(obs.to_json() + "\n")
                        for alert in alerts:
                            self._emit(alert, result, alert_fh)
                    self.tracker.close_stale(frame.timestamp)
            except (OutOfOrderError, OSError) as exc:
                raise SourceError(str(exc)) from exc
        finally:
            if self.dispatcher is not None:
                stats = self.dispatcher.close()
                s.delivered, s.undelivered = stats.delivered, stats.undelivered
            for fh in (obs_fh, alert_fh):
                if fh:
                    fh.close()
        return result

    def _emit(self, alert: AlertEvent, result: RunResult, alert_fh) -> None:
        result.alerts.append(alert)
        s = result.summary
        s.alerts += 1
        if alert.kind is AlertKind.OVERTIME:
            s.overtime += 1
        else:
            s.trespass += 1
        log.warning("ALERT %s", alert.idempotency_key)
        if alert_fh:
            alert_fh.write(json.dumps(alert.to_payload(), separators=(",", ":")) + "\n")
        if self.dispatcher is not None:
            self.dispatcher.submit(alert)


def open_source(cfg: PipelineConfig, source_dir: str | Path | None = None):
    if source_dir is not None:
        return DirectorySource(source_dir)
    if cfg.source_manifest is not None:
        return ManifestSource(cfg.source_manifest)
    if cfg.source_dir is not None:
        return DirectorySource(cfg.source_dir)
    raise ConfigError("no frame source: set source_dir or source_manifest, or pass --source-dir")


def run_pipeline(cfg: PipelineConfig, source: Iterable[Frame] | None = None) -> RunResult:
    pipeline = Pipeline.from_config(cfg)
    return pipeline.run(source if source is not None else open_source(cfg))
