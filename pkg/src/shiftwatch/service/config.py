"""Pipeline configuration file.

INI-style key/value document with a single ``[pipeline]`` section. Relative
paths resolve against the config file's directory. See README for keys.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from ..errors import ConfigError
from ..gallery import DEFAULT_THRESHOLD, MatchPolicy
from ..tracker import TrackerConfig

DETECTORS = ("hog", "fixture")
LANDMARK_PROVIDERS = ("fixture", "none")


@dataclass
class PipelineConfig:
    gallery_path: Path
    sample_interval: float = 20.0
    source_fps: float = 30.0
    detector: str = "fixture"
    detector_model: Path | None = None
    landmark_provider: str = "fixture"
    landmarks_path: Path | None = None
    embedding_provider: str = "mock"
    mock_seed: int = 0
    match_threshold: float = DEFAULT_THRESHOLD
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    webhook_url: str | None = None
    webhook_timeout: float = 5.0
    webhook_attempts: int = 3
    webhook_backoff: float = 0.5
    report_cadence: int = 4
    source_dir: Path | None = None
    source_manifest: Path | None = None
    output_dir: Path = Path("shiftwatch-out")
    pyramid_scale: float = 1.2
    stride: int = 8
    nms_iou: float = 0.3
    workers: int = 1

    def validate(self, check_paths: bool = True) -> None:
        if not self.sample_interval > 0:
            raise ConfigError("sample_interval must be > 0")
        if not self.source_fps > 0:
            raise ConfigError("source_fps must be > 0")
        if self.detector not in DETECTORS:
            raise ConfigError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.landmark_provider not in LANDMARK_PROVIDERS:
            raise ConfigError(f"landmark_provider must be one of {LANDMARK_PROVIDERS}")
        if self.embedding_provider != "mock":
            raise ConfigError(
                f"embedding_provider {self.embedding_provider!r} is not available; only 'mock' is built in"
            )
        if self.detector == "hog" and self.detector_model is None:
            raise ConfigError("detector = hog requires detector_model")
        needs_sidecar = self.detector == "fixture" or self.landmark_provider == "fixture"
        if needs_sidecar and self.landmarks_path is None:
            raise ConfigError("fixture detector/landmarks require landmarks_path")
        if self.webhook_attempts < 1:
            raise ConfigError("webhook_attempts must be >= 1")
        if not 1 <= self.report_cadence <= 24:
            raise ConfigError("report_cadence must be in [1, 24] hours")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            MatchPolicy(self.match_threshold)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if check_paths:
            paths = {"gallery_path": self.gallery_path, "detector_model": self.detector_model,
                     "landmarks_path": self.landmarks_path if needs_sidecar else None}
            for key, p in paths.items():
                if p is not None and not Path(p).exists():
                    raise ConfigError(f"{key} does not exist: {p}")


_FLOATS = ("sample_interval", "source_fps", "match_threshold", "webhook_timeout",
           "webhook_backoff", "pyramid_scale", "nms_iou")
_INTS = ("mock_seed", "webhook_attempts", "report_cadence", "stride", "workers")
_PATHS = ("gallery_path", "detector_model", "landmarks_path", "source_dir",
          "source_manifest", "output_dir")
_STRS = ("detector", "landmark_provider", "embedding_provider", "webhook_url")
_TRACKER = {"shift_limit_hours": ("shift_limit", "hours"),
            "gap_tolerance_minutes": ("gap_tolerance", "minutes"),
            "trespass_throttle_minutes": ("trespass_throttle", "minutes")}


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if "pipeline" not in parser:
        raise ConfigError(f"{path}: missing [pipeline] section")
    sect = dict(parser["pipeline"])
    base = path.parent
    kwargs: dict = {}
    tracker_kw: dict = {}
    try:
        for key, raw in sect.items():
            value = raw.strip()
            if key in _FLOATS:
                kwargs[key] = float(value)
            elif key in _INTS:
                kwargs[key] = int(value)
            elif key in _PATHS:
                kwargs[key] = base / value if value else None
            elif key in _STRS:
                kwargs[key] = value or None
            elif key in _TRACKER:
                name, unit = _TRACKER[key]
                tracker_kw[name] = timedelta(**{unit: float(value)})
            else:
                raise ConfigError(f"{path}: unknown key {key!r}")
        if "gallery_path" not in kwargs or kwargs["gallery_path"] is None:
            raise ConfigError(f"{path}: gallery_path is required")
        if kwargs.get("output_dir") is None:
            kwargs["output_dir"] = base / "shiftwatch-out"
        kwargs["tracker"] = TrackerConfig(**tracker_kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = PipelineConfig(**kwargs)
    cfg.validate()
    return cfg
