"""Command line entry point.

Exit codes: 0 success, 1 fatal config/gallery error, 2 frame source error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path

from ..embed import MockEmbeddingProvider
from ..errors import (AlreadyEnrolledError, ConfigError, CorruptGalleryError, MalformedImageError,
                      SourceError, UsageError)
from ..gallery import Gallery, enroll, load_gallery, save_gallery
from ..imaging import load_gray
from ..report import FORMATS, generate_report, render_report
from ..tracker import read_observations
from .config import load_config
from .dispatch import replay_dead_letters
from .pipeline import FaceStages, Pipeline, embed_enrollment_image, open_source

EXIT_OK, EXIT_CONFIG, EXIT_SOURCE = 0, 1, 2

log = logging.getLogger("shiftwatch")


def _cmd_enroll(args) -> int:
    gallery_path = Path(args.gallery)
    try:
        gallery = load_gallery(gallery_path) if gallery_path.exists() else Gallery()
    except CorruptGalleryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config:
            stages = FaceStages.from_config(load_config(args.config))
        else:
            stages = FaceStages(detector=None, landmarks=None, embedder=MockEmbeddingProvider(args.seed))
        image = load_gray(args.image)
        emb = embed_enrollment_image(image, stages, Path(args.image).stem)
        gallery = enroll(gallery, args.id, args.name, emb, source_image_ref=str(args.image),
                         replace_existing=args.replace)
    except (ConfigError, AlreadyEnrolledError, MalformedImageError, ValueError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    save_gallery(gallery, gallery_path)
    print(f"enrolled {args.id} ({args.name}); gallery version {gallery.version}, {len(gallery)} operators")
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        pipeline = Pipeline.from_config(cfg)
        source = open_source(cfg, args.source_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = pipeline.run(source)
    except SourceError as exc:
        print(f"source error: {exc}", file=sys.stderr)
        return EXIT_SOURCE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = result.summary
    print(
        f"frames={s.frames} failed={s.frames_failed} detections={s.detections} "
        f"matched={s.matches} unknown={s.unknown} alerts={s.alerts} "
        f"(overtime={s.overtime} trespass={s.trespass}) "
        f"delivered={s.delivered} undelivered={s.undelivered}"
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        day = date.fromisoformat(args.date)
        names = load_gallery(args.gallery).display_names() if args.gallery else None
        log_entries = read_observations(args.log)
        report = generate_report(log_entries, None, day, cadence=args.cadence, names=names)
        data = render_report(report, args.format)
    except (OSError, ValueError, CorruptGalleryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def _cmd_gallery_list(args) -> int:
    try:
        gallery = load_gallery(args.gallery)
    except CorruptGalleryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"gallery version {gallery.version}, {len(gallery)} operators")
    for rec in gallery.records.values():
        print(f"{rec.operator_id}\t{rec.display_name}\t{rec.enrolled_at.isoformat()}\t{rec.source_image_ref}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        delivered, remaining = replay_dead_letters(args.file, args.url)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"delivered={delivered} remaining={remaining}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftwatch", description="Locomotive cab operator shift monitor")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enroll", help="add an operator to the gallery from one photo")
    e.add_argument("--gallery", required=True)
    e.add_argument("--id", required=True)
    e.add_argument("--name", required=True)
    e.add_argument("--image", required=True)
    e.add_argument("--config", help="pipeline config supplying detector/landmarks (default: whole image)")
    e.add_argument("--seed", type=int, default=0, help="mock embedding seed when no config is given")
    e.add_argument("--replace", action="store_true", help="overwrite an existing operator_id")
    e.set_defaults(func=_cmd_enroll)

    r = sub.add_parser("run", help="process a frame source")
    r.add_argument("--config", required=True)
    r.add_argument("--source-dir")
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="daily shift report from an observation log")
    rep.add_argument("--log", required=True)
    rep.add_argument("--date", required=True, help="YYYY-MM-DD (UTC)")
    rep.add_argument("--format", default="csv", choices=FORMATS)
    rep.add_argument("--cadence", type=int, default=4, help="hours between rows")
    rep.add_argument("--gallery", help="gallery for display names")
    rep.add_argument("--output")
    rep.set_defaults(func=_cmd_report)

    g = sub.add_parser("gallery", help="gallery maintenance")
    gsub = g.add_subparsers(dest="gallery_command", required=True)
    gl = gsub.add_parser("list")
    gl.add_argument("--gallery", required=True)
    gl.set_defaults(func=_cmd_gallery_list)

    d = sub.add_parser("replay-dead-letters", help="retry spooled alerts")
    d.add_argument("--file", required=True)
    d.add_argument("--url", help="override the webhook URL stored with each alert")
    d.set_defaults(func=_cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
