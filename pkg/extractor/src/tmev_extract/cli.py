"""Command-line entry point for turning media clips into record files.

Commands: extract (one clip pair -> one record) and manifest (scan a
directory of records, assign seeded train/eval/test splits). Runs print
their resolved configuration as key=value lines. Exit codes: 0 success,
1 usage error, 2 media or record error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from tmev_extract.embed import IntensityEmbedder, SpectrogramEmbedder
from tmev_extract.extract import extract_audio, extract_video
from tmev_extract.media import (MediaError, audio_duration_ms, load_frames,
                                load_wav, video_duration_ms)
from tmev_extract.records import (RecordError, assign_splits, read_summary,
                                  write_event, write_manifest)


class UsageError(Exception):
    """Bad invocation; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(key, value):
    print(f"{key}={value}")


def _parse_fractions(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"expected three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as err:
        raise UsageError(f"bad fraction in {text!r}") from err


def _cmd_extract(args) -> int:
    _emit("command", "extract")
    for key in ("audio", "video", "fps", "out", "event_id", "classes",
                "positive", "audio_seed", "video_seed"):
        _emit(key, getattr(args, key))

    if args.classes < 1:
        raise UsageError("--classes must be >= 1")
    positives = sorted(set(args.positive))
    if not positives:
        raise UsageError("at least one --positive class index is required")
    if positives[0] < 0 or positives[-1] >= args.classes:
        raise UsageError(f"--positive indices must lie in [0, {args.classes})")
    label = np.zeros(args.classes, dtype=np.uint8)
    label[positives] = 1

    samples, rate = load_wav(args.audio)
    frames = load_frames(args.video)
    audio_times, audio_feat = extract_audio(
        samples, rate, SpectrogramEmbedder(rate, seed=args.audio_seed))
    video_times, video_feat = extract_video(
        frames, args.fps, IntensityEmbedder(seed=args.video_seed))

    write_event(args.out, args.event_id, label,
                audio_times, audio_feat, video_times, video_feat)
    _emit("audio_ms", audio_duration_ms(samples, rate))
    _emit("video_ms", video_duration_ms(len(frames), args.fps))
    _emit("n_audio", len(audio_times))
    _emit("n_video", len(video_times))
    _emit("record", args.out)
    return 0


def _cmd_manifest(args) -> int:
    _emit("command", "manifest")
    for key in ("root", "out", "class_names", "fractions", "seed"):
        _emit(key, getattr(args, key))

    root = Path(args.root)
    out = Path(args.out)
    fractions = _parse_fractions(args.fractions)
    paths = sorted(root.rglob("*.tmev"))
    if not paths:
        raise RecordError(f"no .tmev records under {root}")

    summaries = []
    for path in paths:
        info = read_summary(path)
        info["relpath"] = path.relative_to(out.parent).as_posix()
        summaries.append(info)

    n_classes = summaries[0]["n_classes"]
    for info in summaries:
        if info["n_classes"] != n_classes:
            raise RecordError(
                f"{info['relpath']}: {info['n_classes']} classes, "
                f"first record has {n_classes}")
    ids = [info["event_id"] for info in summaries]
    if len(set(ids)) != len(ids):
        raise RecordError("duplicate event ids across records")

    if args.class_names:
        names = args.class_names.split(",")
        if len(names) != n_classes:
            raise UsageError(f"--class_names lists {len(names)} names, "
                             f"records carry {n_classes} classes")
    else:
        names = [f"class_{i}" for i in range(n_classes)]

    split_of = assign_splits(ids, fractions, args.seed)
    events = [(info["event_id"], split_of[info["event_id"]], info["relpath"])
              for info in summaries]
    write_manifest(out, n_classes, names,
                   max(info["n_audio"] for info in summaries),
                   max(info["n_video"] for info in summaries),
                   fractions, events)
    _emit("events", len(events))
    for split in ("train", "eval", "test"):
        _emit(f"events_{split}", sum(1 for _, s, _ in events if s == split))
    _emit("manifest", out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tmev-extract", description=__doc__,
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("extract", help="embed one clip pair into a record",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.set_defaults(func=_cmd_extract)
    p.add_argument("--audio", required=True, help="PCM WAV file")
    p.add_argument("--video", required=True,
                   help=".npy frame stack, (frames, height, width[, 3])")
    p.add_argument("--fps", type=float, required=True, help="video frame rate")
    p.add_argument("--out", required=True, help="output record path")
    p.add_argument("--event-id", required=True, dest="event_id",
                   help="identifier stored in the record")
    p.add_argument("--classes", type=int, required=True,
                   help="label vector length")
    p.add_argument("--positive", type=int, action="append", required=True,
                   help="positive class index; repeat for multi-label")
    p.add_argument("--audio-seed", type=int, default=1, dest="audio_seed",
                   help="audio projection seed")
    p.add_argument("--video-seed", type=int, default=2, dest="video_seed",
                   help="video projection seed")

    p = subs.add_parser("manifest",
                        help="scan records and assign train/eval/test splits",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.set_defaults(func=_cmd_manifest)
    p.add_argument("--root", required=True, help="directory holding .tmev files")
    p.add_argument("--out", required=True, help="manifest path to write")
    p.add_argument("--class-names", default="", dest="class_names",
                   help="comma list of names; default class_0..class_N-1")
    p.add_argument("--fractions", default="0.7,0.1,0.2",
                   help="train,eval,test fractions summing to 1")
    p.add_argument("--seed", type=int, default=0, help="split shuffle seed")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (MediaError, RecordError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
