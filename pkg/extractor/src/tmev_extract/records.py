"""TMEV record and manifest emission.

Implements the downstream package's published byte format directly so
this package stays importable on its own. Layout per record: magic
"TMEV", version u32, length-prefixed UTF-8 event id, n_classes u32,
little-endian label bitset, then per modality a count u32, dim u32,
u32 millisecond timestamps, and row-major little-endian float32
features. Manifests are versioned key=value headers plus an [events]
section of id/split/path lines.
"""
import struct
from pathlib import Path

import numpy as np

from tmev_extract.embed import AUDIO_DIM, VIDEO_DIM

RECORD_MAGIC = b"TMEV"
RECORD_VERSION = 1
MANIFEST_VERSION = 1
SPLITS = ("train", "eval", "test")


class RecordError(ValueError):
    """Content that would violate the record contract."""


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _check_block(name: str, times: np.ndarray, feat: np.ndarray, dim: int):
    if len(times) < 1:
        raise RecordError(f"{name} block is empty")
    if (np.diff(times.astype(np.int64)) <= 0).any():
        raise RecordError(f"{name} timestamps not strictly increasing")
    if feat.shape != (len(times), dim):
        raise RecordError(f"{name} features must be ({len(times)} x {dim}), "
                          f"got {feat.shape}")
    if not np.isfinite(feat).all():
        raise RecordError(f"{name} features contain non-finite values")


def write_event(path, event_id: str, label: np.ndarray,
                audio_times: np.ndarray, audio_feat: np.ndarray,
                video_times: np.ndarray, video_feat: np.ndarray) -> None:
    if not event_id:
        raise RecordError("empty event id")
    label = np.asarray(label, dtype=np.uint8)
    if label.ndim != 1 or not np.isin(label, (0, 1)).all() or label.sum() < 1:
        raise RecordError("label must be multi-hot with at least one positive")
    _check_block("audio", audio_times, audio_feat, AUDIO_DIM)
    _check_block("video", video_times, video_feat, VIDEO_DIM)

    with open(path, "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<I", RECORD_VERSION))
        fh.write(_pack_str(event_id))
        fh.write(struct.pack("<I", len(label)))
        fh.write(np.packbits(label, bitorder="little").tobytes())
        for times, feat in ((audio_times, audio_feat), (video_times, video_feat)):
            fh.write(struct.pack("<II", len(times), feat.shape[1]))
            fh.write(np.ascontiguousarray(times, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(feat, dtype="<f4").tobytes())


def read_summary(path) -> dict:
    """Header fields and block shapes without materializing features."""
    blob = Path(path).read_bytes()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise RecordError(f"{path}: truncated at byte {off}")
        out = blob[off: off + n]
        off += n
        return out

    if take(4) != RECORD_MAGIC:
        raise RecordError(f"{path}: bad magic")
    version = struct.unpack("<I", take(4))[0]
    if version != RECORD_VERSION:
        raise RecordError(f"{path}: unsupported version {version}")
    id_len = struct.unpack("<I", take(4))[0]
    event_id = take(id_len).decode("utf-8")
    n_classes = struct.unpack("<I", take(4))[0]
    take((n_classes + 7) // 8)
    shapes = {}
    for name in ("audio", "video"):
        count, dim = struct.unpack("<II", take(8))
        take(count * 4 + count * dim * 4)
        shapes[name] = (count, dim)
    return {"event_id": event_id, "n_classes": n_classes,
            "n_audio": shapes["audio"][0], "n_video": shapes["video"][0]}


def assign_splits(event_ids: list, fractions: tuple, seed: int) -> dict:
    """Seeded shuffle into train/eval/test by the requested fractions."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise RecordError(f"split fractions must sum to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(event_ids))
    n = len(event_ids)
    n_train = round(fractions[0] * n)
    n_eval = round(fractions[1] * n)
    assignment = {}
    for rank, idx in enumerate(order):
        split = ("train" if rank < n_train
                 else "eval" if rank < n_train + n_eval else "test")
        assignment[event_ids[idx]] = split
    return assignment


def write_manifest(path, n_classes: int, class_names: list,
                   n_audio: int, n_video: int, fractions: tuple,
                   events: list) -> None:
    """events: (event_id, split, relative path) triples."""
    lines = [
        f"version={MANIFEST_VERSION}",
        f"n_classes={n_classes}",
        "class_names=" + ",".join(class_names),
        f"n_audio={n_audio}",
        f"n_video={n_video}",
    ]
    for split, fraction in zip(SPLITS, fractions):
        lines.append(f"split_{split}={float(fraction)!r}")
    lines.append("[events]")
    for event_id, split, relpath in sorted(events):
        if split not in SPLITS:
            raise RecordError(f"unknown split {split!r} for event {event_id}")
        lines.append(f"{event_id}\t{split}\t{relpath}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
