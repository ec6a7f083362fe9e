"""On-disk event records, dataset manifests, and the synthetic generator.

Record files carry one event: an id, a multi-hot label, and two blocks of
timestamped feature rows (audio 128-wide, video 1024-wide). Features are
32-bit floats on disk and 64-bit in memory. Manifests are versioned text:
key=value header, an [events] marker, then one id/split/path line per
event sorted by id.

The synthetic generator plants a feature burst in each modality. The burst
pattern and magnitude never vary; the audio burst lands at a random
segment, and the video burst lands at a class-specific lag from it. Class
identity therefore lives only in cross-modal timing: averaging features
over time erases it, which is what makes the dataset a probe for temporal
models.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AUDIO_DIM = 128
VIDEO_DIM = 1024
RECORD_MAGIC = b"TMEV"
RECORD_VERSION = 1
MANIFEST_VERSION = 1
SPLITS = ("train", "eval", "test")


class DataError(ValueError):
    """Malformed file or invariant violation in dataset content."""


@dataclass
class EventRecord:
    event_id: str
    label: np.ndarray        # (n_classes,) uint8 multi-hot
    audio_times: np.ndarray  # (n_a,) uint32 ms, strictly increasing
    audio_feat: np.ndarray   # (n_a, 128) float64 (f32-representable)
    video_times: np.ndarray
    video_feat: np.ndarray   # (n_v, 1024)

    @property
    def n_classes(self) -> int:
        return len(self.label)


def _validate_record(rec: EventRecord, origin: str) -> None:
    if not rec.event_id:
        raise DataError(f"{origin}: empty event id")
    if rec.label.ndim != 1 or not np.isin(rec.label, (0, 1)).all():
        raise DataError(f"{origin}: label must be a multi-hot vector")
    if rec.label.sum() < 1:
        raise DataError(f"{origin}: label has no positive class")
    for name, times, feat, dim in (("audio", rec.audio_times, rec.audio_feat, AUDIO_DIM),
                                   ("video", rec.video_times, rec.video_feat, VIDEO_DIM)):
        if len(times) < 1:
            raise DataError(f"{origin}: {name} block is empty")
        diffs = np.diff(times.astype(np.int64))
        if (diffs <= 0).any():
            offset = int(np.argmax(diffs <= 0)) + 1
            raise DataError(f"{origin}: {name} timestamps not strictly "
                            f"increasing at index {offset}")
        if feat.shape != (len(times), dim):
            raise DataError(f"{origin}: {name} features must be "
                            f"({len(times)} x {dim}), got {feat.shape}")
        if np.isnan(feat).any():
            raise DataError(f"{origin}: {name} features contain NaN")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def write_record(path, rec: EventRecord) -> None:
    _validate_record(rec, str(path))
    n_classes = len(rec.label)
    bitset = np.packbits(rec.label.astype(np.uint8), bitorder="little").tobytes()
    with open(path, "wb") as fh:
        fh.write(RECORD_MAGIC)
        fh.write(struct.pack("<I", RECORD_VERSION))
        fh.write(_pack_str(rec.event_id))
        fh.write(struct.pack("<I", n_classes))
        fh.write(bitset)
        for times, feat in ((rec.audio_times, rec.audio_feat),
                            (rec.video_times, rec.video_feat)):
            fh.write(struct.pack("<II", len(times), feat.shape[1]))
            fh.write(np.ascontiguousarray(times, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(feat, dtype="<f4").tobytes())


def read_record(path) -> EventRecord:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise DataError(f"{path}: truncated at byte {off}")
        out = blob[off: off + n]
        off += n
        return out

    if take(4) != RECORD_MAGIC:
        raise DataError(f"{path}: bad magic")
    version = struct.unpack("<I", take(4))[0]
    if version != RECORD_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    id_len = struct.unpack("<I", take(4))[0]
    event_id = take(id_len).decode("utf-8")
    n_classes = struct.unpack("<I", take(4))[0]
    if n_classes < 1:
        raise DataError(f"{path}: n_classes must be >= 1")
    n_bytes = (n_classes + 7) // 8
    bits = np.unpackbits(np.frombuffer(take(n_bytes), dtype=np.uint8),
                         bitorder="little")[:n_classes]

    blocks = []
    for name, want_dim in (("audio", AUDIO_DIM), ("video", VIDEO_DIM)):
        count, dim = struct.unpack("<II", take(8))
        if dim != want_dim:
            raise DataError(f"{path}: {name} dim {dim}, expected {want_dim}")
        times = np.frombuffer(take(count * 4), dtype="<u4").copy()
        feat = np.frombuffer(take(count * dim * 4), dtype="<f4")
        blocks.append((times, feat.reshape(count, dim).astype(np.float64)))
    if off != len(blob):
        raise DataError(f"{path}: {len(blob) - off} trailing bytes")

    rec = EventRecord(event_id=event_id, label=bits.astype(np.uint8),
                      audio_times=blocks[0][0], audio_feat=blocks[0][1],
                      video_times=blocks[1][0], video_feat=blocks[1][1])
    _validate_record(rec, str(path))
    return rec


@dataclass
class DatasetManifest:
    n_classes: int
    class_names: list
    n_audio: int
    n_video: int
    split_fractions: dict
    events: list             # (event_id, split, relpath), sorted by id
    root: Path = Path(".")


def write_manifest(path, manifest: DatasetManifest) -> None:
    path = Path(path)
    lines = [
        f"version={MANIFEST_VERSION}",
        f"n_classes={manifest.n_classes}",
        "class_names=" + ",".join(manifest.class_names),
        f"n_audio={manifest.n_audio}",
        f"n_video={manifest.n_video}",
    ]
    for split in SPLITS:
        lines.append(f"split_{split}={manifest.split_fractions[split]!r}")
    lines.append("[events]")
    for event_id, split, relpath in sorted(manifest.events):
        if split not in SPLITS:
            raise DataError(f"unknown split {split!r} for event {event_id}")
        lines.append(f"{event_id}\t{split}\t{relpath}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    header = {}
    events = []
    in_events = False
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line == "[events]":
            in_events = True
            continue
        if not in_events:
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected key=value")
            header[key] = value
        else:
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected id\\tsplit\\tpath")
            if parts[1] not in SPLITS:
                raise DataError(f"{path}:{lineno}: unknown split {parts[1]!r}")
            events.append(tuple(parts))
    try:
        if int(header["version"]) != MANIFEST_VERSION:
            raise DataError(f"{path}: unsupported version {header['version']}")
        manifest = DatasetManifest(
            n_classes=int(header["n_classes"]),
            class_names=header["class_names"].split(","),
            n_audio=int(header["n_audio"]),
            n_video=int(header["n_video"]),
            split_fractions={s: float(header[f"split_{s}"]) for s in SPLITS},
            events=sorted(events),
            root=path.parent,
        )
    except KeyError as err:
        raise DataError(f"{path}: missing header key {err.args[0]}") from err
    ids = [e[0] for e in manifest.events]
    if len(ids) != len(set(ids)):
        raise DataError(f"{path}: duplicate event ids")
    return manifest


def load_split(manifest: DatasetManifest, split: str) -> list:
    """Records of one split, sorted by event id, validated on read."""
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}, expected one of {SPLITS}")
    wanted = [(eid, rel) for eid, s, rel in manifest.events if s == split]
    missing = [rel for _, rel in wanted if not (manifest.root / rel).is_file()]
    if missing:
        raise DataError("missing record files: " + ", ".join(sorted(missing)))
    records = []
    for eid, rel in wanted:
        rec = read_record(manifest.root / rel)
        if rec.event_id != eid:
            raise DataError(f"{rel}: holds event {rec.event_id!r}, "
                            f"manifest says {eid!r}")
        if rec.n_classes != manifest.n_classes:
            raise DataError(f"{rel}: {rec.n_classes} classes, manifest "
                            f"says {manifest.n_classes}")
        records.append(rec)
    return records


def load_dataset(manifest: DatasetManifest) -> dict:
    return {split: load_split(manifest, split) for split in SPLITS}


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 4
    events_per_class: int = 200
    duration_ms: int = 2500
    audio_stride_ms: int = 250
    video_stride_ms: int = 250
    class_lags_ms: tuple = (500, -250, 250, -500)   # video burst offset per class
    # audio burst base: an int applies to every class, a tuple sets one per
    # class, None derives an even spread across the clip
    class_audio_ms: tuple | int | None = 625
    audio_jitter_ms: int = 1250                     # uniform extra offset, grid-aligned
    burst_width_ms: int = 300
    burst_scale: float = 3.0
    noise_sigma: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.n_classes != len(self.class_lags_ms):
            raise ValueError("need one lag per class")
        if self.duration_ms < self.audio_stride_ms or self.duration_ms < self.video_stride_ms:
            raise ValueError("duration shorter than one segment stride")
        if self.audio_jitter_ms < 0 or self.audio_jitter_ms % self.audio_stride_ms:
            raise ValueError("jitter must be a non-negative multiple of the audio stride")
        if isinstance(self.class_audio_ms, int):
            object.__setattr__(self, "class_audio_ms",
                               (self.class_audio_ms,) * self.n_classes)
        if self.class_audio_ms is not None:
            if len(self.class_audio_ms) != self.n_classes:
                raise ValueError("need one audio burst time per class")
            for t, lag in zip(self.class_audio_ms, self.class_lags_ms):
                hi = t + self.audio_jitter_ms
                if not (0 <= t and hi < self.duration_ms
                        and 0 <= t + lag and hi + lag < self.duration_ms):
                    raise ValueError(f"burst time {t} with lag {lag} leaves the clip")

    def grid(self, stride: int) -> np.ndarray:
        return np.arange(stride // 2, self.duration_ms, stride, dtype=np.int64)

    def class_audio_times(self) -> tuple:
        """Audio burst time per class.

        When unset, each class targets an evenly spaced point across the
        clip and snaps to the nearest grid slot that keeps both bursts
        inside the clip under that class's lag.
        """
        if self.class_audio_ms is not None:
            return tuple(int(t) for t in self.class_audio_ms)
        grid = self.grid(self.audio_stride_ms)
        hi = self.audio_jitter_ms
        times = []
        for c, lag in enumerate(self.class_lags_ms):
            valid = grid[(grid + lag >= 0) & (grid + hi + lag < self.duration_ms)
                         & (grid + hi < self.duration_ms)]
            if len(valid) == 0:
                raise DataError(f"no audio burst position admits lag {lag}")
            target = (c + 0.5) * self.duration_ms / self.n_classes
            times.append(int(valid[np.argmin(np.abs(valid - target))]))
        return tuple(times)


def _burst_pattern(rng: np.random.Generator, dim: int, scale: float) -> np.ndarray:
    """One fixed direction per modality, shared by every class and event."""
    v = rng.normal(size=dim)
    return scale * v / np.linalg.norm(v)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Write records plus a 70/10/20 manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    audio_grid = spec.grid(spec.audio_stride_ms)
    video_grid = spec.grid(spec.video_stride_ms)
    if len(audio_grid) == 0 or len(video_grid) == 0:
        raise DataError("stride/duration produce zero segments")

    audio_burst = _burst_pattern(rng, AUDIO_DIM, spec.burst_scale)
    video_burst = _burst_pattern(rng, VIDEO_DIM, spec.burst_scale)

    class_times = spec.class_audio_times()
    n_jitter = spec.audio_jitter_ms // spec.audio_stride_ms + 1

    half = spec.burst_width_ms / 2.0
    events = []
    records = {}
    for cls in range(spec.n_classes):
        lag = spec.class_lags_ms[cls]
        for k in range(spec.events_per_class):
            event_id = f"c{cls}_e{k:05d}"
            jitter = int(rng.integers(n_jitter)) * spec.audio_stride_ms
            t_audio_burst = class_times[cls] + jitter
            t_video_burst = t_audio_burst + lag
            audio = rng.normal(0.0, spec.noise_sigma, size=(len(audio_grid), AUDIO_DIM))
            video = rng.normal(0.0, spec.noise_sigma, size=(len(video_grid), VIDEO_DIM))
            audio[np.abs(audio_grid - t_audio_burst) <= half] += audio_burst
            video[np.abs(video_grid - t_video_burst) <= half] += video_burst
            label = np.zeros(spec.n_classes, dtype=np.uint8)
            label[cls] = 1
            records[event_id] = EventRecord(
                event_id=event_id, label=label,
                audio_times=audio_grid.astype(np.uint32),
                audio_feat=audio.astype(np.float32).astype(np.float64),
                video_times=video_grid.astype(np.uint32),
                video_feat=video.astype(np.float32).astype(np.float64),
            )
            events.append((cls, event_id))

    # stratified 70/10/20: shuffle within each class, then slice
    assignment = {}
    for cls in range(spec.n_classes):
        ids = [eid for c, eid in events if c == cls]
        perm = rng.permutation(len(ids))
        n = len(ids)
        n_train = round(0.7 * n)
        n_eval = round(0.1 * n)
        for rank, idx in enumerate(perm):
            split = ("train" if rank < n_train
                     else "eval" if rank < n_train + n_eval else "test")
            assignment[ids[idx]] = split

    manifest_events = []
    for _, event_id in events:
        rel = f"{event_id}.tmev"
        write_record(out_dir / rel, records[event_id])
        manifest_events.append((event_id, assignment[event_id], rel))

    manifest = DatasetManifest(
        n_classes=spec.n_classes,
        class_names=[f"class{c}" for c in range(spec.n_classes)],
        n_audio=len(audio_grid),
        n_video=len(video_grid),
        split_fractions={"train": 0.7, "eval": 0.1, "test": 0.2},
        events=manifest_events,
        root=out_dir,
    )
    manifest_path = out_dir / "manifest.txt"
    write_manifest(manifest_path, manifest)
    return manifest_path
