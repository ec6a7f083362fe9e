"""Input checks shared by the estimator and the CLI."""
from __future__ import annotations

import numpy as np

from tmac.data import EventRecord


def check_records(records) -> tuple:
    """Validate a homogeneous record list; returns (n_classes, audio_dim, video_dim)."""
    records = list(records)
    if not records:
        raise ValueError("record list is empty")
    for rec in records:
        if not isinstance(rec, EventRecord):
            raise TypeError(f"expected EventRecord, got {type(rec).__name__}")
    first = records[0]
    n_classes = first.label.shape[0]
    audio_dim = first.audio_feat.shape[1]
    video_dim = first.video_feat.shape[1]
    for rec in records:
        if rec.label.shape[0] != n_classes:
            raise ValueError(f"{rec.event_id}: {rec.label.shape[0]} classes, "
                             f"expected {n_classes}")
        if rec.audio_feat.shape[1] != audio_dim or rec.video_feat.shape[1] != video_dim:
            raise ValueError(f"{rec.event_id}: feature dims "
                             f"{rec.audio_feat.shape[1]}/{rec.video_feat.shape[1]}, "
                             f"expected {audio_dim}/{video_dim}")
    return n_classes, audio_dim, video_dim


def label_matrix(records) -> np.ndarray:
    return np.array([rec.label for rec in records], dtype=np.float64)


def infer_node_counts(records) -> tuple:
    """Largest per-modality segment counts; the natural padded graph size."""
    n_a = max(rec.audio_times.shape[0] for rec in records)
    n_v = max(rec.video_times.shape[0] for rec in records)
    return n_a, n_v
