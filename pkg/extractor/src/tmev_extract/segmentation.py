"""Segment grids for the two modalities.

Audio uses overlapping 960 ms windows advancing 196 ms at a time; video
uses non-overlapping 250 ms chunks. Timestamps are window centers in
milliseconds, which makes both grids strictly increasing by construction.
"""
import numpy as np

from tmev_extract.media import MediaError

AUDIO_WINDOW_MS = 960
AUDIO_STRIDE_MS = 196    # 960 ms window minus 764 ms overlap
VIDEO_CHUNK_MS = 250


def audio_window_starts(duration_ms: int) -> np.ndarray:
    """Start offsets of every full audio window inside the clip."""
    if duration_ms < AUDIO_WINDOW_MS:
        raise MediaError(
            f"clip of {duration_ms} ms is shorter than one "
            f"{AUDIO_WINDOW_MS} ms audio window")
    count = (duration_ms - AUDIO_WINDOW_MS) // AUDIO_STRIDE_MS + 1
    return np.arange(count, dtype=np.int64) * AUDIO_STRIDE_MS


def audio_centers(duration_ms: int) -> np.ndarray:
    return (audio_window_starts(duration_ms)
            + AUDIO_WINDOW_MS // 2).astype(np.uint32)


def video_centers(duration_ms: int) -> np.ndarray:
    if duration_ms < VIDEO_CHUNK_MS:
        raise MediaError(
            f"clip of {duration_ms} ms is shorter than one "
            f"{VIDEO_CHUNK_MS} ms video chunk")
    count = duration_ms // VIDEO_CHUNK_MS
    centers = np.arange(count, dtype=np.int64) * VIDEO_CHUNK_MS + VIDEO_CHUNK_MS // 2
    return centers.astype(np.uint32)
