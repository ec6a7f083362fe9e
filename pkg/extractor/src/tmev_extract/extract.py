"""Clip-to-record extraction.

One clip becomes one event record: overlapping audio windows and
non-overlapping video chunks are cut on their millisecond grids, each
segment is embedded to a feature row, and rows are stamped with the
segment's center time.
"""
import numpy as np

from tmev_extract.embed import IntensityEmbedder, SpectrogramEmbedder
from tmev_extract.media import (MediaError, audio_duration_ms,
                                video_duration_ms)
from tmev_extract.segmentation import (AUDIO_WINDOW_MS, VIDEO_CHUNK_MS,
                                       audio_centers, audio_window_starts,
                                       video_centers)


def extract_audio(samples: np.ndarray, rate: int, embedder=None) -> tuple:
    """(center timestamps u32, feature rows) for every full audio window."""
    duration = audio_duration_ms(samples, rate)
    starts = audio_window_starts(duration)
    centers = audio_centers(duration)
    embed = embedder or SpectrogramEmbedder(rate)
    window_len = int(round(AUDIO_WINDOW_MS * rate / 1000.0))
    rows = []
    for start_ms in starts:
        lo = int(round(start_ms * rate / 1000.0))
        window = samples[lo: lo + window_len]
        if len(window) < window_len:     # rounding at the clip tail
            window = np.concatenate([window, np.zeros(window_len - len(window))])
        rows.append(embed(window))
    return centers, np.asarray(rows)


def extract_video(frames: np.ndarray, fps: float, embedder=None) -> tuple:
    """(center timestamps u32, feature rows) for every full video chunk."""
    duration = video_duration_ms(len(frames), fps)
    centers = video_centers(duration)
    embed = embedder or IntensityEmbedder()
    frame_ms = np.floor(np.arange(len(frames)) * 1000.0 / fps).astype(np.int64)
    rows = []
    for k in range(len(centers)):
        chunk = frames[frame_ms // VIDEO_CHUNK_MS == k]
        if len(chunk) == 0:
            raise MediaError(
                f"no frames land in chunk {k}; frame rate {fps} too low "
                f"for {VIDEO_CHUNK_MS} ms chunks")
        rows.append(embed(chunk))
    return centers, np.asarray(rows)
