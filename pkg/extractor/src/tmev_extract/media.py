"""Decoded-media loading.

Codec handling is out of scope: audio arrives as PCM WAV, video as an
NPY volume of frames, both produced by whatever decoder the user runs
upstream. Loaders normalize to float arrays and fail with MediaError on
anything malformed.
"""
import wave
from pathlib import Path

import numpy as np


class MediaError(ValueError):
    """Unreadable or structurally invalid input media."""


def load_wav(path) -> tuple:
    """Mono float64 samples in [-1, 1] plus the sample rate."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            rate = fh.getframerate()
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, OSError) as err:
        raise MediaError(f"{path}: cannot decode WAV ({err})") from err
    if rate <= 0 or n_channels <= 0:
        raise MediaError(f"{path}: invalid WAV header")
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 4:
        samples = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    elif width == 1:
        samples = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    else:
        raise MediaError(f"{path}: unsupported sample width {width}")
    if len(samples) == 0:
        raise MediaError(f"{path}: no audio samples")
    if n_channels > 1:
        samples = samples[: len(samples) // n_channels * n_channels]
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return samples, rate


def load_frames(path) -> np.ndarray:
    """Grayscale float64 frame volume (T, H, W) from an NPY file."""
    path = Path(path)
    try:
        frames = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as err:
        raise MediaError(f"{path}: cannot read frame volume ({err})") from err
    was_integer = np.issubdtype(frames.dtype, np.integer)
    if frames.ndim == 4:                     # (T, H, W, C) -> luminance
        frames = frames.mean(axis=3)
    if frames.ndim != 3:
        raise MediaError(f"{path}: expected (T, H, W[, C]) frames, "
                         f"got shape {frames.shape}")
    if min(frames.shape) == 0:
        raise MediaError(f"{path}: empty frame volume {frames.shape}")
    frames = frames.astype(np.float64)
    if was_integer:
        frames = frames / 255.0
    if not np.isfinite(frames).all():
        raise MediaError(f"{path}: non-finite pixel values")
    return frames


def audio_duration_ms(samples: np.ndarray, rate: int) -> int:
    return int(len(samples) * 1000 // rate)


def video_duration_ms(n_frames: int, fps: float) -> int:
    if fps <= 0:
        raise MediaError(f"frame rate must be positive, got {fps}")
    return int(n_frames * 1000 // fps)
