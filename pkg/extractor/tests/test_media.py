import numpy as np
import pytest

from media_helpers import tone, write_wav
from tmev_extract.media import (MediaError, audio_duration_ms, load_frames,
                                load_wav, video_duration_ms)


def test_wav_widths_roundtrip(tmp_path, rng):
    ref = tone(0.25, 8000)
    for width, tol in ((1, 2e-2), (2, 1e-4), (4, 1e-8)):
        path = write_wav(tmp_path / f"w{width}.wav", ref, 8000, width=width)
        samples, rate = load_wav(path)
        assert rate == 8000
        assert len(samples) == len(ref)
        assert np.abs(samples - ref).max() < tol


def test_wav_stereo_is_channel_mean(tmp_path):
    ref = tone(0.1, 8000)
    path = write_wav(tmp_path / "st.wav", ref, 8000, channels=2)
    samples, _ = load_wav(path)
    mono, _ = load_wav(write_wav(tmp_path / "mo.wav", ref, 8000))
    assert np.abs(samples - mono).max() < 1e-4


def test_wav_garbage_raises(tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"\x00\x01\x02 definitely not RIFF")
    with pytest.raises(MediaError, match="cannot decode"):
        load_wav(bad)


def test_wav_empty_raises(tmp_path):
    path = write_wav(tmp_path / "e.wav", np.zeros(0), 8000)
    with pytest.raises(MediaError, match="no audio samples"):
        load_wav(path)


def test_frames_uint8_scaled(tmp_path):
    path = tmp_path / "f.npy"
    np.save(path, np.full((4, 2, 2), 255, dtype=np.uint8))
    frames = load_frames(path)
    assert frames.shape == (4, 2, 2)
    assert np.allclose(frames, 1.0)


def test_frames_rgb_luminance(tmp_path, rng):
    stack = rng.integers(0, 256, size=(3, 4, 5, 3), dtype=np.uint8)
    path = tmp_path / "rgb.npy"
    np.save(path, stack)
    frames = load_frames(path)
    assert frames.shape == (3, 4, 5)
    assert np.allclose(frames, stack.astype(np.float64).mean(axis=3) / 255.0)


def test_frames_float_passthrough(tmp_path, rng):
    stack = rng.random((2, 3, 3))
    path = tmp_path / "fl.npy"
    np.save(path, stack)
    assert np.allclose(load_frames(path), stack)


def test_frames_bad_shape_raises(tmp_path):
    path = tmp_path / "flat.npy"
    np.save(path, np.zeros((7, 3)))
    with pytest.raises(MediaError, match="expected"):
        load_frames(path)


def test_frames_garbage_raises(tmp_path):
    bad = tmp_path / "bad.npy"
    bad.write_bytes(b"not an npy header at all")
    with pytest.raises(MediaError, match="cannot read"):
        load_frames(bad)


def test_duration_helpers():
    assert audio_duration_ms(np.zeros(16000), 16000) == 1000
    assert audio_duration_ms(np.zeros(8000 + 4000), 8000) == 1500
    assert video_duration_ms(250, 25.0) == 10_000
    assert video_duration_ms(3, 30.0) == 100
    with pytest.raises(MediaError, match="frame rate"):
        video_duration_ms(10, 0.0)
