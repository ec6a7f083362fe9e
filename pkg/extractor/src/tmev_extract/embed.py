"""Segment embedders.

Each embedder maps one media segment to a fixed-dimension feature row.
The defaults compute real signal summaries (a log-mel spectrogram for
audio, grid intensity statistics for video) and push them through a
seeded random projection to reach the record dims. They are deliberate
stand-ins for pretrained embedding networks: anything callable with the
same signature can replace them, and the record format downstream does
not care which produced the rows.
"""
import numpy as np

AUDIO_DIM = 128
VIDEO_DIM = 1024

MEL_BANDS = 64
MEL_FRAMES = 96
_MEL_LOW_HZ = 125.0
_MEL_HIGH_HZ = 7500.0


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_fft_bins: int, rate: int, n_bands: int = MEL_BANDS) -> np.ndarray:
    """Triangular filters (n_bands, n_fft_bins) over 125 Hz .. min(7500, nyquist)."""
    nyquist = rate / 2.0
    high = min(_MEL_HIGH_HZ, nyquist)
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(_MEL_LOW_HZ), _hz_to_mel(high),
                                      n_bands + 2))
    freqs = np.linspace(0.0, nyquist, n_fft_bins)
    bank = np.zeros((n_bands, n_fft_bins))
    for b in range(n_bands):
        lo, mid, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        bank[b] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def _projection(rng_seed: int, n_in: int, n_out: int) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    return rng.normal(scale=1.0 / np.sqrt(n_in), size=(n_in, n_out))


class SpectrogramEmbedder:
    """960 ms window -> 96x64 log-mel spectrogram -> 128-d projection."""

    def __init__(self, rate: int, seed: int = 1):
        self.rate = rate
        # 96 frames tile the window; frames are two hops long
        self.hop = None
        self._bank = None
        self._proj = _projection(seed, MEL_FRAMES * MEL_BANDS, AUDIO_DIM)

    def _prepare(self, window_len: int):
        self.hop = max(1, window_len // MEL_FRAMES)
        frame_len = 2 * self.hop
        self._bank = mel_filterbank(frame_len // 2 + 1, self.rate)
        self._frame_len = frame_len

    def __call__(self, window: np.ndarray) -> np.ndarray:
        if self._bank is None:
            self._prepare(len(window))
        frame_len, hop = self._frame_len, self.hop
        padded = np.concatenate([window, np.zeros(frame_len)])
        frames = np.stack([padded[k * hop: k * hop + frame_len]
                           for k in range(MEL_FRAMES)])
        frames = frames * np.hanning(frame_len)
        power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
        mel = power @ self._bank.T
        spectrogram = np.log(mel + 1e-6)                 # (96, 64)
        return spectrogram.reshape(-1) @ self._proj


class IntensityEmbedder:
    """250 ms frame chunk -> grid intensity statistics -> 1024-d projection."""

    GRID = 4

    def __init__(self, seed: int = 2):
        n_cells = self.GRID * self.GRID
        self._proj = _projection(seed, 3 * n_cells + 4, VIDEO_DIM)

    def _cells(self, frames: np.ndarray) -> np.ndarray:
        t, h, w = frames.shape
        g = self.GRID
        rows = np.linspace(0, h, g + 1).astype(int)
        cols = np.linspace(0, w, g + 1).astype(int)
        out = np.empty((t, g * g))
        for i in range(g):
            for j in range(g):
                block = frames[:, rows[i]:max(rows[i + 1], rows[i] + 1),
                               cols[j]:max(cols[j + 1], cols[j] + 1)]
                out[:, i * g + j] = block.mean(axis=(1, 2))
        return out

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        cells = self._cells(frames)                      # (t, 16)
        motion = (np.abs(np.diff(cells, axis=0)).mean(axis=0)
                  if len(cells) > 1 else np.zeros(cells.shape[1]))
        stats = np.concatenate([
            cells.mean(axis=0),
            cells.std(axis=0),
            motion,
            [frames.mean(), frames.std(), frames.min(), frames.max()],
        ])
        return stats @ self._proj
