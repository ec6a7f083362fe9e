"""Per-event temporal graph construction.

Each event becomes one graph holding every audio segment and every video
segment as nodes. Edges connect each node to its M nearest neighbors in
time: audio-to-audio, video-to-video, and audio nodes additionally receive
cross edges from video nodes. Every edge carries the later of the two
endpoint timestamps, which downstream weighting turns into a decay weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tmac.autodiff import ShapeError


@dataclass(frozen=True)
class Neighborhood:
    """Incoming edges of one node: neighbor indices and edge timestamps."""

    indices: np.ndarray
    edge_times: np.ndarray


@dataclass(frozen=True)
class EventGraph:
    """One event's graph: two node sets and three edge groups."""

    audio_times: np.ndarray
    video_times: np.ndarray
    audio_feat: np.ndarray
    video_feat: np.ndarray
    audio_nbrs: list    # audio -> audio, one Neighborhood per audio node
    video_nbrs: list    # video -> video
    cross_nbrs: list    # video -> audio, one Neighborhood per audio node
    m_requested: tuple = (0, 0, 0)   # (m_audio, m_video, m_cross) as asked
    m_truncated: tuple = (False, False, False)  # capped by population size

    @property
    def n_audio(self) -> int:
        return len(self.audio_times)

    @property
    def n_video(self) -> int:
        return len(self.video_times)


def select_nearest(times: np.ndarray, t_query: int, m: int,
                   exclude: int | None = None) -> np.ndarray:
    """Indices of the up-to-m candidates nearest t_query.

    Ordering key per candidate j is (|t_j - t_query|, t_j, j) ascending, so
    ties prefer the earlier timestamp and then the lower index. The result
    is in selection order.
    """
    if m < 1:
        raise ValueError(f"neighbor count must be >= 1, got {m}")
    idx = np.arange(len(times))
    if exclude is not None:
        idx = idx[idx != exclude]
    if len(idx) == 0:
        return idx
    t = times[idx]
    gap = np.abs(t - t_query)
    order = np.lexsort((idx, t, gap))
    return idx[order[:m]]


def _validate_modality(name: str, times: np.ndarray, feat: np.ndarray) -> None:
    if times.ndim != 1:
        raise ShapeError(f"{name} timestamps must be 1-D")
    if len(times) == 0:
        raise ValueError(f"{name} segment list is empty")
    if (times < 0).any():
        raise ValueError(f"{name} timestamps must be non-negative")
    if len(times) > 1 and not (np.diff(times) > 0).all():
        raise ValueError(f"{name} timestamps must be strictly increasing")
    if feat.ndim != 2:
        raise ShapeError(f"{name} features must be 2-D")
    if feat.shape[0] != len(times):
        raise ShapeError(
            f"{name} has {len(times)} timestamps but {feat.shape[0]} feature rows")
    if not np.isfinite(feat).all():
        raise ValueError(f"{name} features hold non-finite values")


def build_graph(audio_times, audio_feat, video_times, video_feat,
                m_audio: int = 8, m_video: int = 8, m_cross: int = 8) -> EventGraph:
    """Assemble one event's graph from its two segment sequences."""
    audio_times = np.asarray(audio_times, dtype=np.int64)
    video_times = np.asarray(video_times, dtype=np.int64)
    audio_feat = np.asarray(audio_feat, dtype=np.float64)
    video_feat = np.asarray(video_feat, dtype=np.float64)
    _validate_modality("audio", audio_times, audio_feat)
    _validate_modality("video", video_times, video_feat)

    def intra(times, m):
        out = []
        for i, t_i in enumerate(times):
            sel = select_nearest(times, t_i, m, exclude=i)
            out.append(Neighborhood(sel, np.maximum(times[sel], t_i)))
        return out

    audio_nbrs = intra(audio_times, m_audio)
    video_nbrs = intra(video_times, m_video)

    cross_nbrs = []
    for i, t_i in enumerate(audio_times):
        sel = select_nearest(video_times, t_i, m_cross)
        cross_nbrs.append(Neighborhood(sel, np.maximum(video_times[sel], t_i)))

    truncated = (m_audio > len(audio_times) - 1,
                 m_video > len(video_times) - 1,
                 m_cross > len(video_times))
    return EventGraph(audio_times, video_times, audio_feat, video_feat,
                      audio_nbrs, video_nbrs, cross_nbrs,
                      m_requested=(m_audio, m_video, m_cross),
                      m_truncated=truncated)


def validate_graph(g: EventGraph) -> list:
    """Structural audit; returns a list of violation strings, empty if clean."""
    issues = []
    m_a, m_v, m_c = g.m_requested

    def check_group(nbrs, n_pool, m_cap, label):
        for i, nb in enumerate(nbrs):
            idx = nb.indices
            if len(idx) != len(set(idx.tolist())):
                issues.append(f"{label} node {i}: duplicate neighbor")
            if m_cap and len(idx) > m_cap:
                issues.append(f"{label} node {i}: degree {len(idx)} exceeds {m_cap}")
            if len(idx) and (idx.min() < 0 or idx.max() >= n_pool):
                issues.append(f"{label} node {i}: neighbor index out of range")
            if len(idx) != len(nb.edge_times):
                issues.append(f"{label} node {i}: index/time length mismatch")

    check_group(g.audio_nbrs, g.n_audio, m_a, "audio")
    check_group(g.video_nbrs, g.n_video, m_v, "video")
    check_group(g.cross_nbrs, g.n_video, m_c, "cross")

    for i, nb in enumerate(g.audio_nbrs):
        if i in nb.indices:
            issues.append(f"audio node {i}: self edge")
        for j, et in zip(nb.indices, nb.edge_times):
            want = max(g.audio_times[i], g.audio_times[j])
            if et != want:
                issues.append(f"audio edge {i}<-{j}: timestamp {et} != {want}")
    for i, nb in enumerate(g.video_nbrs):
        if i in nb.indices:
            issues.append(f"video node {i}: self edge")
    for i, nb in enumerate(g.cross_nbrs):
        for j, et in zip(nb.indices, nb.edge_times):
            want = max(g.audio_times[i], g.video_times[j])
            if et != want:
                issues.append(f"cross edge {i}<-{j}: timestamp {et} != {want}")
    return issues
