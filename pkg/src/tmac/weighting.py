"""Temporal edge weighting.

Within one node's neighborhood, later edges matter more. Each edge time t
is mapped to exp(-(t_max - t + 1) / (t_max - t_min + 1)) with the extremes
taken over that same neighborhood, so weights always land in [1/e, 1): the
oldest edge gets exactly 1/e and the newest approaches 1 as the span grows.

Ablation variants swap the decay for constant 1.0 on one or both edge
groups: "non_tmg" flattens everything, "non_intraT" flattens intra-modal
edges only, "non_interT" flattens cross-modal edges only.
"""
from __future__ import annotations

import numpy as np

VARIANTS = ("full", "non_tmg", "non_intraT", "non_interT")


def decay_weights(edge_times) -> np.ndarray:
    """Per-neighborhood decay weights, newest edge weighted highest."""
    t = np.asarray(edge_times, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError("edge times must be 1-D")
    if t.size == 0:
        return np.zeros(0)
    t_max = t.max()
    t_min = t.min()
    return np.exp(-(t_max - t + 1.0) / (t_max - t_min + 1.0))


def neighborhood_weights(edge_times, kind: str, variant: str = "full") -> np.ndarray:
    """Weights for one neighborhood under an ablation variant.

    kind is "intra" or "cross"; variant is one of VARIANTS.
    """
    if kind not in ("intra", "cross"):
        raise ValueError(f"unknown edge kind {kind!r}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    t = np.asarray(edge_times, dtype=np.float64)
    flat = (
        variant == "non_tmg"
        or (variant == "non_intraT" and kind == "intra")
        or (variant == "non_interT" and kind == "cross")
    )
    if flat:
        return np.ones(t.size)
    return decay_weights(t)
