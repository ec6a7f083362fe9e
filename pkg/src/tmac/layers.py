"""Graph layers: weighted convolution and cross-modal attention.

Graphs are small (at most a few hundred nodes), so adjacency is dense. All
edge weights are precomputed constants; gradients flow only through node
features and layer parameters.

The convolution is Z' = relu(A_hat Z W) with A_hat the weighted adjacency
plus unit self-loops, row-normalized.

The attention layer lets each audio node attend over its video neighbors.
Scores use separate source and destination projections (the two modalities
enter with different widths), a leaky-relu nonlinearity, and the log of the
temporal edge weight as an additive bias. Softmax is masked per row; an
audio node with no cross edges yields an exact zero output row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tmac.autodiff import Tape, Tensor
from tmac.graph import EventGraph
from tmac.weighting import neighborhood_weights


@dataclass(frozen=True)
class DenseGraph:
    """One event's constant matrices, ready for the layer stack."""

    adj_audio: np.ndarray    # (n_a, n_a) row-normalized, self-loops included
    adj_video: np.ndarray    # (n_v, n_v)
    cross_mask: np.ndarray   # (n_a, n_v) 1.0 where a video node feeds an audio node
    cross_bias: np.ndarray   # (n_a, n_v) ln(edge weight) at edges, 0 elsewhere
    empty_rows: np.ndarray   # (n_a, 1) 1.0 on audio rows with no cross edges
    audio_feat: np.ndarray   # (n_a, d_a)
    video_feat: np.ndarray   # (n_v, d_v)


def normalized_adjacency(n: int, nbrs, variant: str) -> np.ndarray:
    adj = np.zeros((n, n))
    for i, nb in enumerate(nbrs):
        if len(nb.indices):
            adj[i, nb.indices] = neighborhood_weights(nb.edge_times, "intra", variant)
        adj[i, i] += 1.0
    return adj / adj.sum(axis=1, keepdims=True)


def densify(graph: EventGraph, variant: str = "full") -> DenseGraph:
    """Expand neighbor lists into the dense constants one variant needs."""
    n_a, n_v = graph.n_audio, graph.n_video
    mask = np.zeros((n_a, n_v))
    bias = np.zeros((n_a, n_v))
    for i, nb in enumerate(graph.cross_nbrs):
        if len(nb.indices):
            w = neighborhood_weights(nb.edge_times, "cross", variant)
            mask[i, nb.indices] = 1.0
            bias[i, nb.indices] = np.log(w)
    empty = (mask.sum(axis=1, keepdims=True) == 0).astype(np.float64)
    return DenseGraph(
        adj_audio=normalized_adjacency(n_a, graph.audio_nbrs, variant),
        adj_video=normalized_adjacency(n_v, graph.video_nbrs, variant),
        cross_mask=mask,
        cross_bias=bias,
        empty_rows=empty,
        audio_feat=graph.audio_feat,
        video_feat=graph.video_feat,
    )


@dataclass
class GcnParams:
    weight: Tensor


@dataclass
class GatParams:
    w_src: Tensor    # (d_src, d_out) video projection
    w_dst: Tensor    # (d_dst, d_out) audio projection
    att_src: Tensor  # (d_out, 1)
    att_dst: Tensor  # (d_out, 1)


def gcn_forward(tape: Tape, adj: Tensor, z: Tensor, params: GcnParams) -> Tensor:
    return tape.relu(tape.matmul(adj, tape.matmul(z, params.weight)))


def gat_forward(tape: Tape, z_dst: Tensor, z_src: Tensor, mask: Tensor,
                bias: Tensor, empty: Tensor, params: GatParams) -> Tensor:
    h_src = tape.matmul(z_src, params.w_src)
    h_dst = tape.matmul(z_dst, params.w_dst)
    s_src = tape.matmul(h_src, params.att_src)    # (n_v, 1)
    s_dst = tape.matmul(h_dst, params.att_dst)    # (n_a, 1)
    # pairwise score grid via column-plus-row broadcast, then the log-bias
    grid = tape.add(s_dst, tape.transpose(s_src))
    scores = tape.add(tape.leaky_relu(grid, slope=0.2), bias)
    # row-max shift as a detached constant; softmax is shift-invariant so
    # values and gradients are unchanged, only overflow is avoided
    masked_scores = np.where(mask.data > 0, scores.data, -np.inf)
    shift = np.where(mask.data.sum(axis=1, keepdims=True) > 0,
                     masked_scores.max(axis=1, keepdims=True, initial=-np.inf), 0.0)
    shifted = tape.add(scores, Tensor(-shift))
    numer = tape.mul(tape.exp(shifted), mask)
    denom = tape.add(tape.sum(numer, axis="rows"), empty)
    alpha = tape.mul(numer, tape.pow(denom, -1.0))
    return tape.relu(tape.matmul(alpha, h_src))
