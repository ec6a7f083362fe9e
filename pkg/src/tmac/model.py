"""Full network: stacked graph layers, learnable-vector readout, focal loss.

Per layer, video nodes aggregate over their own weighted adjacency while
audio nodes sum two branches: their intra-modal aggregation and attention
over video nodes. Both branches of layer l read layer l-1 activations.
After the last layer, a learnable pooling vector per modality collapses
node embeddings to one row each; their concatenation feeds a linear
multi-label head.

Node counts are fixed by configuration. Events with fewer segments are
padded with zero-feature, edge-free nodes; events with more are truncated
to the first n segments before graph construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tmac.autodiff import ShapeError, Tape, Tensor
from tmac.graph import EventGraph, build_graph
from tmac.layers import DenseGraph, GatParams, GcnParams, densify, gat_forward, gcn_forward


@dataclass(frozen=True)
class ModelConfig:
    n_classes: int
    audio_dim: int = 128
    video_dim: int = 1024
    hidden: int = 512
    layers: int = 4
    n_audio: int = 40
    n_video: int = 100

    def __post_init__(self):
        for field in ("n_classes", "audio_dim", "video_dim", "hidden", "layers",
                      "n_audio", "n_video"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1")


def param_shapes(config: ModelConfig) -> dict:
    """Named learnable tensors in fixed order; the order is the contract
    for checkpoints and gradient reduction."""
    shapes = {}
    for layer in range(config.layers):
        d_a = config.audio_dim if layer == 0 else config.hidden
        d_v = config.video_dim if layer == 0 else config.hidden
        h = config.hidden
        shapes[f"layer{layer}.gcn_a.weight"] = (d_a, h)
        shapes[f"layer{layer}.gcn_v.weight"] = (d_v, h)
        shapes[f"layer{layer}.gat.w_src"] = (d_v, h)
        shapes[f"layer{layer}.gat.w_dst"] = (d_a, h)
        shapes[f"layer{layer}.gat.att_src"] = (h, 1)
        shapes[f"layer{layer}.gat.att_dst"] = (h, 1)
    shapes["readout.pool_a"] = (config.n_audio, 1)
    shapes["readout.pool_v"] = (config.n_video, 1)
    shapes["readout.head"] = (2 * config.hidden, config.n_classes)
    shapes["readout.bias"] = (1, config.n_classes)
    return shapes


class ModelParams:
    """All learnable tensors, addressable by name in a stable order."""

    def __init__(self, config: ModelConfig, tensors: dict):
        expected = param_shapes(config)
        if set(tensors) != set(expected):
            missing = set(expected) - set(tensors)
            extra = set(tensors) - set(expected)
            raise ShapeError(f"parameter set mismatch: missing={sorted(missing)} "
                             f"extra={sorted(extra)}")
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise ShapeError(f"{name}: shape {tensors[name].shape} != {shape}")
        self.config = config
        self.tensors = tensors

    def names(self) -> list:
        return list(param_shapes(self.config))

    def layer(self, index: int):
        t = self.tensors
        gcn_a = GcnParams(t[f"layer{index}.gcn_a.weight"])
        gcn_v = GcnParams(t[f"layer{index}.gcn_v.weight"])
        gat = GatParams(
            w_src=t[f"layer{index}.gat.w_src"],
            w_dst=t[f"layer{index}.gat.w_dst"],
            att_src=t[f"layer{index}.gat.att_src"],
            att_dst=t[f"layer{index}.gat.att_dst"],
        )
        return gcn_a, gcn_v, gat

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {
            name: Tensor(t.data.copy(), requires_grad=t.requires_grad)
            for name, t in self.tensors.items()
        })


def count_params(params: ModelParams) -> int:
    return sum(t.data.size for t in params.tensors.values())


def _pad_square(adj: np.ndarray, n: int) -> np.ndarray:
    """Embed adjacency into n x n; padding nodes keep only their self-loop."""
    k = adj.shape[0]
    out = np.eye(n)
    out[:k, :k] = adj
    return out


def _pad_rows(mat: np.ndarray, n: int) -> np.ndarray:
    k = mat.shape[0]
    out = np.zeros((n, mat.shape[1]))
    out[:k] = mat
    return out


def prepare_event(audio_times, audio_feat, video_times, video_feat,
                  config: ModelConfig, m_audio: int, m_video: int, m_cross: int,
                  variant: str = "full") -> DenseGraph:
    """Truncate to configured node counts, build the graph, densify, pad."""
    audio_times = np.asarray(audio_times)[: config.n_audio]
    audio_feat = np.asarray(audio_feat)[: config.n_audio]
    video_times = np.asarray(video_times)[: config.n_video]
    video_feat = np.asarray(video_feat)[: config.n_video]
    if audio_feat.shape[1] != config.audio_dim:
        raise ShapeError(f"audio feature width {audio_feat.shape[1]} != "
                         f"configured {config.audio_dim}")
    if video_feat.shape[1] != config.video_dim:
        raise ShapeError(f"video feature width {video_feat.shape[1]} != "
                         f"configured {config.video_dim}")
    graph = build_graph(audio_times, audio_feat, video_times, video_feat,
                        m_audio, m_video, m_cross)
    dense = densify(graph, variant)
    n_a, n_v = config.n_audio, config.n_video
    if graph.n_audio == n_a and graph.n_video == n_v:
        return dense
    mask = np.zeros((n_a, n_v))
    mask[: graph.n_audio, : graph.n_video] = dense.cross_mask
    bias = np.zeros((n_a, n_v))
    bias[: graph.n_audio, : graph.n_video] = dense.cross_bias
    empty = (mask.sum(axis=1, keepdims=True) == 0).astype(np.float64)
    return DenseGraph(
        adj_audio=_pad_square(dense.adj_audio, n_a),
        adj_video=_pad_square(dense.adj_video, n_v),
        cross_mask=mask,
        cross_bias=bias,
        empty_rows=empty,
        audio_feat=_pad_rows(dense.audio_feat, n_a),
        video_feat=_pad_rows(dense.video_feat, n_v),
    )


class GraphInputs:
    """Per-event constants wrapped as tensors once, reusable across tapes."""

    __slots__ = ("adj_a", "adj_v", "mask", "bias", "empty", "x_a", "x_v")

    def __init__(self, dense: DenseGraph):
        self.adj_a = Tensor(dense.adj_audio)
        self.adj_v = Tensor(dense.adj_video)
        self.mask = Tensor(dense.cross_mask)
        self.bias = Tensor(dense.cross_bias)
        self.empty = Tensor(dense.empty_rows)
        self.x_a = Tensor(dense.audio_feat)
        self.x_v = Tensor(dense.video_feat)


def stack_forward(tape: Tape, params: ModelParams, g: GraphInputs):
    """Run all layers; returns final (audio, video) node embeddings."""
    z_a, z_v = g.x_a, g.x_v
    for layer in range(params.config.layers):
        gcn_a, gcn_v, gat = params.layer(layer)
        z_v_next = gcn_forward(tape, g.adj_v, z_v, gcn_v)
        z_a_next = tape.add(
            gcn_forward(tape, g.adj_a, z_a, gcn_a),
            gat_forward(tape, z_a, z_v, g.mask, g.bias, g.empty, gat),
        )
        z_a, z_v = z_a_next, z_v_next
    return z_a, z_v


def readout(tape: Tape, params: ModelParams, z_a: Tensor, z_v: Tensor) -> Tensor:
    """Pool each modality with its learnable vector, concatenate to 1 x 2h."""
    if z_a.rows != params.config.n_audio:
        raise ShapeError(f"audio rows {z_a.rows} != pooling length "
                         f"{params.config.n_audio}")
    if z_v.rows != params.config.n_video:
        raise ShapeError(f"video rows {z_v.rows} != pooling length "
                         f"{params.config.n_video}")
    pooled_a = tape.matmul(tape.transpose(params.tensors["readout.pool_a"]), z_a)
    pooled_v = tape.matmul(tape.transpose(params.tensors["readout.pool_v"]), z_v)
    return tape.hconcat(pooled_a, pooled_v)


def forward_logits(tape: Tape, params: ModelParams, g: GraphInputs) -> Tensor:
    z_a, z_v = stack_forward(tape, params, g)
    emb = readout(tape, params, z_a, z_v)
    return tape.add(tape.matmul(emb, params.tensors["readout.head"]),
                    params.tensors["readout.bias"])


def predict_probs(tape: Tape, logits: Tensor) -> Tensor:
    return tape.clamp(tape.sigmoid(logits), 1e-7, 1.0 - 1e-7)


def focal_loss(tape: Tape, logits: Tensor, label, gamma: float) -> Tensor:
    """Per-event loss: sum over classes of -(1 - p_t)^gamma * ln(p_t)."""
    if gamma < 0:
        raise ValueError(f"focal exponent must be >= 0, got {gamma}")
    y = np.asarray(label, dtype=np.float64).reshape(1, -1)
    if y.shape != logits.shape:
        raise ShapeError(f"label shape {y.shape} != logits shape {logits.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("label entries must be 0 or 1")
    p = predict_probs(tape, logits)
    # p_t = p where y=1, (1-p) where y=0, built from sign flips:
    # p_t = y*p + (1-y)*(1-p) = (2y-1)*p + (1-y)
    pt = tape.add(tape.mul(p, Tensor(2.0 * y - 1.0)), Tensor(1.0 - y))
    one_minus_pt = tape.add(tape.mul(pt, Tensor(-np.ones_like(y))),
                            Tensor(np.ones_like(y)))
    per_class = tape.mul(tape.pow(one_minus_pt, gamma), tape.log(pt))
    return tape.mul(tape.sum(per_class), Tensor([[-1.0]]))
