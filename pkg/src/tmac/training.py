"""Optimization loop: batching, init, schedule, adaptive moments, ablations.

One training step runs forward/backward per event graph on its own tape
(optionally across worker threads; parameters are read-only during the
pass), averages gradients in batch order, and applies one adaptive-moment
update. The loop evaluates on a cadence, keeps the best parameters by
evaluation mAP, and stops early after a patience window without
improvement.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from tmac.autodiff import NumericError, Tape, Tensor
from tmac.metrics import MetricReport, compute_metrics
from tmac.model import (GraphInputs, ModelConfig, ModelParams, focal_loss,
                        forward_logits, param_shapes, predict_probs, prepare_event)
from tmac.weighting import VARIANTS


@dataclass(frozen=True)
class TrainConfig:
    m_audio: int = 8
    m_video: int = 8
    m_cross: int = 8
    layers: int = 4
    hidden: int = 512
    gamma: float = 2.0
    base_lr: float = 0.005
    decay_factor: float = 0.1
    decay_interval: int = 250
    warmup_iters: int = 1000
    batch_size: int = 32
    max_iters: int = 5000
    eval_interval: int = 250
    patience: int = 5
    workers: int = 1
    seed: int = 0
    variant: str = "full"

    def __post_init__(self):
        for name in ("m_audio", "m_video", "m_cross", "layers", "hidden",
                     "batch_size", "decay_interval", "eval_interval",
                     "patience", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_iters < 0 or self.warmup_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.base_lr < 0:
            raise ValueError("base_lr must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


def init_params(config: ModelConfig, seed) -> ModelParams:
    """Uniform Xavier weights; pooling vectors and bias start at 1/n."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tensors = {}
    for name, shape in param_shapes(config).items():
        if name in ("readout.pool_a", "readout.pool_v"):
            value = np.full(shape, 1.0 / shape[0])
        elif name == "readout.bias":
            value = np.full(shape, 1.0 / shape[1])
        else:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            value = rng.uniform(-bound, bound, size=shape)
        tensors[name] = Tensor(value, requires_grad=True)
    return ModelParams(config, tensors)


def lr_at(iteration: int, config: TrainConfig) -> float:
    """Linear ramp to base_lr over the warm-up, stepped decay afterwards."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if iteration < config.warmup_iters:
        return config.base_lr * iteration / config.warmup_iters
    steps = (iteration - config.warmup_iters) // config.decay_interval
    return config.base_lr * config.decay_factor ** steps


class AdamState:
    """First/second moment per parameter plus the shared step counter."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, params: ModelParams):
        self.m = {name: np.zeros(t.shape) for name, t in params.tensors.items()}
        self.v = {name: np.zeros(t.shape) for name, t in params.tensors.items()}
        self.t = 0

    def step(self, params: ModelParams, grads: dict, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.BETA1 ** self.t
        c2 = 1.0 - self.BETA2 ** self.t
        for name in params.names():
            g = grads[name]
            self.m[name] = self.BETA1 * self.m[name] + (1.0 - self.BETA1) * g
            self.v[name] = self.BETA2 * self.v[name] + (1.0 - self.BETA2) * g * g
            update = lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.EPS)
            data = params.tensors[name].data
            data -= update
            if not np.isfinite(data).all():
                raise NumericError(f"parameter {name} became non-finite")


@dataclass
class PreparedEvent:
    event_id: str
    inputs: GraphInputs
    label: np.ndarray


def prepare_events(records, model_config: ModelConfig, config: TrainConfig) -> list:
    """Graph constants for every record under the configured variant."""
    out = []
    for rec in records:
        dense = prepare_event(rec.audio_times, rec.audio_feat,
                              rec.video_times, rec.video_feat,
                              model_config, config.m_audio, config.m_video,
                              config.m_cross, config.variant)
        out.append(PreparedEvent(rec.event_id, GraphInputs(dense),
                                 np.asarray(rec.label, dtype=np.float64)))
    return out


def _graph_pass(params: ModelParams, item: PreparedEvent, gamma: float):
    tape = Tape()
    try:
        loss = focal_loss(tape, forward_logits(tape, params, item.inputs),
                          item.label, gamma)
    except NumericError as err:
        raise NumericError(f"event {item.event_id}: {err}") from err
    if not np.isfinite(loss.data[0, 0]):
        raise NumericError(f"event {item.event_id}: non-finite loss")
    tape.backward(loss)
    return float(loss.data[0, 0]), tape


def train_step(params: ModelParams, opt: AdamState, batch: list,
               config: TrainConfig, iteration: int, pool=None) -> float:
    """One forward/backward/update over a batch; returns the mean loss."""
    if not batch:
        raise ValueError("empty batch")
    if pool is not None and config.workers > 1:
        results = list(pool.map(lambda it: _graph_pass(params, it, config.gamma),
                                batch))
    else:
        results = [_graph_pass(params, it, config.gamma) for it in batch]
    n = len(batch)
    grads = {}
    for name in params.names():
        tensor = params.tensors[name]
        acc = np.zeros(tensor.shape)
        for _, tape in results:     # fixed batch order: bit-reproducible
            acc += tape.grad(tensor)
        grads[name] = acc / n
    opt.step(params, grads, lr_at(iteration, config))
    return float(np.mean([loss for loss, _ in results]))


def predict_scores(params: ModelParams, events: list) -> np.ndarray:
    rows = []
    for item in events:
        tape = Tape()
        logits = forward_logits(tape, params, item.inputs)
        rows.append(predict_probs(tape, logits).data[0])
    return np.array(rows)


def evaluate(params: ModelParams, events: list) -> MetricReport:
    scores = predict_scores(params, events)
    labels = np.array([item.label for item in events])
    return compute_metrics(scores, labels)


@dataclass
class TrainResult:
    params: ModelParams          # best by eval mAP (initial if never evaluated)
    best_map: float
    best_iteration: int
    history: list                # dicts: iteration, loss, map, auc
    final_params: ModelParams
    opt: AdamState
    rng_state: dict = field(default_factory=dict)


def train(dataset: dict, model_config: ModelConfig, config: TrainConfig) -> TrainResult:
    """Full loop over prepared splits {train, eval} of EventRecords."""
    for split in ("train", "eval"):
        if not dataset.get(split):
            raise ValueError(f"{split} split is empty")
    rng = np.random.default_rng(config.seed)
    params = init_params(model_config, rng)
    opt = AdamState(params)
    train_events = prepare_events(dataset["train"], model_config, config)
    eval_events = prepare_events(dataset["eval"], model_config, config)

    best = TrainResult(params=params.copy(), best_map=float("-inf"),
                       best_iteration=0, history=[], final_params=params,
                       opt=opt)
    order: list = []
    cursor = 0
    stale_evals = 0
    losses: list = []
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for iteration in range(1, config.max_iters + 1):
            if cursor >= len(order):
                order = rng.permutation(len(train_events)).tolist()
                cursor = 0
            picked = order[cursor: cursor + config.batch_size]
            cursor += config.batch_size
            batch = [train_events[i] for i in picked]
            losses.append(train_step(params, opt, batch, config, iteration, pool))

            at_cadence = iteration % config.eval_interval == 0
            if at_cadence or iteration == config.max_iters:
                report = evaluate(params, eval_events)
                best.history.append({
                    "iteration": iteration,
                    "loss": float(np.mean(losses)),
                    "map": report.map,
                    "auc": report.auc,
                })
                losses = []
                if report.map > best.best_map:
                    best.best_map = report.map
                    best.best_iteration = iteration
                    best.params = params.copy()
                    stale_evals = 0
                else:
                    stale_evals += 1
                if stale_evals >= config.patience:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    best.final_params = params
    best.opt = opt
    best.rng_state = rng.bit_generator.state
    return best


def run_ablation(dataset: dict, model_config: ModelConfig, config: TrainConfig,
                 seeds: list) -> list:
    """Train every variant with the same seeds; report test-split metrics."""
    rows = []
    for variant in VARIANTS:
        maps, aucs = [], []
        for seed in seeds:
            cfg = replace(config, variant=variant, seed=seed)
            result = train(dataset, model_config, cfg)
            test_events = prepare_events(dataset["test"], model_config, cfg)
            report = evaluate(result.params, test_events)
            maps.append(report.map)
            aucs.append(report.auc)
        rows.append({
            "variant": variant,
            "map_mean": float(np.mean(maps)),
            "map_std": float(np.std(maps)),
            "auc_mean": float(np.mean(aucs)),
            "auc_std": float(np.std(aucs)),
            "maps": maps,
            "aucs": aucs,
        })
    return rows


def run_sweep(dataset: dict, model_config: ModelConfig, config: TrainConfig,
              parameter: str, values: list, seeds: list) -> list:
    """Train once per neighbor-count value; report test-split metrics."""
    if parameter not in ("m_audio", "m_video", "m_cross"):
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    if not values:
        raise ValueError("sweep values list is empty")
    n_nodes = {"m_audio": model_config.n_audio, "m_video": model_config.n_video,
               "m_cross": model_config.n_video}[parameter]
    cap = n_nodes - 1 if parameter in ("m_audio", "m_video") else n_nodes
    rows = []
    for value in values:
        maps, aucs = [], []
        for seed in seeds:
            cfg = replace(config, **{parameter: value}, seed=seed)
            result = train(dataset, model_config, cfg)
            test_events = prepare_events(dataset["test"], model_config, cfg)
            report = evaluate(result.params, test_events)
            maps.append(report.map)
            aucs.append(report.auc)
        rows.append({
            "parameter": parameter,
            "value": value,
            "truncated": value > cap,
            "map_mean": float(np.mean(maps)),
            "map_std": float(np.std(maps)),
            "auc_mean": float(np.mean(aucs)),
            "auc_std": float(np.std(aucs)),
        })
    return rows
