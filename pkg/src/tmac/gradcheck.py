"""Finite-difference verification of the full differentiable stack.

Builds small random event graphs, runs the exact forward/backward, and
compares every analytic parameter gradient against central differences.
Kept inside the package (not the test suite) because the CLI exposes it as
a first-class diagnostic.
"""
from __future__ import annotations

import numpy as np

from tmac.data import EventRecord
from tmac.model import ModelConfig, focal_loss, forward_logits
from tmac.training import TrainConfig, init_params, prepare_events
from tmac.autodiff import Tape


def _random_record(rng: np.random.Generator, n_classes, n_audio, n_video,
                   audio_dim, video_dim) -> EventRecord:
    def times(n):
        return np.cumsum(rng.integers(1, 200, size=n)).astype(np.uint32)

    label = np.zeros(n_classes, dtype=np.uint8)
    label[rng.integers(0, n_classes)] = 1
    extra = rng.random(n_classes) < 0.3     # multi-hot: sometimes >1 positive
    label = np.maximum(label, extra.astype(np.uint8))
    return EventRecord(
        event_id="probe",
        label=label,
        audio_times=times(n_audio),
        audio_feat=rng.normal(size=(n_audio, audio_dim)),
        video_times=times(n_video),
        video_feat=rng.normal(size=(n_video, video_dim)),
    )


def _loss_value(params, item, gamma: float) -> float:
    tape = Tape()
    loss = focal_loss(tape, forward_logits(tape, params, item.inputs),
                      item.label, gamma)
    return float(loss.data[0, 0])


def run_gradcheck(seed: int = 7, n_graphs: int = 20, hidden: int = 8,
                  layers: int = 2, step: float = 1e-5):
    """Returns (max relative error, scalars checked) over random graphs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    for _ in range(n_graphs):
        n_classes = int(rng.integers(2, 5))
        config = ModelConfig(
            n_classes=n_classes,
            audio_dim=int(rng.integers(3, 7)),
            video_dim=int(rng.integers(3, 7)),
            hidden=hidden, layers=layers,
            n_audio=int(rng.integers(2, 11)),
            n_video=int(rng.integers(2, 11)),
        )
        train_config = TrainConfig(
            m_audio=int(rng.integers(1, 4)), m_video=int(rng.integers(1, 4)),
            m_cross=int(rng.integers(1, 4)), layers=layers, hidden=hidden,
            gamma=float(rng.choice([0.5, 2.0])))
        record = _random_record(rng, n_classes, config.n_audio, config.n_video,
                                config.audio_dim, config.video_dim)
        item = prepare_events([record], config, train_config)[0]
        params = init_params(config, rng)

        tape = Tape()
        loss = focal_loss(tape, forward_logits(tape, params, item.inputs),
                          item.label, train_config.gamma)
        tape.backward(loss)

        for name in params.names():
            tensor = params.tensors[name]
            analytic = tape.grad(tensor)
            it = np.nditer(tensor.data, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = tensor.data[idx]
                tensor.data[idx] = keep + step
                up = _loss_value(params, item, train_config.gamma)
                tensor.data[idx] = keep - step
                down = _loss_value(params, item, train_config.gamma)
                tensor.data[idx] = keep
                numeric = (up - down) / (2.0 * step)
                a = analytic[idx]
                rel = abs(a - numeric) / max(1e-3, abs(a) + abs(numeric))
                worst = max(worst, float(rel))
                checked += 1
    return worst, checked
