"""Scikit-learn style front door over the graph classifier.

The estimator trains on lists of EventRecord (labels travel inside the
records, so `y` is optional and checked for agreement when given). `score`
reports macro mAP, the primary metric for multi-label events; accuracy is
meaningless under multi-hot labels.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from tmac.metrics import compute_metrics
from tmac.model import ModelConfig
from tmac.training import TrainConfig, predict_scores, prepare_events, train
from tmac.validation import check_records, infer_node_counts, label_matrix


class TemporalGraphClassifier(BaseEstimator):
    """Multi-label event classifier over temporal audio/video segment graphs.

    Parameters mirror the training configuration. `n_audio`/`n_video` fix
    the padded graph size; leave them None to infer the maxima from the
    training records.
    """

    def __init__(self, hidden=512, layers=4, n_audio=None, n_video=None,
                 m_audio=8, m_video=8, m_cross=8, gamma=2.0, base_lr=0.005,
                 decay_factor=0.1, decay_interval=250, warmup_iters=1000,
                 batch_size=32, max_iters=5000, eval_interval=250,
                 patience=5, workers=1, seed=0, variant="full"):
        self.hidden = hidden
        self.layers = layers
        self.n_audio = n_audio
        self.n_video = n_video
        self.m_audio = m_audio
        self.m_video = m_video
        self.m_cross = m_cross
        self.gamma = gamma
        self.base_lr = base_lr
        self.decay_factor = decay_factor
        self.decay_interval = decay_interval
        self.warmup_iters = warmup_iters
        self.batch_size = batch_size
        self.max_iters = max_iters
        self.eval_interval = eval_interval
        self.patience = patience
        self.workers = workers
        self.seed = seed
        self.variant = variant

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            m_audio=self.m_audio, m_video=self.m_video, m_cross=self.m_cross,
            layers=self.layers, hidden=self.hidden, gamma=self.gamma,
            base_lr=self.base_lr, decay_factor=self.decay_factor,
            decay_interval=self.decay_interval, warmup_iters=self.warmup_iters,
            batch_size=self.batch_size, max_iters=self.max_iters,
            eval_interval=self.eval_interval, patience=self.patience,
            workers=self.workers, seed=self.seed, variant=self.variant)

    @staticmethod
    def _check_y(records, y):
        if y is None:
            return
        y = np.asarray(y)
        if not np.array_equal(y, label_matrix(records)):
            raise ValueError("y disagrees with the labels stored in the records")

    def fit(self, X, y=None, eval_set=None):
        """Train on EventRecords; eval_set drives early stopping (default: X)."""
        records = list(X)
        n_classes, audio_dim, video_dim = check_records(records)
        self._check_y(records, y)
        eval_records = list(eval_set) if eval_set is not None else records
        check_records(eval_records)
        n_audio, n_video = infer_node_counts(records + eval_records)
        self.model_config_ = ModelConfig(
            n_classes=n_classes, audio_dim=audio_dim, video_dim=video_dim,
            hidden=self.hidden, layers=self.layers,
            n_audio=self.n_audio if self.n_audio is not None else n_audio,
            n_video=self.n_video if self.n_video is not None else n_video)
        result = train({"train": records, "eval": eval_records},
                       self.model_config_, self._train_config())
        self.params_ = result.params
        self.result_ = result
        self.n_classes_ = n_classes
        return self

    def _scores(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        records = list(X)
        check_records(records)
        events = prepare_events(records, self.model_config_, self._train_config())
        return predict_scores(self.params_, events)

    def predict_proba(self, X) -> np.ndarray:
        """Per-class probabilities, shape (n_events, n_classes)."""
        return self._scores(X)

    def predict(self, X) -> np.ndarray:
        """Multi-hot predictions at the 0.5 threshold."""
        return (self._scores(X) >= 0.5).astype(np.uint8)

    def score(self, X, y=None) -> float:
        """Macro mean average precision over the given records."""
        records = list(X)
        self._check_y(records, y)
        scores = self._scores(records)
        return compute_metrics(scores, label_matrix(records)).map
