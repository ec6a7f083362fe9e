"""Independent oracles used across the test suite.

Each function here recomputes a quantity the library also computes, but by
a deliberately naive route (finite differences, exhaustive enumeration,
direct sorting). Tests freeze these outputs as expected values.
"""
import numpy as np

from tmac.autodiff import Tape, Tensor


def numeric_grad(build, params, h=1e-5):
    """Central-difference gradient of a scalar loss w.r.t. each param array.

    build(tape, tensors) -> scalar Tensor, where tensors mirrors params.
    Returns a list of arrays shaped like the inputs.
    """
    grads = []
    for k, base in enumerate(params):
        g = np.zeros_like(base)
        for idx in np.ndindex(*base.shape):
            bumped = [p.copy() for p in params]
            bumped[k][idx] += h
            hi = _eval(build, bumped)
            bumped[k][idx] -= 2 * h
            lo = _eval(build, bumped)
            g[idx] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def _eval(build, arrays):
    tape = Tape()
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    return float(build(tape, tensors).data[0, 0])


def check_gradients(build, params, h=1e-5, tol=1e-4):
    """Max relative error between tape gradients and finite differences."""
    tape = Tape()
    tensors = [Tensor(p, requires_grad=True) for p in params]
    loss = build(tape, tensors)
    tape.backward(loss)
    analytic = [tape.grad(t) for t in tensors]
    numeric = numeric_grad(build, params, h=h)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-3)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def brute_average_precision(scores, labels):
    """AP by explicit ranking walk: precision at each positive, averaged."""
    ranking = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    precisions = []
    for k, i in enumerate(ranking, start=1):
        if labels[i]:
            hits += 1
            precisions.append(hits / k)
    return sum(precisions) / len(precisions)


def brute_roc_auc(scores, labels):
    """AUC by exhaustive positive/negative pair comparison, ties count 1/2."""
    pos = [float(s) for s, y in zip(scores, labels) if y]
    neg = [float(s) for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def centroid_accuracy(train_records, test_records):
    """Nearest-centroid on time-pooled features, the time-blind baseline.

    Pooling is the per-event mean over segments, which is invariant to
    segment order, so this classifier sees exactly what survives after
    temporal structure is destroyed.
    """
    def pooled(rec):
        return np.concatenate([rec.audio_feat.mean(axis=0),
                               rec.video_feat.mean(axis=0)])

    by_class = {}
    for rec in train_records:
        by_class.setdefault(int(rec.label.argmax()), []).append(pooled(rec))
    classes = sorted(by_class)
    centroids = np.array([np.mean(by_class[c], axis=0) for c in classes])
    correct = 0
    for rec in test_records:
        gap = ((centroids - pooled(rec)) ** 2).sum(axis=1)
        if classes[int(gap.argmin())] == int(rec.label.argmax()):
            correct += 1
    return correct / len(test_records)
