"""Float-side benchmark metrics (numpy).  Same definitions the accelerator
package pins with its oracles: trapezoid AUC over a unique-score sweep,
Youden-cutoff accuracy, step-interpolated AP, macro one-vs-rest scores."""

from __future__ import annotations

import numpy as np

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _sweep(scores, labels):
    order = np.argsort(-scores, kind="stable")
    s, l = scores[order], labels[order]
    tps, fps = np.cumsum(l), np.cumsum(1 - l)
    keep = np.nonzero(np.append(np.diff(s) != 0, True))[0]
    return s[keep], tps[keep], fps[keep]


def roc_metrics(scores, labels) -> dict[str, float]:
    scores = np.asarray(scores, float).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    thresholds, tps, fps = _sweep(scores, labels)
    pos, neg = tps[-1], fps[-1]
    tpr = np.concatenate(([0.0], tps / pos))
    fpr = np.concatenate(([0.0], fps / neg))
    j = tps / pos - fps / neg
    best = float(thresholds[int(np.argmax(j))])
    acc = float(np.mean((scores >= best) == (labels == 1)))
    precision = tps / (tps + fps)
    recall = tps / pos
    ap = float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision))
    return {"auc": float(_trapezoid(tpr, fpr)), "accuracy": acc, "ap": ap}


def classification_scores(probs, labels) -> dict[str, float]:
    probs = np.asarray(probs, float)
    labels = np.asarray(labels).ravel().astype(np.int64)
    predicted = probs.argmax(axis=1)
    aps, recalls = [], []
    for k in range(probs.shape[1]):
        inst = labels == k
        if not inst.any():
            continue
        recalls.append(float(np.mean(predicted[inst] == k)))
        _, tps, fps = _sweep(probs[:, k], inst.astype(np.int64))
        precision = tps / (tps + fps)
        recall = tps / tps[-1]
        aps.append(float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision)))
    return {
        "accuracy": float(np.mean(predicted == labels)),
        "ap": float(np.mean(aps)),
        "ar": float(np.mean(recalls)),
    }


def mean_entropy(probs: np.ndarray) -> float:
    p = np.clip(np.asarray(probs, float), 1e-12, 1.0)
    return float(np.mean(-(p * np.log(p)).sum(axis=-1)))
