"""Evaluation metrics: reconstruction fit, ROC analysis, classification scores
and uncertainty decomposition.  Pure numpy, no package-internal imports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "RocResult",
    "UncertaintyParts",
    "regression_metrics",
    "roc_analysis",
    "classification_metrics",
    "predictive_entropy",
    "uncertainty_decompose",
    "uncertainty_band",
    "sample_variance",
    "reconstruction_scores",
]


@dataclass(frozen=True)
class RocResult:
    """ROC sweep summary: AUC, the Youden-optimal threshold, accuracy at that
    cutoff, and average precision."""

    auc: float
    best_threshold: float
    acc_at_cutoff: float
    ap: float

    def __post_init__(self) -> None:
        for name in ("auc", "acc_at_cutoff", "ap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


def regression_metrics(pred_mean, pred_var, target) -> dict[str, float]:
    """RMSE, mean L1 and Gaussian negative log-likelihood of a fit.

    ``pred_var`` (scalar or broadcastable array) is the predictive variance
    used in the NLL; it must be strictly positive.
    """
    mu = np.asarray(pred_mean, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if mu.shape != y.shape:
        raise ValueError(f"shape mismatch: prediction {mu.shape} vs target {y.shape}")
    var = np.broadcast_to(np.asarray(pred_var, dtype=np.float64), mu.shape)
    if np.any(var <= 0):
        raise ValueError("predictive variance must be positive for the NLL")
    err = mu - y
    nll = 0.5 * (np.log(2.0 * np.pi * var) + err**2 / var)
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "l1": float(np.mean(np.abs(err))),
        "nll": float(np.mean(nll)),
    }


def reconstruction_scores(inputs: np.ndarray, reconstructions: np.ndarray) -> np.ndarray:
    """Per-sample anomaly score: RMSE of the reconstruction over the sequence."""
    inputs = np.asarray(inputs, dtype=np.float64)
    reconstructions = np.asarray(reconstructions, dtype=np.float64)
    if inputs.shape != reconstructions.shape:
        raise ValueError("inputs and reconstructions must share a shape")
    flat = (inputs - reconstructions).reshape(inputs.shape[0], -1)
    return np.sqrt(np.mean(flat**2, axis=1))


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    if set(np.unique(labels)) - {0, 1}:
        raise ValueError("labels must be binary 0/1")
    if labels.min() == labels.max():
        raise ValueError("both classes must be present")
    return scores, labels


def _sweep(scores, labels):
    """Cumulative TP/FP at each distinct descending threshold."""
    order = np.argsort(-scores, kind="stable")
    s, l = scores[order], labels[order]
    tps = np.cumsum(l)
    fps = np.cumsum(1 - l)
    last_of_tie = np.nonzero(np.append(np.diff(s) != 0, True))[0]
    return s[last_of_tie], tps[last_of_tie], fps[last_of_tie]


def roc_analysis(scores, labels) -> RocResult:
    """Threshold sweep over the unique scores (predict anomalous when
    score >= threshold).

    AUC uses the trapezoid rule; the reported threshold maximizes Youden's
    J = TPR - FPR, ties resolved towards the higher threshold (fewer
    positives); AP uses step-interpolated precision-recall area.
    """
    scores, labels = _check_binary(scores, labels)
    thresholds, tps, fps = _sweep(scores, labels)
    pos, neg = tps[-1], fps[-1]
    tpr = np.concatenate(([0.0], tps / pos))
    fpr = np.concatenate(([0.0], fps / neg))
    auc = float(_trapezoid(tpr, fpr))

    j = tps / pos - fps / neg
    best = int(np.argmax(j))  # argmax takes the first = highest threshold on ties
    best_threshold = float(thresholds[best])
    predicted = scores >= best_threshold
    acc = float(np.mean(predicted == labels.astype(bool)))

    precision = tps / (tps + fps)
    recall = tps / pos
    ap = float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision))
    return RocResult(auc=auc, best_threshold=best_threshold, acc_at_cutoff=acc, ap=ap)


def _binary_average_precision(scores, labels) -> float:
    order = np.argsort(-scores, kind="stable")
    l = labels[order]
    s = scores[order]
    tps = np.cumsum(l)
    fps = np.cumsum(1 - l)
    last_of_tie = np.nonzero(np.append(np.diff(s) != 0, True))[0]
    tps, fps = tps[last_of_tie], fps[last_of_tie]
    precision = tps / (tps + fps)
    recall = tps / tps[-1]
    return float(np.sum(np.diff(np.concatenate(([0.0], recall))) * precision))


def classification_metrics(probs, labels) -> dict[str, float]:
    """Accuracy, macro one-vs-rest average precision and macro recall.

    Accuracy uses argmax with ties going to the lowest class index.  Macro
    averages are unweighted over the classes present in ``labels``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).ravel().astype(np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ValueError("probs must be (N, O) aligned with labels")
    if probs.shape[0] == 0:
        raise ValueError("empty input")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probability rows must sum to 1")
    n_classes = probs.shape[1]
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("label out of range")

    predicted = probs.argmax(axis=1)
    accuracy = float(np.mean(predicted == labels))

    aps, recalls = [], []
    for k in range(n_classes):
        mask = labels == k
        if not mask.any():
            continue  # no instances: recall/AP undefined for this class
        aps.append(_binary_average_precision(probs[:, k], mask.astype(np.int64)))
        recalls.append(float(np.mean(predicted[mask] == k)))
    return {
        "accuracy": accuracy,
        "macro_ap": float(np.mean(aps)),
        "macro_ar": float(np.mean(recalls)),
    }


def predictive_entropy(mean_probs) -> float:
    """Shannon entropy of a probability vector in nats, with 0*ln(0) = 0."""
    p = np.asarray(mean_probs, dtype=np.float64).ravel()
    if abs(float(p.sum()) - 1.0) > 1e-6 or np.any(p < 0):
        raise ValueError("probabilities must be nonnegative and sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def sample_variance(samples: np.ndarray) -> np.ndarray:
    """Unbiased variance across the leading axis; exactly 0.0 wherever the
    samples are bitwise identical (and for a single sample)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    var = samples.var(axis=0, ddof=1)
    identical = np.all(samples == samples[:1], axis=0)
    return np.where(identical, 0.0, var)


@dataclass(frozen=True)
class UncertaintyParts:
    epistemic: np.ndarray
    aleatoric: float
    total: np.ndarray
    single_sample: bool


def uncertainty_decompose(sample_outputs, aleatoric_var) -> UncertaintyParts:
    """Split predictive uncertainty into parts.

    Epistemic = unbiased variance across the MC samples (0 when only one
    sample exists, flagged); total is epistemic + aleatoric by construction,
    nothing else enters the sum.
    """
    samples = np.asarray(sample_outputs, dtype=np.float64)
    if samples.shape[0] < 1:
        raise ValueError("need at least one sample")
    epistemic = sample_variance(samples)
    return UncertaintyParts(
        epistemic=epistemic,
        aleatoric=float(aleatoric_var),
        total=epistemic + aleatoric_var,
        single_sample=samples.shape[0] == 1,
    )


def uncertainty_band(mean, total_var) -> tuple[np.ndarray, np.ndarray]:
    """The plotted +-3 standard deviation band around the predictive mean."""
    sd = np.sqrt(np.asarray(total_var, dtype=np.float64))
    mean = np.asarray(mean, dtype=np.float64)
    return mean - 3.0 * sd, mean + 3.0 * sd
