import numpy as np
import pytest

from mcdlstm import metrics
from mcdlstm.metrics import (
    classification_metrics,
    predictive_entropy,
    reconstruction_scores,
    regression_metrics,
    roc_analysis,
    uncertainty_band,
    uncertainty_decompose,
)


# ---------------------------------------------------------------------------
# regression metrics
# ---------------------------------------------------------------------------


def test_regression_perfect_fit_unit_variance():
    y = np.linspace(-1, 1, 20)
    out = regression_metrics(y, 1.0, y)
    assert out["rmse"] == 0.0
    assert out["l1"] == 0.0
    assert out["nll"] == pytest.approx(0.5 * np.log(2 * np.pi))


def test_regression_constant_offset():
    y = np.zeros(10)
    out = regression_metrics(y + 1.0, 1.0, y)
    assert out["rmse"] == pytest.approx(1.0)
    assert out["l1"] == pytest.approx(1.0)


def test_regression_matches_per_point_summation_oracle():
    rng = np.random.default_rng(3)
    mu = rng.standard_normal(10)
    y = rng.standard_normal(10)
    var = rng.uniform(0.5, 2.0, 10)
    out = regression_metrics(mu, var, y)
    # independent elementwise re-summation
    sq = [(m - t) ** 2 for m, t in zip(mu, y)]
    nll = [
        0.5 * (np.log(2 * np.pi * v) + (m - t) ** 2 / v) for m, t, v in zip(mu, y, var)
    ]
    assert out["rmse"] == pytest.approx(np.sqrt(sum(sq) / 10))
    assert out["l1"] == pytest.approx(sum(abs(m - t) for m, t in zip(mu, y)) / 10)
    assert out["nll"] == pytest.approx(sum(nll) / 10)


def test_regression_rejects_nonpositive_variance():
    with pytest.raises(ValueError):
        regression_metrics(np.zeros(3), 0.0, np.zeros(3))


# ---------------------------------------------------------------------------
# ROC analysis
# ---------------------------------------------------------------------------


def auc_pairwise_oracle(scores, labels):
    """Mann-Whitney statistic: fraction of correctly ordered (pos, neg) pairs."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_roc_perfect_separation():
    res = roc_analysis([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])
    assert res.auc == 1.0
    assert res.acc_at_cutoff == 1.0
    assert res.ap == 1.0


def test_roc_partial_ordering():
    res = roc_analysis([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0])
    assert res.auc == pytest.approx(0.75)  # 3 of 4 pairs ordered correctly


def test_roc_label_inversion_reflects_auc():
    scores = [0.9, 0.4, 0.6, 0.2]
    a = roc_analysis(scores, [1, 1, 0, 0]).auc
    b = roc_analysis(scores, [0, 0, 1, 1]).auc
    assert a + b == pytest.approx(1.0)


def test_auc_matches_pairwise_oracle_without_ties():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(4, 60))
        scores = rng.permutation(np.linspace(0, 1, n) + 1e-3)
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        got = roc_analysis(scores, labels).auc
        assert got == pytest.approx(auc_pairwise_oracle(scores, labels), abs=1e-12)


def test_auc_invariant_under_monotone_transform():
    rng = np.random.default_rng(9)
    scores = rng.uniform(0.1, 2.0, 30)
    labels = rng.integers(0, 2, 30)
    labels[0], labels[1] = 0, 1
    base = roc_analysis(scores, labels)
    for transform in (np.log, np.sqrt, lambda s: 3 * s + 2):
        res = roc_analysis(transform(scores), labels)
        assert res.auc == pytest.approx(base.auc, abs=1e-12)
        # the induced classification at the optimal threshold is unchanged
        assert res.acc_at_cutoff == pytest.approx(base.acc_at_cutoff, abs=1e-12)


def test_youden_tie_takes_higher_threshold():
    # J peaks at both 0.8 and 0.6 (J = 0.5); the higher cutoff wins
    scores = [0.8, 0.6, 0.4, 0.2]
    labels = [1, 1, 0, 1]
    res = roc_analysis(scores, labels)
    j_at = {}
    for thr in scores:
        pred = np.asarray(scores) >= thr
        y = np.asarray(labels) == 1
        tpr = (pred & y).sum() / y.sum()
        fpr = (pred & ~y).sum() / (~y).sum()
        j_at[thr] = tpr - fpr
    best = max(j_at.values())
    assert j_at[res.best_threshold] == pytest.approx(best)
    assert res.best_threshold == max(t for t, j in j_at.items() if j == best)


def test_ap_step_interpolation_hand_case():
    # descending sweep: precisions 1, 1/2, 2/3 at recalls 1/2, 1/2, 1
    res = roc_analysis([0.9, 0.7, 0.5], [1, 0, 1])
    assert res.ap == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3))


def test_roc_rejects_single_class():
    with pytest.raises(ValueError):
        roc_analysis([0.1, 0.2], [1, 1])


def test_reconstruction_scores_are_per_sample_rmse():
    x = np.zeros((2, 4, 1))
    r = np.stack([np.full((4, 1), 0.5), np.full((4, 1), 2.0)])
    got = reconstruction_scores(x, r)
    assert got == pytest.approx([0.5, 2.0])


# ---------------------------------------------------------------------------
# classification metrics
# ---------------------------------------------------------------------------


def one_hot(labels, n):
    eye = np.eye(n)
    return eye[labels]


def test_classification_perfect_predictions():
    labels = np.array([0, 1, 2, 3, 1, 2])
    out = classification_metrics(one_hot(labels, 4), labels)
    assert out == {"accuracy": 1.0, "macro_ap": 1.0, "macro_ar": 1.0}


def test_classification_constant_prediction_on_balanced_data():
    labels = np.array([0, 1, 2, 3] * 3)
    probs = np.tile([0.97, 0.01, 0.01, 0.01], (12, 1))
    out = classification_metrics(probs, labels)
    assert out["accuracy"] == pytest.approx(0.25)
    assert out["macro_ar"] == pytest.approx(0.25)


def test_classification_hand_built_case_against_confusion_oracle():
    rng = np.random.default_rng(12)
    labels = np.array([0, 0, 0, 1, 1, 2, 2, 2, 3, 3, 1, 0])
    logits = rng.uniform(0, 1, (12, 4)) + one_hot(labels, 4) * rng.uniform(0, 2, (12, 1))
    probs = logits / logits.sum(axis=1, keepdims=True)
    out = classification_metrics(probs, labels)

    predicted = probs.argmax(axis=1)
    # brute-force per-class tabulation
    accuracy = np.mean(predicted == labels)
    recalls, aps = [], []
    for k in range(4):
        inst = labels == k
        recalls.append(np.mean(predicted[inst] == k))
        order = np.argsort(-probs[:, k], kind="stable")
        rel = inst[order]
        hits, total, ap_terms = 0, int(inst.sum()), []
        seen_scores = probs[:, k][order]
        tp = np.cumsum(rel)
        fp = np.cumsum(~rel)
        keep = np.append(np.diff(seen_scores) != 0, True)
        precision = tp[keep] / (tp[keep] + fp[keep])
        recall = tp[keep] / total
        ap = np.sum(np.diff(np.concatenate([[0.0], recall])) * precision)
        aps.append(ap)
    assert out["accuracy"] == pytest.approx(accuracy)
    assert out["macro_ar"] == pytest.approx(np.mean(recalls))
    assert out["macro_ap"] == pytest.approx(np.mean(aps))


def test_classification_argmax_tie_goes_to_lowest_index():
    probs = np.array([[0.25, 0.25, 0.25, 0.25]])
    assert classification_metrics(probs, np.array([0]))["accuracy"] == 1.0
    assert classification_metrics(probs, np.array([1]))["accuracy"] == 0.0


def test_classification_validation():
    with pytest.raises(ValueError):
        classification_metrics(np.empty((0, 4)), np.empty(0, dtype=int))
    with pytest.raises(ValueError):
        classification_metrics(np.array([[0.7, 0.1, 0.1, 0.0]]), np.array([0]))
    with pytest.raises(ValueError):
        classification_metrics(np.array([[0.25, 0.25, 0.25, 0.25]]), np.array([4]))


# ---------------------------------------------------------------------------
# entropy and uncertainty
# ---------------------------------------------------------------------------


def test_entropy_cases():
    assert predictive_entropy([1.0, 0.0, 0.0, 0.0]) == 0.0
    assert predictive_entropy([0.25] * 4) == pytest.approx(np.log(4))
    assert predictive_entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(np.log(2))


def test_entropy_bounds_random_vectors():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 10))
        p = rng.dirichlet(np.ones(n))
        h = predictive_entropy(p)
        assert 0.0 <= h <= np.log(n) + 1e-12


def test_entropy_rejects_bad_vectors():
    with pytest.raises(ValueError):
        predictive_entropy([0.5, 0.6])


def test_uncertainty_identical_samples():
    parts = uncertainty_decompose(np.ones((5, 3)), aleatoric_var=0.7)
    assert np.all(parts.epistemic == 0.0)
    assert np.all(parts.total == 0.7)


def test_uncertainty_two_point_case():
    parts = uncertainty_decompose(np.array([[0.0], [2.0]]), aleatoric_var=1.0)
    assert parts.epistemic[0] == pytest.approx(2.0)  # unbiased variance of {0, 2}
    assert parts.total[0] == pytest.approx(3.0)


def test_uncertainty_single_sample_flagged():
    parts = uncertainty_decompose(np.array([[1.5, 2.5]]), aleatoric_var=0.2)
    assert parts.single_sample
    assert np.all(parts.epistemic == 0.0)


def test_uncertainty_decomposition_identity():
    # total is the two-term sum and nothing else: bit-exact by construction
    rng = np.random.default_rng(4)
    samples = rng.standard_normal((7, 11))
    parts = uncertainty_decompose(samples, aleatoric_var=0.31)
    assert parts.aleatoric == 0.31
    assert np.array_equal(parts.total, parts.epistemic + parts.aleatoric)


def test_uncertainty_band_is_three_sigma():
    lo, hi = uncertainty_band(np.zeros(4), np.full(4, 4.0))
    assert np.allclose(lo, -6.0)
    assert np.allclose(hi, 6.0)
