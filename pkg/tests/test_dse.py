import random

import pytest

from mcdlstm import dse
from mcdlstm.dse import (
    InfeasibleDesign,
    LookupEntry,
    NoFeasibleArchitecture,
    OptimizationRequest,
    load_lookup_table,
    optimize,
    save_lookup_table,
    search_reuse_factors,
    select_architecture,
)
from mcdlstm.engine import Arch
from mcdlstm.hwmodel import HwConfig, dsp_budget, dsp_design, ii_estimate
from mcdlstm.engine import layer_dims


def req(mode, task=None, dsp_total=900, **kw):
    return OptimizationRequest(mode=mode, dsp_total=dsp_total, task=task, **kw)


# ---------------------------------------------------------------------------
# Golden selections on the transcribed benchmark tables
# ---------------------------------------------------------------------------


def test_anomaly_metric_modes_pick_the_bayesian_model(anomaly_table):
    for mode in ("Opt-Accuracy", "Opt-Precision", "Opt-AUC"):
        picked = select_architecture(req(mode), anomaly_table)
        assert (picked.arch.hidden, picked.arch.num_layers, picked.arch.bayes) == (16, 2, "YNYN")


def test_anomaly_latency_mode_picks_smallest(anomaly_table):
    picked = select_architecture(req("Opt-Latency"), anomaly_table)
    assert (picked.arch.hidden, picked.arch.num_layers, picked.arch.bayes) == (8, 1, "NN")
    assert picked.samples == 1


def test_classification_golden_selections(classification_table):
    expect = {
        "Opt-Latency": (8, 1, "N"),
        "Opt-Accuracy": (8, 3, "NYN"),
        "Opt-Precision": (8, 3, "YNY"),
        "Opt-Recall": (8, 2, "YN"),
        "Opt-Entropy": (8, 3, "YNN"),
    }
    for mode, (h, nl, b) in expect.items():
        picked = select_architecture(req(mode), classification_table)
        assert (picked.arch.hidden, picked.arch.num_layers, picked.arch.bayes) == (h, nl, b)


def test_entropy_mode_reports_expected_value(classification_table):
    picked = select_architecture(req("Opt-Entropy"), classification_table)
    assert picked.metrics["entropy"] == pytest.approx(0.60)


def test_latency_mode_uses_single_sample_entry(classification_table):
    picked = select_architecture(req("Opt-Latency"), classification_table)
    assert picked.samples == 1


# ---------------------------------------------------------------------------
# Filtering and tie-breaking
# ---------------------------------------------------------------------------


def test_min_requirements_filter_soundness(classification_table):
    picked = select_architecture(
        req("Opt-Entropy", min_requirements={"accuracy": 0.92}), classification_table
    )
    # entropy champion (0.89 accuracy) is filtered; survivor maximizes entropy
    assert picked.metrics["accuracy"] >= 0.92
    survivors = [e for e in classification_table if e.metrics["accuracy"] >= 0.92]
    assert picked.metrics["entropy"] == max(e.metrics["entropy"] for e in survivors)


def test_unreachable_requirement_raises(anomaly_table):
    with pytest.raises(NoFeasibleArchitecture):
        select_architecture(req("Opt-Accuracy", min_requirements={"accuracy": 0.99}), anomaly_table)


def test_mode_consistency_invariant(classification_table):
    for mode, metric in (("Opt-Accuracy", "accuracy"), ("Opt-Recall", "ar"), ("Opt-Entropy", "entropy")):
        picked = select_architecture(req(mode), classification_table)
        best = max(e.metrics[metric] for e in classification_table)
        assert picked.metrics[metric] == best


def test_selection_is_order_independent(classification_table):
    baseline = select_architecture(req("Opt-Recall"), classification_table)
    for seed in range(5):
        shuffled = list(classification_table)
        random.Random(seed).shuffle(shuffled)
        again = select_architecture(req("Opt-Recall"), shuffled)
        assert again.arch == baseline.arch


def test_recall_tie_breaks_on_modeled_latency(classification_table):
    # два entries share AR=0.67; the (8,2,YN) design reaches II=1 under the
    # 900-DSP budget while (8,3,NYN) needs II=2, so latency decides
    picked = select_architecture(req("Opt-Recall"), classification_table)
    assert picked.arch == Arch(8, 2, "YN")


def test_mode_task_validity():
    with pytest.raises(ValueError):
        OptimizationRequest(mode="Opt-AUC", dsp_total=900, task="classifier")
    with pytest.raises(ValueError):
        OptimizationRequest(mode="Opt-Recall", dsp_total=900, task="autoencoder")
    with pytest.raises(ValueError):
        OptimizationRequest(mode="Opt-Everything", dsp_total=900)
    with pytest.raises(ValueError):
        OptimizationRequest(mode="Opt-Accuracy", dsp_total=900, min_requirements={"f1": 0.5})


def test_mixed_table_requires_explicit_task(anomaly_table, classification_table):
    mixed = anomaly_table + classification_table
    with pytest.raises(ValueError):
        select_architecture(req("Opt-Accuracy"), mixed)
    picked = select_architecture(req("Opt-Accuracy", task="classifier"), mixed)
    assert picked.task == "classifier"


# ---------------------------------------------------------------------------
# Reuse-factor search
# ---------------------------------------------------------------------------


def test_search_returns_unconstrained_optimum_when_everything_fits():
    hw = search_reuse_factors(Arch(2, 1, "N"), "classifier", 4, dsp_total=10000)
    assert (hw.r_x, hw.r_h) == (1, 1)
    assert hw.r_d == 1


def test_search_autoencoder_couples_dense_reuse():
    hw = search_reuse_factors(Arch(8, 1, "NN"), "autoencoder", 140, dsp_total=900)
    assert hw.r_d == hw.r_x


def test_search_below_tail_floor_is_infeasible():
    # the 4*H tail has no reuse factor: sum over layers bounds any design
    arch = Arch(8, 1, "NN")
    tail = sum(4 * h for _, h in layer_dims("autoencoder", arch, 1))
    with pytest.raises(InfeasibleDesign) as exc:
        search_reuse_factors(arch, "autoencoder", 140, dsp_total=tail // 2)
    assert exc.value.min_dsp > tail


def test_search_minimizes_ii_then_dsp():
    arch = Arch(16, 2, "YNYN")
    hw = search_reuse_factors(arch, "autoencoder", 140, dsp_total=900)
    ii, _ = ii_estimate(layer_dims("autoencoder", arch, 1), hw)
    usage = dsp_design(arch, "autoencoder", 140, hw)
    assert usage.feasible
    # no feasible configuration achieves a lower II (exhaustive re-check)
    for r in range(1, ii):
        probe = HwConfig(r_x=r, r_h=r, r_d=r, dsp_total=900)
        assert not dsp_design(arch, "autoencoder", 140, probe).feasible


def test_search_is_deterministic():
    a = search_reuse_factors(Arch(8, 3, "YNY"), "classifier", 140, dsp_total=900)
    b = search_reuse_factors(Arch(8, 3, "YNY"), "classifier", 140, dsp_total=900)
    assert (a.r_x, a.r_h, a.r_d) == (b.r_x, b.r_h, b.r_d)


def test_published_reuse_point_fits_with_headroom():
    # At a 2000-DSP budget the published (R_x=16, R_h=5) operating point for
    # the H=16 autoencoder is inside the feasible set.
    hw = HwConfig(r_x=16, r_h=5, r_d=16, dsp_total=2000)
    assert dsp_design(Arch(16, 2, "YNYN"), "autoencoder", 140, hw).feasible


# ---------------------------------------------------------------------------
# optimize end-to-end
# ---------------------------------------------------------------------------


def test_optimize_end_to_end_anomaly(anomaly_table):
    cfg = optimize(req("Opt-Accuracy"), anomaly_table)
    assert cfg.arch == Arch(16, 2, "YNYN")
    assert cfg.predicted.feasible
    assert cfg.predicted.dsp_design <= dsp_budget(900)
    assert cfg.prediction_latency_cycles > cfg.predicted.latency_cycles  # S=30 > 1 pass


def test_optimize_deterministic(classification_table):
    a = optimize(req("Opt-Precision"), classification_table)
    b = optimize(req("Opt-Precision"), classification_table)
    assert a.arch == b.arch and a.hw == b.hw
    assert a.prediction_latency_cycles == b.prediction_latency_cycles


def test_optimize_propagates_no_candidate(anomaly_table):
    with pytest.raises(NoFeasibleArchitecture):
        optimize(req("Opt-AUC", min_requirements={"auc": 0.999}), anomaly_table)


def test_format_report_contains_key_value_block(anomaly_table):
    cfg = optimize(req("Opt-AUC"), anomaly_table)
    text = dse.format_report(cfg, req("Opt-AUC"))
    assert "[selection]" in text
    assert "H=16" in text and "B=YNYN" in text
    assert "metric_auc=0.99" in text


# ---------------------------------------------------------------------------
# lookup table I/O
# ---------------------------------------------------------------------------


def test_lookup_roundtrip(tmp_path, classification_table):
    path = tmp_path / "table.csv"
    save_lookup_table(classification_table, path)
    again = load_lookup_table(path)
    assert [e.arch for e in again] == [e.arch for e in classification_table]
    assert [e.metrics for e in again] == [e.metrics for e in classification_table]
    assert all(e.source == "benchmark-suite" for e in again)


def test_lookup_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("H,NL,B,S,task\n8,1,N,1,classifier\n")
    with pytest.raises(ValueError):
        load_lookup_table(path)


def test_lookup_rejects_unknown_metric(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("task,H,NL,B,S,f1\nclassifier,8,1,N,1,0.5\n")
    with pytest.raises(ValueError):
        load_lookup_table(path)


def test_entry_rejects_nonfinite_metric():
    with pytest.raises(ValueError):
        LookupEntry("classifier", Arch(8, 1, "N"), 1, {"accuracy": float("inf")})
