"""Dataset loading, weight-file serialization and the evaluation pipelines.

Weight file layout (version 1)
------------------------------
A UTF-8 text header terminated by one blank line, then a little-endian binary
payload, then a 4-byte little-endian CRC32 of the payload:

    MCDLSTM-WEIGHTS v1
    task=autoencoder
    H=16
    NL=2
    B=YNYN
    I=1
    O=1
    T=140
    act_bits=16
    act_frac=10
    acc_bits=32
    acc_frac=20
    dropout_p=0.125
    aleatoric_var=0.01
    scale_folded=1
    <blank line>

Payload: for each LSTM layer in network order, the W_x block, then W_h, then
the bias block, each holding its four gate arrays in gate order i, f, g, o as
int16 raw values, row-major.  The dense weight matrix (O x H_last) and dense
bias (O) follow.  Block sizes derive from the header, so a size mismatch is a
shape-chain violation.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .engine import Arch, NetworkParams, LstmLayerParams, layer_dims, mc_predict_many
from .fxp import QFormat
from .mcrng import GATE_ORDER

__all__ = [
    "Dataset",
    "WeightFormatError",
    "TaskMismatchError",
    "load_ucr",
    "z_normalize",
    "append_anomalous_train",
    "save_weights",
    "load_weights",
    "anomaly_pipeline",
    "classify_pipeline",
    "entropy_probe",
]

_MAGIC = "MCDLSTM-WEIGHTS"
_VERSION = 1


class WeightFormatError(ValueError):
    """Corrupt, truncated or incompatible weight file."""


class TaskMismatchError(ValueError):
    """Weights trained for one task handed to the other pipeline."""


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Labeled time-series rows: ``samples`` (N, T) and integer ``labels`` (N,)."""

    samples: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    split: str = "test"
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.samples.ndim != 2 or self.samples.shape[0] != self.labels.shape[0]:
            raise ValueError("samples must be (N, T) aligned with labels")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def seq_len(self) -> int:
        return self.samples.shape[1]


def z_normalize(sample: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance scaling of one sequence (population variance)."""
    sample = np.asarray(sample, dtype=np.float64)
    std = float(sample.std())
    if std == 0.0:
        raise ValueError("cannot normalize a constant sample")
    return (sample - sample.mean()) / std


def load_ucr(path: str | Path, split: str = "test", normalize: bool = True) -> Dataset:
    """Parse a UCR-style file: rows of ``label, v1, ..., vT``.

    Fields may be comma- or whitespace-separated.  Labels are remapped to
    contiguous 0-based integers in sorted order of the original values, and
    each sample is z-normalized unless ``normalize`` is False.
    """
    rows: list[list[float]] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip().replace(",", " ")
        if not text:
            continue
        try:
            rows.append([float(tok) for tok in text.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2:
        raise ValueError(f"{path}: rows need a label and at least one value")
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(
                f"{path}: ragged row {lineno} has {len(row)} fields, expected {width}"
            )
    data = np.asarray(rows, dtype=np.float64)
    raw_labels = data[:, 0]
    int_labels = raw_labels.astype(np.int64)
    if np.any(int_labels != raw_labels):
        raise ValueError(f"{path}: labels must be integers")
    remap = {orig: k for k, orig in enumerate(sorted(set(int_labels.tolist())))}
    labels = np.asarray([remap[v] for v in int_labels.tolist()], dtype=np.int64)
    samples = data[:, 1:]
    if normalize:
        samples = np.stack([z_normalize(row) for row in samples])
    return Dataset(samples=samples, labels=labels, split=split, normalized=normalize)


def append_anomalous_train(train: Dataset, test: Dataset, normal_label: int = 0) -> Dataset:
    """Evaluation split for anomaly detection: the test rows followed by the
    anomalous rows of the training split (train rows last)."""
    if train.seq_len != test.seq_len:
        raise ValueError("splits disagree on sequence length")
    extra = train.labels != normal_label
    return Dataset(
        samples=np.concatenate([test.samples, train.samples[extra]]),
        labels=np.concatenate([test.labels, train.labels[extra]]),
        split="test+anomalous-train",
        normalized=train.normalized and test.normalized,
    )


# ---------------------------------------------------------------------------
# Weight files
# ---------------------------------------------------------------------------


def _layer_block_arrays(layer: LstmLayerParams):
    for group in (layer.w_x, layer.w_h, layer.b):
        for g in GATE_ORDER:
            yield group[g]


def save_weights(net: NetworkParams, path: str | Path) -> None:
    """Serialize a network; ``load_weights`` restores it bit for bit."""
    if net.act_fmt.total_bits != 16:
        raise WeightFormatError("the payload stores 16-bit weights")
    header = [
        f"{_MAGIC} v{_VERSION}",
        f"task={net.task}",
        f"H={net.arch.hidden}",
        f"NL={net.arch.num_layers}",
        f"B={net.arch.bayes}",
        f"I={net.input_dim}",
        f"O={net.output_dim}",
        f"T={net.seq_len}",
        f"act_bits={net.act_fmt.total_bits}",
        f"act_frac={net.act_fmt.frac_bits}",
        f"acc_bits={net.acc_fmt.total_bits}",
        f"acc_frac={net.acc_fmt.frac_bits}",
        f"dropout_p={net.dropout_p!r}",
        f"aleatoric_var={net.aleatoric_var!r}",
        f"scale_folded={int(net.scale_folded)}",
        "",
        "",
    ]
    chunks = []
    for layer in net.layers:
        for arr in _layer_block_arrays(layer):
            chunks.append(arr.astype("<i2").tobytes())
    chunks.append(net.dense_w.astype("<i2").tobytes())
    chunks.append(net.dense_b.astype("<i2").tobytes())
    payload = b"".join(chunks)
    blob = "\n".join(header).encode() + payload + struct.pack("<I", zlib.crc32(payload))
    Path(path).write_bytes(blob)


def _parse_header(blob: bytes, path) -> tuple[dict[str, str], int]:
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise WeightFormatError(f"{path}: missing header terminator")
    lines = blob[:sep].decode(errors="replace").splitlines()
    if not lines or not lines[0].startswith(_MAGIC):
        raise WeightFormatError(f"{path}: not a weight file")
    version = lines[0].removeprefix(_MAGIC).strip()
    if version != f"v{_VERSION}":
        raise WeightFormatError(f"{path}: unknown format version {version!r}")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields, sep + 2


def load_weights(path: str | Path) -> NetworkParams:
    """Load and validate a weight file into an immutable network."""
    blob = Path(path).read_bytes()
    fields, offset = _parse_header(blob, path)
    try:
        task = fields["task"]
        arch = Arch(int(fields["H"]), int(fields["NL"]), fields["B"])
        input_dim, output_dim = int(fields["I"]), int(fields["O"])
        seq_len = int(fields["T"])
        act_fmt = QFormat(int(fields["act_bits"]), int(fields["act_frac"]))
        acc_fmt = QFormat(int(fields["acc_bits"]), int(fields["acc_frac"]))
        dropout_p = float(fields["dropout_p"])
        aleatoric_var = float(fields["aleatoric_var"])
        scale_folded = bool(int(fields["scale_folded"]))
    except KeyError as exc:
        raise WeightFormatError(f"{path}: header misses field {exc}") from None

    try:
        dims = layer_dims(task, arch, input_dim)
    except ValueError as exc:
        raise WeightFormatError(f"{path}: {exc}") from None
    if len(arch.bayes) != len(dims):
        raise WeightFormatError(
            f"{path}: B string {arch.bayes!r} does not cover {len(dims)} layers"
        )

    if len(blob) < offset + 4:
        raise WeightFormatError(f"{path}: truncated file")
    payload, (crc_stored,) = blob[offset:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) != crc_stored:
        raise WeightFormatError(f"{path}: checksum mismatch")

    expected = sum(4 * (i * h + h * h + h) for i, h in dims) + output_dim * (dims[-1][1] + 1)
    if len(payload) != 2 * expected:
        raise WeightFormatError(
            f"{path}: payload holds {len(payload) // 2} values, "
            f"shape chain requires {expected}"
        )

    values = np.frombuffer(payload, dtype="<i2").astype(np.int64)
    cursor = 0

    def take(shape):
        nonlocal cursor
        size = int(np.prod(shape))
        out = values[cursor : cursor + size].reshape(shape)
        cursor += size
        return out

    layers = []
    for (i_dim, h_dim), flag in zip(dims, arch.bayes):
        w_x = {g: take((h_dim, i_dim)) for g in GATE_ORDER}
        w_h = {g: take((h_dim, h_dim)) for g in GATE_ORDER}
        b = {g: take((h_dim,)) for g in GATE_ORDER}
        layers.append(
            LstmLayerParams(w_x, w_h, b, is_bayesian=flag == "Y", act_fmt=act_fmt, acc_fmt=acc_fmt)
        )
    dense_w = take((output_dim, dims[-1][1]))
    dense_b = take((output_dim,))
    try:
        return NetworkParams(
            task=task,
            arch=arch,
            layers=tuple(layers),
            dense_w=dense_w,
            dense_b=dense_b,
            seq_len=seq_len,
            input_dim=input_dim,
            output_dim=output_dim,
            act_fmt=act_fmt,
            acc_fmt=acc_fmt,
            aleatoric_var=aleatoric_var,
            dropout_p=dropout_p,
            scale_folded=scale_folded,
        )
    except ValueError as exc:
        raise WeightFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Evaluation pipelines
# ---------------------------------------------------------------------------


def _check_dataset(net: NetworkParams, dataset: Dataset) -> None:
    if dataset.seq_len != net.seq_len:
        raise ValueError(
            f"dataset sequences have T={dataset.seq_len}, network expects {net.seq_len}"
        )


def _score_rows(net, dataset, samples, seed, arithmetic):
    """Reconstruction score and mean epistemic variance per row; row j uses
    the stream seeded with seed XOR j, reduced in row order."""
    preds = mc_predict_many(net, dataset.samples, samples, seed, arithmetic)
    recon = np.stack([p.mean for p in preds])
    scores = metrics.reconstruction_scores(dataset.samples[:, :, None], recon)
    epi = np.asarray([float(p.epistemic_var.mean()) for p in preds])
    return scores, epi


def anomaly_pipeline(
    net: NetworkParams,
    dataset: Dataset,
    samples: int = 30,
    seed: int = 42,
    threshold_source: str = "roc",
    train_normal: Dataset | None = None,
    normal_label: int = 0,
    quantile: float = 0.95,
    arithmetic: str = "fixed",
) -> dict:
    """Score every row by reconstruction RMSE and evaluate anomaly detection.

    ``threshold_source`` of "roc" takes the Youden-optimal cutoff from the
    evaluated data; "train-normal" derives it as a quantile of the scores the
    model produces on held-out normal training rows.
    """
    if net.task != "autoencoder":
        raise TaskMismatchError(f"anomaly detection needs autoencoder weights, got {net.task}")
    if threshold_source not in ("roc", "train-normal"):
        raise ValueError(f"unknown threshold source {threshold_source!r}")
    if threshold_source == "train-normal" and train_normal is None:
        raise ValueError("train-normal thresholding needs the training split")
    _check_dataset(net, dataset)

    scores, epi = _score_rows(net, dataset, samples, seed, arithmetic)
    y = (dataset.labels != normal_label).astype(np.int64)
    roc = metrics.roc_analysis(scores, y)
    if threshold_source == "roc":
        threshold, accuracy = roc.best_threshold, roc.acc_at_cutoff
    else:
        normal_rows = train_normal.samples[train_normal.labels == normal_label]
        ref = Dataset(normal_rows, np.zeros(len(normal_rows), dtype=np.int64), "train", True)
        ref_scores, _ = _score_rows(net, ref, samples, seed, arithmetic)
        threshold = float(np.quantile(ref_scores, quantile))
        accuracy = float(np.mean((scores >= threshold) == (y == 1)))
    return {
        "task": "anomaly-detection",
        "n": dataset.n,
        "samples": samples,
        "seed": seed,
        "arithmetic": arithmetic,
        "auc": roc.auc,
        "ap": roc.ap,
        "accuracy": accuracy,
        "threshold": threshold,
        "threshold_source": threshold_source,
        "mean_epistemic_var": float(epi.mean()),
        "mean_score_normal": float(scores[y == 0].mean()),
        "mean_score_anomalous": float(scores[y == 1].mean()),
    }


def classify_pipeline(
    net: NetworkParams,
    dataset: Dataset,
    samples: int = 30,
    seed: int = 42,
    probe: bool = False,
    probe_sequences: int = 500,
    arithmetic: str = "fixed",
) -> dict:
    """Per-row MC prediction, classification metrics and the optional
    Gaussian-noise entropy probe."""
    if net.task != "classifier":
        raise TaskMismatchError(f"classification needs classifier weights, got {net.task}")
    _check_dataset(net, dataset)

    preds = mc_predict_many(net, dataset.samples, samples, seed, arithmetic)
    probs = np.stack([p.class_probs for p in preds])
    entropies = np.asarray([p.entropy for p in preds])
    scores = metrics.classification_metrics(probs, dataset.labels)
    report = {
        "task": "classification",
        "n": dataset.n,
        "samples": samples,
        "seed": seed,
        "arithmetic": arithmetic,
        "accuracy": scores["accuracy"],
        "macro_ap": scores["macro_ap"],
        "macro_ar": scores["macro_ar"],
        "mean_entropy": float(entropies.mean()),
    }
    if probe:
        report["noise_entropy"] = entropy_probe(
            net, samples=samples, seed=seed, sequences=probe_sequences, arithmetic=arithmetic
        )
    return report


def entropy_probe(
    net: NetworkParams,
    samples: int = 30,
    seed: int = 42,
    sequences: int = 500,
    arithmetic: str = "fixed",
) -> float:
    """Mean predictive entropy on unit-variance Gaussian noise sequences."""
    if net.task != "classifier":
        raise TaskMismatchError("the entropy probe needs a classifier")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((sequences, net.seq_len, net.input_dim))
    preds = mc_predict_many(net, noise, samples, seed, arithmetic)
    return float(np.mean([p.entropy for p in preds]))
