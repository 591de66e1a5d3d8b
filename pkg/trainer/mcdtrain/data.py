"""UCR-format dataset handling and a synthetic ECG-like corpus generator.

The loader mirrors the accelerator package's conventions (labels remapped to
sorted 0-based integers, per-sample z-normalization with population variance)
so both sides read the same files identically; it is implemented here
independently because the trainer talks to the accelerator only through files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def z_normalize(rows: np.ndarray) -> np.ndarray:
    std = rows.std(axis=1, keepdims=True)
    if np.any(std == 0):
        raise ValueError("cannot normalize a constant sample")
    return (rows - rows.mean(axis=1, keepdims=True)) / std


def load_ucr(path: str | Path, normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``label, v1..vT`` rows; returns (samples (N, T), labels (N,))."""
    rows = []
    for line in Path(path).read_text().splitlines():
        text = line.strip().replace(",", " ")
        if text:
            rows.append([float(tok) for tok in text.split()])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    data = np.asarray(rows)
    remap = {v: k for k, v in enumerate(sorted(set(int(r[0]) for r in rows)))}
    labels = np.asarray([remap[int(r[0])] for r in rows], dtype=np.int64)
    samples = data[:, 1:]
    if normalize:
        samples = z_normalize(samples)
    return samples, labels


def save_ucr(path: str | Path, samples: np.ndarray, labels: np.ndarray) -> None:
    lines = [
        ",".join([str(int(l))] + [f"{v:.6f}" for v in row]) for row, l in zip(samples, labels)
    ]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Synthetic heartbeat corpus: one normal morphology and three anomalies.
# Beats are time-aligned (as segmented single-beat archives are), so the
# waveform varies in amplitude but not timing; a recurrent autoencoder can
# learn the template and anomalies differ strongly in shape.
# ---------------------------------------------------------------------------


def _bump(t, center, width, amp):
    return amp * np.exp(-0.5 * ((t - center) / width) ** 2)


def _beat(rng, kind: int, seq_len: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, seq_len)
    jitter = lambda s: float(rng.normal(0, s))
    beat = (
        _bump(t, 0.18, 0.060, 0.50 + jitter(0.06))
        + _bump(t, 0.42, 0.045, 1.40 + jitter(0.12))
        + _bump(t, 0.70, 0.080, 0.70 + jitter(0.08))
    )
    if kind == 1:  # oscillation burst over the beat
        burst = np.sin(2 * np.pi * (14 + jitter(1.5)) * t) * _bump(t, 0.5, 0.20, 1.5 + jitter(0.1))
        beat = beat + burst
    elif kind == 2:  # fully inverted beat
        beat = -beat
    elif kind == 3:  # beat suppressed under a slow baseline wander
        wander = (1.2 + jitter(0.1)) * np.sin(2 * np.pi * (2.2 + jitter(0.15)) * t + jitter(0.3))
        beat = 0.25 * beat + wander
    return beat + rng.normal(0, 0.05, seq_len)


def synthetic_ecg(
    n_per_class: tuple[int, int, int, int],
    seq_len: int = 140,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Labeled beats; class 1 is normal, 2..4 are anomalous morphologies
    (labels follow the ECG5000 1-based convention in the written files)."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for kind, count in enumerate(n_per_class):
        for _ in range(count):
            rows.append(_beat(rng, kind, seq_len))
            labels.append(kind + 1)
    order = rng.permutation(len(rows))
    return np.stack(rows)[order], np.asarray(labels, dtype=np.int64)[order]


def write_synthetic_corpus(
    directory: str | Path,
    train_per_class=(120, 20, 20, 20),
    test_per_class=(160, 80, 80, 80),
    seq_len: int = 140,
    seed: int = 7,
) -> tuple[Path, Path]:
    """Write TRAIN/TEST UCR files; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    train = directory / "synthetic_TRAIN.txt"
    test = directory / "synthetic_TEST.txt"
    samples, labels = synthetic_ecg(train_per_class, seq_len, seed)
    save_ucr(train, samples, labels)
    samples, labels = synthetic_ecg(test_per_class, seq_len, seed + 1)
    save_ucr(test, samples, labels)
    return train, test
