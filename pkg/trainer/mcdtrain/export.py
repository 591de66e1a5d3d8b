"""Fold, quantize and export a trained checkpoint for the accelerator model.

Steps: multiply Bayesian-layer weight matrices by 1/(1-p) (the hardware
applies plain 0/1 masks, so the inverted-dropout scaling moves into the
weights), quantize everything to Q6.10 with round-to-nearest-even and
saturation, write the accelerator's binary weight format, benchmark the float
and the quantized model at S=30 on the held-out data, and append a lookup
row.  The quantized benchmark runs through the accelerator package's own CLI,
so the emitted bytes are validated end to end.
"""

from __future__ import annotations

import struct
import subprocess
import sys
import warnings
import zlib
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .data import load_ucr
from .metrics import classification_scores, mean_entropy, roc_metrics
from .model import GATES

ACT_FRAC = 10
ACT_BITS = 16
ACC_FRAC = 20
ACC_BITS = 32
RAW_MIN, RAW_MAX = -(1 << 15), (1 << 15) - 1

LOOKUP_COLUMNS = ("task", "H", "NL", "B", "S", "accuracy", "ap", "auc", "ar", "entropy", "source")


class QuantizationStats:
    def __init__(self):
        self.total = 0
        self.clipped = 0

    def quantize(self, values: np.ndarray) -> np.ndarray:
        scaled = np.rint(np.asarray(values, dtype=np.float64) * (1 << ACT_FRAC))
        clipped = np.clip(scaled, RAW_MIN, RAW_MAX)
        self.total += scaled.size
        self.clipped += int(np.count_nonzero(clipped != scaled))
        return clipped.astype("<i2")

    @property
    def overflow_fraction(self) -> float:
        return self.clipped / self.total if self.total else 0.0


def folded_gate_arrays(model, p: float) -> list[dict]:
    """Per-layer float weight blocks with 1/(1-p) folded into Bayesian
    weight matrices (biases are not masked and stay unscaled)."""
    out = []
    for layer in model.layers:
        blocks = layer.gate_arrays()
        if layer.bayesian:
            scale = 1.0 / (1.0 - p)
            for block in ("w_x", "w_h"):
                blocks[block] = {g: blocks[block][g] * scale for g in GATES}
        out.append(blocks)
    return out


def write_weight_file(cfg: TrainConfig, model, aleatoric_var: float, path: str | Path) -> float:
    """Serialize in the accelerator's weight format; returns the fraction of
    values that saturated during quantization (warns above 1%)."""
    stats = QuantizationStats()
    header = [
        "MCDLSTM-WEIGHTS v1",
        f"task={cfg.task}",
        f"H={cfg.hidden}",
        f"NL={cfg.num_layers}",
        f"B={cfg.bayes}",
        f"I={cfg.input_dim}",
        f"O={cfg.output_dim}",
        f"T={cfg.seq_len}",
        f"act_bits={ACT_BITS}",
        f"act_frac={ACT_FRAC}",
        f"acc_bits={ACC_BITS}",
        f"acc_frac={ACC_FRAC}",
        f"dropout_p={cfg.dropout_p!r}",
        f"aleatoric_var={float(aleatoric_var)!r}",
        "scale_folded=1",
        "",
        "",
    ]
    chunks = []
    for blocks in folded_gate_arrays(model, cfg.dropout_p):
        for block in ("w_x", "w_h", "b"):
            for g in GATES:
                chunks.append(stats.quantize(blocks[block][g].numpy()).tobytes())
    chunks.append(stats.quantize(model.dense.weight.detach().numpy()).tobytes())
    chunks.append(stats.quantize(model.dense.bias.detach().numpy()).tobytes())
    payload = b"".join(chunks)
    blob = "\n".join(header).encode() + payload + struct.pack("<I", zlib.crc32(payload))
    Path(path).write_bytes(blob)
    if stats.overflow_fraction > 0.01:
        warnings.warn(
            f"{stats.clipped} of {stats.total} weights "
            f"({stats.overflow_fraction:.2%}) saturated during quantization"
        )
    return stats.overflow_fraction


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------


def float_benchmark(
    cfg: TrainConfig,
    model,
    data_path: str | Path,
    samples: int = 30,
    seed: int = 42,
    probe_sequences: int = 200,
) -> dict[str, float]:
    """Evaluate the float model with live MCD masks at S samples."""
    torch.manual_seed(seed)
    rows, labels = load_ucr(data_path)
    x = torch.tensor(rows, dtype=torch.float32).unsqueeze(-1)
    with torch.no_grad():
        outputs = model.mc_sample(x, samples)
    if cfg.task == "autoencoder":
        recon = outputs.mean(dim=0)
        scores = torch.sqrt(((recon - x) ** 2).mean(dim=(1, 2))).numpy()
        return roc_metrics(scores, (labels != cfg.normal_label).astype(np.int64))
    probs = torch.softmax(outputs, dim=-1).mean(dim=0).numpy()
    result = classification_scores(probs, labels)
    noise = torch.randn(probe_sequences, cfg.seq_len, cfg.input_dim)
    with torch.no_grad():
        noise_probs = torch.softmax(model.mc_sample(noise, samples), dim=-1).mean(dim=0)
    result["entropy"] = mean_entropy(noise_probs.numpy())
    return result


def _parse_report_lines(stdout: str) -> dict[str, float]:
    report = {}
    for line in stdout.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            try:
                report[key.strip()] = float(value)
            except ValueError:
                pass  # non-numeric fields (task name, threshold source)
    return report


def fixed_benchmark(
    cfg: TrainConfig,
    weight_file: str | Path,
    data_path: str | Path,
    samples: int = 30,
    seed: int = 42,
) -> dict[str, float]:
    """Evaluate the exported weights through the accelerator CLI, reading the
    key=value report it prints."""
    command = "detect" if cfg.task == "autoencoder" else "classify"
    argv = [
        sys.executable,
        "-m",
        "mcdlstm.cli",
        command,
        "--weights", str(weight_file),
        "--data", str(data_path),
        "--samples", str(samples),
        "--seed", str(seed),
    ]
    if cfg.task == "classifier":
        argv.append("--entropy-probe")
    done = subprocess.run(argv, capture_output=True, text=True)
    if done.returncode != 0:
        raise RuntimeError(f"accelerator benchmark failed: {done.stderr.strip()}")
    report = _parse_report_lines(done.stdout)
    if cfg.task == "autoencoder":
        return {"accuracy": report["accuracy"], "ap": report["ap"], "auc": report["auc"]}
    return {
        "accuracy": report["accuracy"],
        "ap": report["macro_ap"],
        "ar": report["macro_ar"],
        "entropy": report.get("noise_entropy", report["mean_entropy"]),
    }


def append_lookup_row(
    table_path: str | Path,
    cfg: TrainConfig,
    samples: int,
    metrics: dict[str, float],
    source: str,
) -> None:
    """Append one benchmarked-architecture row (metrics from the float run,
    as the selection tables are float benchmarks; quantization follows the
    architecture choice)."""
    table_path = Path(table_path)
    if not table_path.exists():
        table_path.write_text(",".join(LOOKUP_COLUMNS) + "\n")
    header = table_path.read_text().splitlines()[0].split(",")
    row = {
        "task": cfg.task,
        "H": cfg.hidden,
        "NL": cfg.num_layers,
        "B": cfg.bayes,
        "S": samples,
        "source": source,
        **{k: f"{v:.6g}" for k, v in metrics.items()},
    }
    with open(table_path, "a") as fh:
        fh.write(",".join(str(row.get(col, "")) for col in header) + "\n")


def export(
    checkpoint_path: str | Path,
    out_path: str | Path,
    table_path: str | Path | None = None,
    samples: int = 30,
    seed: int = 42,
) -> dict:
    """Checkpoint -> weight file (+ lookup row); returns the full report."""
    from .training import load_checkpoint

    cfg, model, checkpoint = load_checkpoint(checkpoint_path)
    model.eval()
    overflow = write_weight_file(cfg, model, checkpoint.get("aleatoric_var", 0.0), out_path)

    eval_data = cfg.test_data or cfg.data
    float_metrics = float_benchmark(cfg, model, eval_data, samples, seed)
    fixed_metrics = fixed_benchmark(cfg, out_path, eval_data, samples, seed)
    report = {
        "weight_file": str(out_path),
        "overflow_fraction": overflow,
        "samples": samples,
        "float": float_metrics,
        "fixed": fixed_metrics,
        "provenance": checkpoint.get("provenance", ""),
    }
    if table_path is not None:
        append_lookup_row(
            table_path, cfg, samples, float_metrics, source=report["provenance"] or "trainer"
        )
    return report
