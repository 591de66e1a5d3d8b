"""Analytical DSP and latency models plus a pipeline-schedule simulator.

The DSP model counts hard multiplier blocks per LSTM layer: the input- and
hidden-side MVM engines are time-multiplexed by the reuse factors R_x and R_h
(one multiplier does R multiplies per time step, so the raw multiply count is
divided by R with a ceiling), while the element-wise tail costs a fixed 4*H
blocks per layer (the 16x32-bit forget-path multiply needs two blocks, the two
16x16 products one each).  The dense head adds H*O*T/R_d reads for the
autoencoder (it runs once per time step) or H*O/R_d for the classifier.

Latency: every layer runs its time-step loop with a shared initiation interval
II (cascaded layers are balanced to the slowest) and iteration latency IL.
Hidden states stream between layers element by element, so a consumer
iteration starts (IL - II) cycles after its producer iteration: the producer's
write-out phase overlaps the consumer's read-in phase.  A decoder, by
contrast, needs the final bottleneck state and can only start once the whole
encoder pass has drained, which doubles the single-pass latency.

The schedule simulator applies exactly these event rules one iteration at a
time and serves as the ground-truth oracle for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .engine import Arch, layer_dims

__all__ = [
    "HwConfig",
    "CostReport",
    "DspUsage",
    "dsp_layer",
    "dsp_design",
    "dsp_budget",
    "ii_estimate",
    "il_per_layer",
    "latency_design",
    "simulate_schedule",
    "cycles_to_time",
    "cost_report",
    "load_calibration",
    "mask_bits",
    "DEFAULT_PIPELINE_DEPTH",
]

DEFAULT_CLOCK_HZ = 100e6
DEFAULT_PIPELINE_DEPTH = 32  # IL defaults to II + this many cycles


@dataclass(frozen=True)
class HwConfig:
    """Reuse factors, platform budget and optional per-layer (II, IL) calibration."""

    r_x: int = 1
    r_h: int = 1
    r_d: int = 1
    dsp_total: int = 900
    clock_hz: float = DEFAULT_CLOCK_HZ
    calibration: dict[int, tuple[int, int]] = field(default_factory=dict)
    pipeline_depth: int = DEFAULT_PIPELINE_DEPTH

    def __post_init__(self) -> None:
        if min(self.r_x, self.r_h, self.r_d) < 1:
            raise ValueError("reuse factors must be >= 1")
        if self.dsp_total <= 0:
            raise ValueError("dsp_total must be positive")
        if self.clock_hz <= 0:
            raise ValueError("clock frequency must be positive")


class DspUsage(NamedTuple):
    per_layer: tuple[int, ...]
    dense: int
    total: int
    feasible: bool


@dataclass(frozen=True)
class CostReport:
    """Resource and latency estimate for one (architecture, reuse) point."""

    dsp_per_layer: tuple[int, ...]
    dsp_dense: int
    dsp_design: int
    feasible: bool
    ii: int
    il_per_layer: tuple[int, ...]
    latency_cycles: int
    latency_seconds: float


def dsp_layer(input_dim: int, hidden: int, r_x: int, r_h: int) -> int:
    """DSP blocks for one LSTM layer at the given reuse factors."""
    if min(input_dim, hidden, r_x, r_h) < 1:
        raise ValueError("dimensions and reuse factors must be >= 1")
    return (
        math.ceil(4 * input_dim * hidden / r_x)
        + math.ceil(4 * hidden * hidden / r_h)
        + 4 * hidden
    )


def _dense_dsp(task: str, h_last: int, output_dim: int, seq_len: int, r_d: int) -> int:
    work = h_last * output_dim * (seq_len if task == "autoencoder" else 1)
    return math.ceil(work / r_d)


def dsp_budget(dsp_total: int) -> int:
    """Usable budget: floor of dsp_total plus the 5% headroom the HLS flow
    recovers by folding easy multiplies into fabric logic."""
    return (21 * dsp_total) // 20


def dsp_design(
    arch: Arch | tuple,
    task: str,
    seq_len: int,
    hw: HwConfig,
    input_dim: int = 1,
    output_dim: int | None = None,
) -> DspUsage:
    """Total DSP usage of a design and its feasibility against the budget."""
    if not isinstance(arch, Arch):
        arch = Arch(*arch)
    if output_dim is None:
        output_dim = input_dim if task == "autoencoder" else 4
    dims = layer_dims(task, arch, input_dim)
    per_layer = tuple(dsp_layer(i, h, hw.r_x, hw.r_h) for i, h in dims)
    dense = _dense_dsp(task, dims[-1][1], output_dim, seq_len, hw.r_d)
    total = sum(per_layer) + dense
    return DspUsage(per_layer, dense, total, total <= dsp_budget(hw.dsp_total))


def ii_estimate(
    dims: list[tuple[int, int]],
    hw: HwConfig,
) -> tuple[int, list[int]]:
    """(design II, per-layer II) for the given layer dimension list.

    Calibration wins when present.  The default model charges each engine its
    reuse factor, capped by the engine's actual multiply count (a single
    multiplier cannot be reused more often than there is work), and balances
    the cascade to the slowest layer.
    """
    per_layer = []
    for idx, (i_dim, h_dim) in enumerate(dims):
        if idx in hw.calibration:
            per_layer.append(int(hw.calibration[idx][0]))
        else:
            per_layer.append(
                max(min(hw.r_x, 4 * i_dim * h_dim), min(hw.r_h, 4 * h_dim * h_dim))
            )
    return max(per_layer), per_layer


def il_per_layer(dims: list[tuple[int, int]], hw: HwConfig, design_ii: int) -> list[int]:
    """Per-layer iteration latency: calibrated value (floored at the balanced
    II) or II + pipeline depth."""
    out = []
    for idx in range(len(dims)):
        if idx in hw.calibration:
            out.append(max(int(hw.calibration[idx][1]), design_ii))
        else:
            out.append(design_ii + hw.pipeline_depth)
    return out


def _chain_cycles(ii: int, ils: list[int], seq_len: int) -> int:
    """Makespan of one cascaded chain: II*T plus each layer's drain excess."""
    return ii * seq_len + sum(il - ii for il in ils)


def latency_design(ii: int, il: int, seq_len: int, num_layers: int, task: str) -> int:
    """Closed-form single-pass latency in cycles.

    Classifier: II*T + (IL - II)*NL.  Autoencoder: twice that, because the
    decoder only starts after the encoder drains the whole sequence.
    """
    if ii < 1 or seq_len < 1 or num_layers < 1:
        raise ValueError("II, T and NL must be >= 1")
    if il < ii:
        raise ValueError(f"iteration latency {il} below initiation interval {ii}")
    cycles = _chain_cycles(ii, [il] * num_layers, seq_len)
    return 2 * cycles if task == "autoencoder" else cycles


def cycles_to_time(cycles: int, clock_hz: float = DEFAULT_CLOCK_HZ) -> float:
    if clock_hz <= 0:
        raise ValueError("clock frequency must be positive")
    return cycles / clock_hz


def mask_bits(input_dim: int, hidden: int) -> int:
    """Bernoulli bits one Bayesian layer consumes per pass: 4I + 4H."""
    return 4 * input_dim + 4 * hidden


def simulate_schedule(
    arch: Arch | tuple,
    task: str,
    seq_len: int,
    hw: HwConfig,
    samples: int = 1,
    n_inputs: int = 1,
    input_dim: int = 1,
) -> int:
    """Event-driven makespan (cycles) of ``n_inputs * samples`` passes.

    Rules applied per layer iteration: an engine starts a new time step II
    cycles after its previous one (passes queue back to back); a downstream
    layer's step t starts at least (IL - II) cycles after its producer's step
    t (streamed handoff); a decoder pass starts only when the encoder pass has
    fully drained; a Bayesian layer's pass cannot start before its mask bits
    are ready - masks for the first pass are pre-sampled before cycle 0, and
    the sampler regenerates one pass ahead, starting each refill when the
    current pass consumes its masks.
    """
    if not isinstance(arch, Arch):
        arch = Arch(*arch)
    if seq_len < 1 or samples < 1 or n_inputs < 1:
        raise ValueError("T, S and n_inputs must be >= 1")
    dims = layer_dims(task, arch, input_dim)
    ii, _ = ii_estimate(dims, hw)
    ils = il_per_layer(dims, hw, ii)
    n_layers = len(dims)
    dec_first = arch.num_layers if task == "autoencoder" else None
    bayes_bits = {
        idx: mask_bits(*dims[idx]) for idx, flag in enumerate(arch.bayes) if flag == "Y"
    }

    passes = n_inputs * samples
    ramp = ii * np.arange(seq_len, dtype=np.int64)
    starts = [np.zeros(seq_len, dtype=np.int64) for _ in range(n_layers)]
    last_start = [None] * n_layers  # final step start of the previous pass
    mask_ready = {idx: 0 for idx in bayes_bits}
    makespan = 0

    for _ in range(passes):
        enc_finish = 0
        for l in range(n_layers):
            # Earliest data-ready time per step, before engine pacing.
            if l == dec_first:
                ready = np.full(seq_len, enc_finish, dtype=np.int64)
            elif l > 0:
                ready = starts[l - 1] + (ils[l - 1] - ii)
            else:
                ready = np.zeros(seq_len, dtype=np.int64)
            first = int(ready[0])
            if last_start[l] is not None:
                first = max(first, last_start[l] + ii)
            if l in bayes_bits:
                first = max(first, mask_ready[l])
            ready[0] = first
            # Engine pacing: S[t] = max(S[t-1] + II, ready[t]), a prefix max.
            row = ramp + np.maximum.accumulate(ready - ramp)
            starts[l] = row
            if dec_first is not None and l == dec_first - 1:
                enc_finish = int(row[-1]) + ils[l]
            last_start[l] = int(row[-1])
            if l in bayes_bits:
                # Refill for the next pass begins when this pass pops its masks.
                mask_ready[l] = int(row[0]) + bayes_bits[l]
        makespan = int(starts[-1][-1]) + ils[-1]
    return makespan


def cost_report(
    arch: Arch | tuple,
    task: str,
    seq_len: int,
    hw: HwConfig,
    input_dim: int = 1,
    output_dim: int | None = None,
) -> CostReport:
    """Assemble the full single-pass resource/latency estimate."""
    if not isinstance(arch, Arch):
        arch = Arch(*arch)
    usage = dsp_design(arch, task, seq_len, hw, input_dim, output_dim)
    dims = layer_dims(task, arch, input_dim)
    ii, _ = ii_estimate(dims, hw)
    ils = il_per_layer(dims, hw, ii)
    if task == "autoencoder":
        nl = arch.num_layers
        cycles = _chain_cycles(ii, ils[:nl], seq_len) + _chain_cycles(ii, ils[nl:], seq_len)
    else:
        cycles = _chain_cycles(ii, ils, seq_len)
    return CostReport(
        dsp_per_layer=usage.per_layer,
        dsp_dense=usage.dense,
        dsp_design=usage.total,
        feasible=usage.feasible,
        ii=ii,
        il_per_layer=tuple(ils),
        latency_cycles=cycles,
        latency_seconds=cycles_to_time(cycles, hw.clock_hz),
    )


def load_calibration(path: str | Path) -> dict[int, tuple[int, int]]:
    """Parse a calibration file: one ``layer_index II IL`` record per line.

    Blank lines and ``#`` comments are ignored.
    """
    table: dict[int, tuple[int, int]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'layer_index II IL', got {line!r}")
        idx, ii, il = (int(p) for p in parts)
        if ii < 1 or il < ii:
            raise ValueError(f"{path}:{lineno}: need IL >= II >= 1")
        table[idx] = (ii, il)
    return table
