"""Two-stage design space exploration over benchmarked architectures.

Stage one picks an architecture from a lookup table of benchmarked
(H, NL, B) entries according to the requested optimization mode, after
filtering out entries that miss any minimum metric requirement.  Stage two
searches the reuse-factor grid for that architecture, keeping every
configuration that fits the DSP budget and taking the one with the lowest
initiation interval.  Both stages are exact enumerations (the spaces are
small), so results are reproducible and the search is its own oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .engine import Arch, layer_dims
from .hwmodel import (
    CostReport,
    HwConfig,
    cost_report,
    cycles_to_time,
    dsp_budget,
    simulate_schedule,
)

__all__ = [
    "LookupEntry",
    "OptimizationRequest",
    "SelectedConfig",
    "NoFeasibleArchitecture",
    "InfeasibleDesign",
    "MODES",
    "METRIC_NAMES",
    "select_architecture",
    "search_reuse_factors",
    "optimize",
    "load_lookup_table",
    "save_lookup_table",
    "format_report",
]

# Registered metric names; the flagged ones improve downward.
METRIC_NAMES = ("accuracy", "ap", "auc", "ar", "entropy", "rmse", "nll")
LOWER_IS_BETTER = frozenset({"rmse", "nll"})

# mode -> (metric maximized, tasks it applies to)
MODES = {
    "Opt-Latency": (None, ("autoencoder", "classifier")),
    "Opt-Accuracy": ("accuracy", ("autoencoder", "classifier")),
    "Opt-Precision": ("ap", ("autoencoder", "classifier")),
    "Opt-AUC": ("auc", ("autoencoder",)),
    "Opt-Recall": ("ar", ("classifier",)),
    "Opt-Entropy": ("entropy", ("classifier",)),
}


class NoFeasibleArchitecture(RuntimeError):
    """No lookup entry survives filtering, or the pick cannot fit the budget."""


class InfeasibleDesign(RuntimeError):
    """No reuse-factor assignment fits the DSP budget."""

    def __init__(self, msg: str, min_dsp: int):
        super().__init__(msg)
        self.min_dsp = min_dsp


@dataclass(frozen=True)
class LookupEntry:
    """One benchmarked architecture row."""

    task: str
    arch: Arch
    samples: int
    metrics: dict[str, float] = field(default_factory=dict)
    source: str = ""

    def __post_init__(self) -> None:
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unregistered metrics {sorted(unknown)}")
        for name, value in self.metrics.items():
            if not np.isfinite(value):
                raise ValueError(f"metric {name} is not finite")


@dataclass(frozen=True)
class OptimizationRequest:
    mode: str
    dsp_total: int
    clock_hz: float = 100e6
    min_requirements: dict[str, float] = field(default_factory=dict)
    seq_len: int = 140
    task: str | None = None
    input_dim: int = 1
    output_dim: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {sorted(MODES)}")
        unknown = set(self.min_requirements) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unregistered requirement metrics {sorted(unknown)}")
        if self.task is not None and self.task not in MODES[self.mode][1]:
            raise ValueError(f"mode {self.mode} does not apply to task {self.task!r}")


@dataclass(frozen=True)
class SelectedConfig:
    entry: LookupEntry
    hw: HwConfig
    predicted: CostReport
    prediction_latency_cycles: int
    prediction_latency_seconds: float

    @property
    def arch(self) -> Arch:
        return self.entry.arch

    @property
    def metrics(self) -> dict[str, float]:
        return self.entry.metrics


def _meets_requirements(entry: LookupEntry, requirements: dict[str, float]) -> bool:
    for name, threshold in requirements.items():
        if name not in entry.metrics:
            return False
        value = entry.metrics[name]
        ok = value <= threshold if name in LOWER_IS_BETTER else value >= threshold
        if not ok:
            return False
    return True


def _resolve_task(req: OptimizationRequest, table: list[LookupEntry]) -> str:
    if req.task is not None:
        return req.task
    tasks = {e.task for e in table}
    if len(tasks) != 1:
        raise ValueError("table mixes tasks; specify one explicitly")
    task = tasks.pop()
    if task not in MODES[req.mode][1]:
        raise ValueError(f"mode {req.mode} does not apply to task {task!r}")
    return task


@lru_cache(maxsize=4096)
def _evaluate_design(arch, task, samples, seq_len, dsp_total, input_dim, output_dim, clock_hz):
    hw = search_reuse_factors(
        arch, task, seq_len, dsp_total,
        input_dim=input_dim, output_dim=output_dim, clock_hz=clock_hz,
    )
    report = cost_report(arch, task, seq_len, hw, input_dim, output_dim)
    cycles = simulate_schedule(arch, task, seq_len, hw, samples=samples, input_dim=input_dim)
    return hw, report, cycles


def _evaluate_entry(entry: LookupEntry, req: OptimizationRequest):
    """Best reuse factors for an entry plus its modeled S-sample latency."""
    return _evaluate_design(
        entry.arch,
        entry.task,
        entry.samples,
        req.seq_len,
        req.dsp_total,
        req.input_dim,
        req.output_dim,
        req.clock_hz,
    )


def select_architecture(req: OptimizationRequest, table: list[LookupEntry]) -> LookupEntry:
    """Pick the lookup entry the requested mode favours.

    Metric modes maximize their metric; Opt-Latency minimizes the modeled
    S-sample latency.  The tie chain (latency for metric modes, then DSP
    count, hidden size, Bayesian layer count, flag string) is a total order,
    so shuffled tables select identically.
    """
    task = _resolve_task(req, table)
    candidates = [e for e in table if e.task == task]
    if not candidates:
        raise NoFeasibleArchitecture(f"lookup table has no {task} entries")
    candidates = [e for e in candidates if _meets_requirements(e, req.min_requirements)]
    if not candidates:
        raise NoFeasibleArchitecture("no architecture meets the minimum requirements")

    metric, _ = MODES[req.mode]
    ranked = []
    for entry in candidates:
        try:
            _, report, cycles = _evaluate_entry(entry, req)
        except InfeasibleDesign:
            continue  # cannot be realized on this platform at any reuse factor
        tie = (cycles, report.dsp_design, entry.arch.hidden, entry.arch.bayes.count("Y"), entry.arch.bayes)
        if metric is None:
            ranked.append((tie, entry))
        else:
            if metric not in entry.metrics:
                continue
            value = entry.metrics[metric]
            goal = value if metric in LOWER_IS_BETTER else -value
            ranked.append(((goal,) + tie, entry))
    if not ranked:
        raise NoFeasibleArchitecture("no candidate architecture fits the DSP budget")
    ranked.sort(key=lambda item: item[0])
    return ranked[0][1]


def _ceil_div_grid(work: int, reuse: np.ndarray) -> np.ndarray:
    return -(-work // reuse)


def search_reuse_factors(
    arch: Arch | tuple,
    task: str,
    seq_len: int,
    dsp_total: int,
    input_dim: int = 1,
    output_dim: int | None = None,
    clock_hz: float = 100e6,
    r_max: int | None = None,
) -> HwConfig:
    """Exhaustive search over the (R_x, R_h) grid for the lowest-II fit.

    R_d follows the task rule (R_x for the autoencoder's per-step dense head,
    1 for the classifier).  Among budget-feasible points the initiation
    interval is minimized, then DSP usage, then (R_x, R_h) lexicographically.
    """
    if not isinstance(arch, Arch):
        arch = Arch(*arch)
    if dsp_total <= 0:
        raise ValueError("dsp_total must be positive")
    if output_dim is None:
        output_dim = input_dim if task == "autoencoder" else 4
    dims = layer_dims(task, arch, input_dim)
    if r_max is None:
        r_max = 4 * arch.hidden * max(input_dim, arch.hidden)

    reuse = np.arange(1, r_max + 1, dtype=np.int64)
    x_dsp = np.zeros_like(reuse)
    h_dsp = np.zeros_like(reuse)
    x_ii = np.zeros_like(reuse)
    h_ii = np.zeros_like(reuse)
    tail = 0
    for i_dim, h_dim in dims:
        x_work, h_work = 4 * i_dim * h_dim, 4 * h_dim * h_dim
        x_dsp += _ceil_div_grid(x_work, reuse)
        h_dsp += _ceil_div_grid(h_work, reuse)
        x_ii = np.maximum(x_ii, np.minimum(reuse, x_work))
        h_ii = np.maximum(h_ii, np.minimum(reuse, h_work))
        tail += 4 * h_dim
    dense_work = dims[-1][1] * output_dim * (seq_len if task == "autoencoder" else 1)
    if task == "autoencoder":
        x_dsp += _ceil_div_grid(dense_work, reuse)  # R_d = R_x
    else:
        tail += dense_work  # R_d = 1

    dsp = x_dsp[:, None] + h_dsp[None, :] + tail
    ii = np.maximum(x_ii[:, None], h_ii[None, :])
    feasible = dsp <= dsp_budget(dsp_total)
    if not feasible.any():
        min_dsp = int(dsp.min())
        raise InfeasibleDesign(
            f"{task} {arch} needs at least {min_dsp} DSPs; "
            f"budget is {dsp_budget(dsp_total)} (total {dsp_total} + 5%)",
            min_dsp,
        )

    # Lexicographic (II, dsp, R_x, R_h) minimum via one packed integer key.
    bits_r = max(1, r_max).bit_length()
    bits_dsp = int(dsp.max()).bit_length()
    key = ((ii.astype(np.int64) << bits_dsp) + dsp) << (2 * bits_r)
    key += (np.arange(r_max, dtype=np.int64)[:, None] << bits_r) + np.arange(r_max, dtype=np.int64)
    assert int(ii.max()).bit_length() + bits_dsp + 2 * bits_r < 63
    best = int(np.argmin(np.where(feasible, key, np.iinfo(np.int64).max)))
    best_rx, best_rh = int(reuse[best // r_max]), int(reuse[best % r_max])
    return HwConfig(
        r_x=best_rx,
        r_h=best_rh,
        r_d=best_rx if task == "autoencoder" else 1,
        dsp_total=dsp_total,
        clock_hz=clock_hz,
    )


def optimize(req: OptimizationRequest, table: list[LookupEntry]) -> SelectedConfig:
    """Architecture pick, reuse-factor search, cost report and final filter."""
    entry = select_architecture(req, table)
    hw, report, cycles = _evaluate_entry(entry, req)
    if not report.feasible:
        raise NoFeasibleArchitecture(
            f"selected {entry.arch} needs {report.dsp_design} DSPs over budget {dsp_budget(req.dsp_total)}"
        )
    return SelectedConfig(
        entry=entry,
        hw=hw,
        predicted=report,
        prediction_latency_cycles=cycles,
        prediction_latency_seconds=cycles_to_time(cycles, req.clock_hz),
    )


# ---------------------------------------------------------------------------
# Lookup-table CSV and report rendering
# ---------------------------------------------------------------------------

_FIXED_COLUMNS = ("task", "H", "NL", "B", "S")


def load_lookup_table(path: str | Path) -> list[LookupEntry]:
    """Read a lookup CSV: ``task,H,NL,B,S,<metric>...[,source]``."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if tuple(header[: len(_FIXED_COLUMNS)]) != _FIXED_COLUMNS:
            raise ValueError(f"lookup table must start with columns {_FIXED_COLUMNS}")
        metric_cols = [c for c in header[len(_FIXED_COLUMNS) :] if c != "source"]
        for row in reader:
            entries.append(
                LookupEntry(
                    task=row["task"].strip(),
                    arch=Arch(int(row["H"]), int(row["NL"]), row["B"].strip()),
                    samples=int(row["S"]),
                    metrics={c: float(row[c]) for c in metric_cols if row.get(c, "") != ""},
                    source=(row.get("source") or "").strip(),
                )
            )
    if not entries:
        raise ValueError(f"lookup table {path} is empty")
    return entries


def save_lookup_table(entries: list[LookupEntry], path: str | Path) -> None:
    metric_cols = sorted({name for e in entries for name in e.metrics})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_FIXED_COLUMNS) + metric_cols + ["source"])
        for e in entries:
            writer.writerow(
                [e.task, e.arch.hidden, e.arch.num_layers, e.arch.bayes, e.samples]
                + [e.metrics.get(c, "") for c in metric_cols]
                + [e.source]
            )


def format_report(cfg: SelectedConfig, req: OptimizationRequest) -> str:
    """Human-readable summary followed by a machine-readable key-value block."""
    e = cfg.entry
    lines = [
        f"mode {req.mode}: selected {e.task} architecture {e.arch} (S={e.samples})",
        f"  reuse factors: R_x={cfg.hw.r_x} R_h={cfg.hw.r_h} R_d={cfg.hw.r_d}",
        f"  DSP usage: {cfg.predicted.dsp_design} of budget {dsp_budget(req.dsp_total)}"
        f" (total {req.dsp_total} + 5%)",
        f"  II: {cfg.predicted.ii} cycles; single-pass latency: {cfg.predicted.latency_cycles} cycles"
        f" ({cfg.predicted.latency_seconds * 1e3:.3f} ms)",
        f"  S={e.samples} prediction latency: {cfg.prediction_latency_cycles} cycles"
        f" ({cfg.prediction_latency_seconds * 1e3:.3f} ms)",
        "  benchmarked metrics: "
        + ", ".join(f"{k}={v:g}" for k, v in sorted(e.metrics.items())),
        "",
        "[selection]",
        f"task={e.task}",
        f"H={e.arch.hidden}",
        f"NL={e.arch.num_layers}",
        f"B={e.arch.bayes}",
        f"S={e.samples}",
        f"R_x={cfg.hw.r_x}",
        f"R_h={cfg.hw.r_h}",
        f"R_d={cfg.hw.r_d}",
        f"dsp_design={cfg.predicted.dsp_design}",
        f"ii={cfg.predicted.ii}",
        f"latency_cycles={cfg.predicted.latency_cycles}",
        f"prediction_latency_cycles={cfg.prediction_latency_cycles}",
        f"prediction_latency_ms={cfg.prediction_latency_seconds * 1e3:.6f}",
    ]
    lines += [f"metric_{k}={v:g}" for k, v in sorted(e.metrics.items())]
    return "\n".join(lines)
