"""Training configuration, loadable from a JSON file."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass
class TrainConfig:
    task: str  # "autoencoder" | "classifier"
    hidden: int
    num_layers: int
    bayes: str
    data: str  # UCR-format training file
    test_data: str | None = None
    epochs: int = 1000
    batch_size: int = 64
    grad_clip: float = 3.0
    weight_decay: float = 1e-4
    learning_rate: float = 1e-3
    dropout_p: float = 0.125
    seed: int = 42
    seq_len: int = 140
    input_dim: int = 1
    output_dim: int | None = None
    normal_label: int = 0  # autoencoder trains on this class only

    def __post_init__(self) -> None:
        if self.task not in ("autoencoder", "classifier"):
            raise ValueError(f"unknown task {self.task!r}")
        n_layers = 2 * self.num_layers if self.task == "autoencoder" else self.num_layers
        if len(self.bayes) != n_layers or set(self.bayes) - {"Y", "N"}:
            raise ValueError(f"B string {self.bayes!r} must be Y/N of length {n_layers}")
        if self.task == "autoencoder" and self.hidden % 2:
            raise ValueError("autoencoder hidden size must be even")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")
        if self.output_dim is None:
            self.output_dim = self.input_dim if self.task == "autoencoder" else 4

    @classmethod
    def load(cls, path: str | Path) -> "TrainConfig":
        return cls(**json.loads(Path(path).read_text()))

    def dump(self) -> dict:
        return asdict(self)
