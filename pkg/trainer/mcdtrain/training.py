"""Training loop: Adam, gradient clipping at 3.0, weight decay 1e-4.

The autoencoder fits reconstruction MSE on the normal class only; the
classifier fits cross-entropy on all classes.  Dropout masks are live during
training exactly as at evaluation (that is the MCD premise)."""

from __future__ import annotations

import math
import time
from pathlib import Path

import torch
from torch import nn

from .config import TrainConfig
from .data import load_ucr
from .model import build_model


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, log: list):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.log = log


def train(cfg: TrainConfig, log_every: int = 50, quiet: bool = False) -> dict:
    """Train per the recipe; returns a checkpoint dictionary.

    The checkpoint carries the config, the model state, the loss log, the
    post-training homoscedastic residual variance (autoencoder) and the
    optimizer provenance string recorded into exported lookup rows.
    """
    torch.manual_seed(cfg.seed)
    samples, labels = load_ucr(cfg.data)
    if cfg.task == "autoencoder":
        samples = samples[labels == cfg.normal_label]
    if samples.shape[1] != cfg.seq_len:
        raise ValueError(f"data T={samples.shape[1]} does not match config T={cfg.seq_len}")

    x = torch.tensor(samples, dtype=torch.float32).unsqueeze(-1)
    y = torch.tensor(labels[labels == cfg.normal_label] if cfg.task == "autoencoder" else labels)
    model = build_model(cfg)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    loss_fn = nn.MSELoss() if cfg.task == "autoencoder" else nn.CrossEntropyLoss()

    order_rng = torch.Generator().manual_seed(cfg.seed)
    log: list[dict] = []
    started = time.monotonic()
    for epoch in range(cfg.epochs):
        order = torch.randperm(x.shape[0], generator=order_rng)
        total, count, clipped_max = 0.0, 0, 0.0
        for base in range(0, x.shape[0], cfg.batch_size):
            idx = order[base : base + cfg.batch_size]
            batch = x[idx]
            optimizer.zero_grad()
            out = model(batch)
            loss = loss_fn(out, batch if cfg.task == "autoencoder" else y[idx])
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            norm = math.sqrt(
                sum(float(p.grad.norm()) ** 2 for p in model.parameters() if p.grad is not None)
            )
            clipped_max = max(clipped_max, norm)
            optimizer.step()
            total += float(loss.detach()) * len(idx)
            count += len(idx)
        epoch_loss = total / count
        log.append({"epoch": epoch, "loss": epoch_loss, "max_grad_norm": clipped_max})
        if not math.isfinite(epoch_loss):
            raise TrainingDiverged(epoch, log)
        if not quiet and (epoch % log_every == 0 or epoch == cfg.epochs - 1):
            print(f"epoch {epoch:4d}  loss {epoch_loss:.6f}")

    aleatoric_var = 0.0
    if cfg.task == "autoencoder":
        recon = model.mc_sample(x, samples=30).mean(dim=0)
        aleatoric_var = float(((recon - x) ** 2).mean())

    return {
        "config": cfg.dump(),
        "state_dict": model.state_dict(),
        "log": log,
        "aleatoric_var": aleatoric_var,
        "provenance": f"adam lr={cfg.learning_rate} wd={cfg.weight_decay} "
        f"clip={cfg.grad_clip} epochs={cfg.epochs} seed={cfg.seed}",
        "train_seconds": time.monotonic() - started,
    }


def save_checkpoint(checkpoint: dict, path: str | Path) -> None:
    torch.save(checkpoint, path)


def load_checkpoint(path: str | Path) -> tuple[TrainConfig, torch.nn.Module, dict]:
    checkpoint = torch.load(path, weights_only=False)
    cfg = TrainConfig(**checkpoint["config"])
    model = build_model(cfg)
    model.load_state_dict(checkpoint["state_dict"])
    return cfg, model, checkpoint
