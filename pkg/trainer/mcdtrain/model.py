"""Monte-Carlo-Dropout LSTM models with per-sequence, per-gate masks.

The defining semantics: a Bayesian layer draws one Bernoulli(1-p) mask per
gate for the input and one for the hidden state, per sequence, and applies it
at every time step (inverted-dropout scaling 1/(1-p), so the expected
pre-activation is unchanged and the scaling can later be folded into the
weights for mask-only hardware).  Masks stay active in evaluation; prediction
averages S stochastic passes.
"""

from __future__ import annotations

import math

import torch
from torch import nn

GATES = ("i", "f", "g", "o")


def layer_plan(task: str, hidden: int, num_layers: int, input_dim: int) -> list[tuple[int, int]]:
    """(input, output) widths per LSTM layer, matching the accelerator:
    encoder narrows to H/2 in its last layer, decoder widens back to H."""
    if task == "classifier":
        outs = [hidden] * num_layers
    else:
        outs = [hidden] * (num_layers - 1) + [hidden // 2] + [hidden] * num_layers
    ins = [input_dim] + outs[:-1]
    return list(zip(ins, outs))


class McdLstmLayer(nn.Module):
    """One LSTM layer with gate-decoupled input/hidden dropout masks."""

    def __init__(self, input_dim: int, hidden: int, bayesian: bool, p: float):
        super().__init__()
        self.input_dim = input_dim
        self.hidden = hidden
        self.bayesian = bayesian
        self.p = p
        bound = 1.0 / math.sqrt(hidden)
        for g in GATES:
            self.register_parameter(f"w_x_{g}", nn.Parameter(torch.empty(hidden, input_dim).uniform_(-bound, bound)))
            self.register_parameter(f"w_h_{g}", nn.Parameter(torch.empty(hidden, hidden).uniform_(-bound, bound)))
            self.register_parameter(f"b_{g}", nn.Parameter(torch.empty(hidden).uniform_(-bound, bound)))
        # positive forget-gate bias eases gradient flow across long sequences
        with torch.no_grad():
            self.b_f += 1.0

    def _draw_masks(self, batch: int, device) -> dict[str, torch.Tensor]:
        keep = 1.0 - self.p
        masks = {}
        for g in GATES:
            masks[f"x_{g}"] = torch.bernoulli(torch.full((batch, self.input_dim), keep, device=device)) / keep
            masks[f"h_{g}"] = torch.bernoulli(torch.full((batch, self.hidden), keep, device=device)) / keep
        return masks

    def forward(self, x_seq: torch.Tensor) -> torch.Tensor:
        """(B, T, I) -> (B, T, H); fresh per-sequence masks on every call.

        The input-side projections have no recurrence, so they are computed
        for the whole sequence up front; the step loop handles only the
        hidden-side projections (gate-stacked into one einsum) and the cell
        update.  Same math as the naive per-step form.
        """
        batch, steps, _ = x_seq.shape
        device = x_seq.device
        masks = self._draw_masks(batch, device) if self.bayesian else None
        pre_x = []
        for g in GATES:
            xm = x_seq * masks[f"x_{g}"].unsqueeze(1) if masks else x_seq
            pre_x.append(xm @ getattr(self, f"w_x_{g}").T + getattr(self, f"b_{g}"))
        pre_x = torch.stack(pre_x, dim=2)  # (B, T, 4, H)
        w_h = torch.stack([getattr(self, f"w_h_{g}") for g in GATES])  # (4, H, H)
        z_h = (
            torch.stack([masks[f"h_{g}"] for g in GATES], dim=1) if masks else None
        )  # (B, 4, H)

        h = torch.zeros(batch, self.hidden, device=device)
        c = torch.zeros(batch, self.hidden, device=device)
        outputs = []
        for t in range(steps):
            if z_h is not None:
                hm = h.unsqueeze(1) * z_h
            else:
                hm = h.unsqueeze(1).expand(batch, len(GATES), self.hidden)
            pre = pre_x[:, t] + torch.einsum("bgh,gkh->bgk", hm, w_h)
            i_f_o = torch.sigmoid(pre[:, (0, 1, 3)])
            g_mod = torch.tanh(pre[:, 2])
            c = i_f_o[:, 1] * c + i_f_o[:, 0] * g_mod
            h = i_f_o[:, 2] * torch.tanh(c)
            outputs.append(h)
        return torch.stack(outputs, dim=1)

    def gate_arrays(self) -> dict[str, dict[str, "torch.Tensor"]]:
        """Detached weights keyed by block (w_x, w_h, b) then gate."""
        return {
            "w_x": {g: getattr(self, f"w_x_{g}").detach().clone() for g in GATES},
            "w_h": {g: getattr(self, f"w_h_{g}").detach().clone() for g in GATES},
            "b": {g: getattr(self, f"b_{g}").detach().clone() for g in GATES},
        }


class _McdBase(nn.Module):
    task = ""

    def __init__(self, hidden, num_layers, bayes, input_dim, output_dim, seq_len, p):
        super().__init__()
        self.hidden = hidden
        self.num_layers = num_layers
        self.bayes = bayes
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.seq_len = seq_len
        self.p = p
        dims = layer_plan(self.task, hidden, num_layers, input_dim)
        if len(bayes) != len(dims):
            raise ValueError(f"B string {bayes!r} must cover {len(dims)} layers")
        self.layers = nn.ModuleList(
            McdLstmLayer(i, o, flag == "Y", p) for (i, o), flag in zip(dims, bayes)
        )
        self.dense = nn.Linear(dims[-1][1], output_dim)

    def mc_sample(self, x: torch.Tensor, samples: int, chunk: int = 4096) -> torch.Tensor:
        """(B, T, I) -> (S, B, ...) stochastic passes, masks fresh per pass."""
        batch = x.shape[0]
        expanded = x.repeat_interleave(samples, dim=0)
        outs = []
        with torch.no_grad():
            for base in range(0, expanded.shape[0], chunk):
                outs.append(self(expanded[base : base + chunk]))
        stacked = torch.cat(outs, dim=0)
        return stacked.reshape(batch, samples, *stacked.shape[1:]).transpose(0, 1)


class McdRecurrentAutoencoder(_McdBase):
    """Encoder to an H/2 bottleneck, decoder from the repeated bottleneck,
    then a per-step dense reconstruction head."""

    task = "autoencoder"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        seq = x
        for layer in self.layers[: self.num_layers]:
            seq = layer(seq)
        bottleneck = seq[:, -1]
        seq = bottleneck.unsqueeze(1).expand(-1, self.seq_len, -1)
        for layer in self.layers[self.num_layers :]:
            seq = layer(seq)
        return self.dense(seq)


class McdClassifier(_McdBase):
    """Encoder stack, dense head on the last hidden state; returns logits."""

    task = "classifier"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        seq = x
        for layer in self.layers:
            seq = layer(seq)
        return self.dense(seq[:, -1])


def build_model(cfg) -> _McdBase:
    cls = McdRecurrentAutoencoder if cfg.task == "autoencoder" else McdClassifier
    return cls(
        hidden=cfg.hidden,
        num_layers=cfg.num_layers,
        bayes=cfg.bayes,
        input_dim=cfg.input_dim,
        output_dim=cfg.output_dim,
        seq_len=cfg.seq_len,
        p=cfg.dropout_p,
    )
