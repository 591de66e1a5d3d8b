"""Bit-accurate LSTM engine and Monte-Carlo-Dropout prediction.

Mirrors the streaming datapath: 16-bit weights and activations, 32-bit MVM
accumulators and cell state, LUT sigmoid/tanh, and per-gate dropout masks that
stay fixed across all time steps of a sequence.  All fixed-point state is kept
as raw-integer numpy arrays; every operation has a single canonical evaluation
order so results are reproducible bit for bit.

Arrays may carry an arbitrary leading batch axis.  Independent Monte-Carlo
samples are evaluated as one batch; this changes nothing about the per-sample
bit patterns (every op is elementwise or row-independent).

``float_forward``/``float_mc_predict`` form an independent double-precision
twin used as the accuracy reference for the fixed-point path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fxp
from .fxp import ACC_FORMAT, ACT_FORMAT, QFormat
from .mcrng import GATE_ORDER, BernoulliSampler, MaskSet, sample_mask_set, splitmix64
from .metrics import sample_variance

__all__ = [
    "Arch",
    "LstmLayerParams",
    "NetworkParams",
    "Prediction",
    "mvm",
    "lstm_step",
    "run_sequence",
    "build_network",
    "forward_once",
    "float_forward",
    "mc_predict",
    "layer_dims",
    "softmax",
]

TASKS = ("autoencoder", "classifier")

ACT_RANGE = (-8.0, 8.0)
ACT_ENTRIES = 2048


@dataclass(frozen=True)
class Arch:
    """Architecture triple: hidden size, layer count per part, Bayesian flags."""

    hidden: int
    num_layers: int
    bayes: str

    def __post_init__(self) -> None:
        if self.hidden < 2 or self.num_layers < 1:
            raise ValueError(f"degenerate architecture {self}")
        if set(self.bayes) - {"Y", "N"}:
            raise ValueError(f"Bayesian flags must be Y/N, got {self.bayes!r}")

    def __str__(self) -> str:
        return f"H={self.hidden},NL={self.num_layers},B={self.bayes}"


def layer_dims(task: str, arch: Arch, input_dim: int = 1) -> list[tuple[int, int]]:
    """(input, hidden) dimension pairs for every LSTM layer of the network.

    Autoencoder: encoder keeps width H except its last layer, which narrows to
    the H/2 bottleneck; the decoder widens H/2 back to H and stays there.  The
    classifier is the encoder alone at full width.
    """
    h, nl = arch.hidden, arch.num_layers
    if task == "classifier":
        outs = [h] * nl
    elif task == "autoencoder":
        if h % 2:
            raise ValueError("autoencoder hidden size must be even")
        outs = [h] * (nl - 1) + [h // 2] + [h] * nl
    else:
        raise ValueError(f"unknown task {task!r}")
    ins = [input_dim] + outs[:-1]
    return list(zip(ins, outs))


@lru_cache(maxsize=None)
def _luts(acc_fmt: QFormat, act_fmt: QFormat):
    sig = fxp.act_build("sigmoid", ACT_RANGE, ACT_ENTRIES, acc_fmt, act_fmt)
    tanh = fxp.act_build("tanh", ACT_RANGE, ACT_ENTRIES, acc_fmt, act_fmt)
    return sig, tanh


@dataclass(frozen=True, eq=False)
class LstmLayerParams:
    """Quantized weights of one LSTM layer, gate-keyed i/f/g/o.

    ``w_x[g]`` is (H, I), ``w_h[g]`` is (H, H), ``b[g]`` is (H,), all raw
    integers in ``act_fmt``.
    """

    w_x: dict[str, np.ndarray] = field(repr=False)
    w_h: dict[str, np.ndarray] = field(repr=False)
    b: dict[str, np.ndarray] = field(repr=False)
    is_bayesian: bool = False
    act_fmt: QFormat = ACT_FORMAT
    acc_fmt: QFormat = ACC_FORMAT

    def __post_init__(self) -> None:
        h, i = self.w_x["i"].shape
        for g in GATE_ORDER:
            if self.w_x[g].shape != (h, i) or self.w_h[g].shape != (h, h) or self.b[g].shape != (h,):
                raise ValueError(f"gate {g} weight shapes are inconsistent")
            for arr in (self.w_x[g], self.w_h[g], self.b[g]):
                if arr.dtype != np.int64:
                    raise ValueError("weights must be int64 raw values")
                if np.any(arr < self.act_fmt.raw_min) or np.any(arr > self.act_fmt.raw_max):
                    raise ValueError("raw weight outside the activation format range")
        if self.acc_fmt.frac_bits != 2 * self.act_fmt.frac_bits:
            raise fxp.FormatError("accumulator fraction must equal twice the weight fraction")
        object.__setattr__(self, "_fast_mvm", self._saturation_free())

    @property
    def input_dim(self) -> int:
        return self.w_x["i"].shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_x["i"].shape[0]

    def _saturation_free(self) -> bool:
        # Worst-case |pre-activation| over any input; if it cannot reach the
        # 32-bit rail, a plain integer matmul equals the saturating MAC chain.
        lim = 1 << (self.act_fmt.total_bits - 1)
        bound = 0
        for g in GATE_ORDER:
            row = (
                (np.abs(self.b[g]) << self.act_fmt.frac_bits)
                + np.abs(self.w_x[g]).sum(axis=1) * lim
                + np.abs(self.w_h[g]).sum(axis=1) * lim
            )
            bound = max(bound, int(row.max()))
        return bound < 1 << (self.acc_fmt.total_bits - 1)

    @classmethod
    def from_float(
        cls,
        w_x: dict[str, np.ndarray],
        w_h: dict[str, np.ndarray],
        b: dict[str, np.ndarray],
        is_bayesian: bool = False,
        act_fmt: QFormat = ACT_FORMAT,
        acc_fmt: QFormat = ACC_FORMAT,
    ) -> "LstmLayerParams":
        q = lambda d: {g: fxp.quantize_raw(d[g], act_fmt) for g in GATE_ORDER}
        return cls(q(w_x), q(w_h), q(b), is_bayesian, act_fmt, acc_fmt)


def mvm(w: np.ndarray, x: np.ndarray, acc_fmt: QFormat = ACC_FORMAT) -> np.ndarray:
    """Matrix-vector multiply as a saturating MAC chain from a zero accumulator.

    ``w`` is (H, I) and ``x`` is (..., I), both raw 16-bit values; the result is
    (..., H) raw values in the accumulator format.  Rows accumulate their terms
    in ascending column order (row-major schedule, fixed for reproducibility).
    """
    if w.shape[1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: W is {w.shape}, x has {x.shape[-1]} features")
    prods_bound = int(np.abs(w).sum(axis=1).max(initial=0)) * (1 << 15)
    if prods_bound < 1 << (acc_fmt.total_bits - 1):
        return x @ w.T.astype(np.int64)
    acc = np.zeros(x.shape[:-1] + (w.shape[0],), dtype=np.int64)
    for k in range(w.shape[1]):
        acc = fxp.saturate_raw(acc + w[:, k] * x[..., k : k + 1], acc_fmt)
    return acc


def _affine_raw(
    w: np.ndarray,
    x: np.ndarray,
    bias: np.ndarray,
    act_fmt: QFormat,
    acc_fmt: QFormat,
) -> np.ndarray:
    """Bias-seeded saturating MAC chain (the dense-layer datapath)."""
    shift = acc_fmt.frac_bits - act_fmt.frac_bits
    seeded = bias << shift
    lim = 1 << (act_fmt.total_bits - 1)
    bound = int(np.abs(seeded).max(initial=0)) + int(np.abs(w).sum(axis=1).max(initial=0)) * lim
    if bound < 1 << (acc_fmt.total_bits - 1):
        return seeded + x @ w.T
    acc = np.broadcast_to(seeded, x.shape[:-1] + seeded.shape).astype(np.int64).copy()
    for k in range(w.shape[1]):
        acc = fxp.saturate_raw(acc + w[:, k] * x[..., k : k + 1], acc_fmt)
    return acc


def _gate_preact(layer: LstmLayerParams, g: str, xm: np.ndarray, hm: np.ndarray) -> np.ndarray:
    """Gate pre-activation: accumulator seeded with the bias, then the input-
    side MAC chain, then the hidden-side chain."""
    shift = layer.acc_fmt.frac_bits - layer.act_fmt.frac_bits
    bias = layer.b[g] << shift
    if layer._fast_mvm:
        return bias + xm @ layer.w_x[g].T + hm @ layer.w_h[g].T
    acc = np.broadcast_to(bias, xm.shape[:-1] + bias.shape).astype(np.int64).copy()
    for w, v in ((layer.w_x[g], xm), (layer.w_h[g], hm)):
        for k in range(w.shape[1]):
            acc = fxp.saturate_raw(acc + w[:, k] * v[..., k : k + 1], layer.acc_fmt)
    return acc


def lstm_step(
    layer: LstmLayerParams,
    x_t: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    masks: MaskSet | dict | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM time step on raw fixed-point state.

    ``x_t`` (..., I) and ``h_prev`` (..., H) are 16-bit raws, ``c_prev`` (..., H)
    is a 32-bit raw.  A Bayesian layer requires masks; the gate-specific mask is
    applied to that gate's replica of the input and hidden state.  Returns
    (h_t 16-bit, c_t 32-bit).
    """
    if layer.is_bayesian and masks is None:
        raise ValueError("Bayesian layer stepped without masks")
    if not layer.is_bayesian and masks is not None:
        raise ValueError("masks supplied to a pointwise layer")
    if x_t.shape[-1] != layer.input_dim or h_prev.shape[-1] != layer.hidden_dim:
        raise ValueError("state shapes do not match layer dimensions")

    sig, tanh = _luts(layer.acc_fmt, layer.act_fmt)
    xz, hz = _mask_arrays(masks)
    gates = {}
    for g in GATE_ORDER:
        xm = x_t if xz is None else x_t * xz[g]
        hm = h_prev if hz is None else h_prev * hz[g]
        pre = _gate_preact(layer, g, xm, hm)
        lut = tanh if g == "g" else sig
        gates[g] = fxp.act_eval_raw(lut, pre)

    shift = layer.acc_fmt.frac_bits - layer.act_fmt.frac_bits
    f_c = fxp._rne_shift_right(gates["f"] * c_prev, shift)
    i_g = gates["i"] * gates["g"]
    c_t = fxp.saturate_raw(fxp.saturate_raw(f_c, layer.acc_fmt) + i_g, layer.acc_fmt)
    tanh_c = fxp.act_eval_raw(tanh, c_t)
    h_t = fxp.requantize_raw(gates["o"] * tanh_c, layer.acc_fmt, layer.act_fmt)
    return h_t, c_t


def _mask_arrays(masks):
    """Normalize a MaskSet (or pre-stacked dict pair) to gate-keyed arrays."""
    if masks is None:
        return None, None
    if isinstance(masks, MaskSet):
        return masks.x_masks, masks.h_masks
    return masks  # (x_masks, h_masks) already stacked for a batch


def run_sequence(
    layer: LstmLayerParams,
    x_seq: np.ndarray,
    masks: MaskSet | tuple | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run a layer over a (T, ..., I) raw sequence with zero initial state.

    The same mask set is applied at every time step; this is the defining
    once-per-sequence dropout semantic.  Returns (h_seq (T, ..., H), final c).
    """
    t_steps = x_seq.shape[0]
    if t_steps < 1:
        raise ValueError("sequence must have at least one step")
    lead = x_seq.shape[1:-1]
    h = np.zeros(lead + (layer.hidden_dim,), dtype=np.int64)
    c = np.zeros(lead + (layer.hidden_dim,), dtype=np.int64)
    h_seq = np.empty((t_steps,) + lead + (layer.hidden_dim,), dtype=np.int64)
    for t in range(t_steps):
        h, c = lstm_step(layer, x_seq[t], h, c, masks)
        h_seq[t] = h
    return h_seq, c


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """A full autoencoder or classifier: LSTM stack plus final dense layer."""

    task: str
    arch: Arch
    layers: tuple[LstmLayerParams, ...]
    dense_w: np.ndarray = field(repr=False)  # (O, H_last) raw
    dense_b: np.ndarray = field(repr=False)  # (O,) raw
    seq_len: int = 140
    input_dim: int = 1
    output_dim: int = 1
    act_fmt: QFormat = ACT_FORMAT
    acc_fmt: QFormat = ACC_FORMAT
    aleatoric_var: float = 0.0
    dropout_p: float = 0.125
    scale_folded: bool = True

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        expected = layer_dims(self.task, self.arch, self.input_dim)
        if len(self.bayes) != len(expected):
            raise ValueError(
                f"B string {self.arch.bayes!r} does not cover {len(expected)} layers"
            )
        actual = [(l.input_dim, l.hidden_dim) for l in self.layers]
        if actual != expected:
            raise ValueError(f"layer dims {actual} do not follow the {self.task} plan {expected}")
        for flag, layer in zip(self.bayes, self.layers):
            if (flag == "Y") != layer.is_bayesian:
                raise ValueError("layer Bayesian flags disagree with the B string")
        if self.dense_w.shape != (self.output_dim, expected[-1][1]):
            raise ValueError(f"dense shape {self.dense_w.shape} does not close the chain")
        if self.seq_len < 1:
            raise ValueError("sequence length must be positive")

    @property
    def bayes(self) -> str:
        return self.arch.bayes

    @property
    def bayesian_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.bayes) if f == "Y")

    def mask_dims(self) -> list[tuple[int, int]]:
        """(I, H) of each Bayesian layer, in layer order."""
        return [(self.layers[i].input_dim, self.layers[i].hidden_dim) for i in self.bayesian_indices]


def build_network(
    task: str,
    arch: Arch | tuple,
    params_source=None,
    seq_len: int = 140,
    input_dim: int = 1,
    output_dim: int | None = None,
    weight_scale: float | None = None,
    aleatoric_var: float = 0.0,
) -> NetworkParams:
    """Assemble a network following the layer-dimension plan.

    ``params_source`` chooses the weights: None gives all-zero weights, an int
    seed or numpy Generator draws uniform floats at trained-network scale
    (+-1/sqrt(H) unless ``weight_scale`` overrides) which are then quantized.
    """
    if not isinstance(arch, Arch):
        arch = Arch(*arch)
    if output_dim is None:
        output_dim = input_dim if task == "autoencoder" else 4
    dims = layer_dims(task, arch, input_dim)
    if len(arch.bayes) != len(dims):
        raise ValueError(f"B string {arch.bayes!r} must have length {len(dims)}")

    rng = None
    if params_source is not None:
        rng = params_source if isinstance(params_source, np.random.Generator) else np.random.default_rng(params_source)

    def draw(shape, h):
        if rng is None:
            return np.zeros(shape)
        w = weight_scale if weight_scale is not None else 1.0 / np.sqrt(h)
        return rng.uniform(-w, w, size=shape)

    layers = []
    for (i_dim, h_dim), flag in zip(dims, arch.bayes):
        layers.append(
            LstmLayerParams.from_float(
                w_x={g: draw((h_dim, i_dim), h_dim) for g in GATE_ORDER},
                w_h={g: draw((h_dim, h_dim), h_dim) for g in GATE_ORDER},
                b={g: draw((h_dim,), h_dim) for g in GATE_ORDER},
                is_bayesian=flag == "Y",
            )
        )
    h_last = dims[-1][1]
    return NetworkParams(
        task=task,
        arch=arch,
        layers=tuple(layers),
        dense_w=fxp.quantize_raw(draw((output_dim, h_last), h_last), ACT_FORMAT),
        dense_b=fxp.quantize_raw(draw((output_dim,), h_last), ACT_FORMAT),
        seq_len=seq_len,
        input_dim=input_dim,
        output_dim=output_dim,
        aleatoric_var=aleatoric_var,
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis, in double precision."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_masks(net: NetworkParams, mask_sets) -> list:
    mask_sets = list(mask_sets) if mask_sets is not None else []
    if len(mask_sets) != len(net.bayesian_indices):
        raise ValueError(
            f"network has {len(net.bayesian_indices)} Bayesian layers "
            f"but {len(mask_sets)} mask sets were supplied"
        )
    return mask_sets


def _forward_raw(net: NetworkParams, x_seq: np.ndarray, mask_sets: list) -> np.ndarray:
    """Shared fixed-point forward over raw input (T, ..., I); returns raw output."""
    masks_by_layer: dict[int, object] = dict(zip(net.bayesian_indices, mask_sets))

    n_enc = net.arch.num_layers if net.task == "autoencoder" else len(net.layers)
    seq = x_seq
    for idx in range(n_enc):
        seq, _ = run_sequence(net.layers[idx], seq, masks_by_layer.get(idx))

    if net.task == "classifier":
        return _affine_raw(net.dense_w, seq[-1], net.dense_b, net.act_fmt, net.acc_fmt)

    # Autoencoder: repeat the bottleneck h_T for every decoder time step.
    bottleneck = seq[-1]
    dec_in = np.broadcast_to(bottleneck, (net.seq_len,) + bottleneck.shape).copy()
    seq = dec_in
    for idx in range(n_enc, len(net.layers)):
        seq, _ = run_sequence(net.layers[idx], seq, masks_by_layer.get(idx))
    acc = _affine_raw(net.dense_w, seq, net.dense_b, net.act_fmt, net.acc_fmt)
    return fxp.requantize_raw(acc, net.acc_fmt, net.act_fmt)


def _prepare_input(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape != (net.seq_len, net.input_dim):
        raise ValueError(f"input shape {x.shape} does not match (T={net.seq_len}, I={net.input_dim})")
    return x


def forward_once(net: NetworkParams, x: np.ndarray, mask_sets=None) -> np.ndarray:
    """One deterministic pass; ``x`` is a float (T, I) signal.

    Returns the dequantized (T, O) reconstruction for autoencoders, or the
    O-vector of class probabilities (double-precision softmax over the
    dequantized dense accumulator) for classifiers.
    """
    x = _prepare_input(net, x)
    mask_sets = _check_masks(net, mask_sets)
    raw = _forward_raw(net, fxp.quantize_raw(x, net.act_fmt), mask_sets)
    if net.task == "classifier":
        return softmax(fxp.dequantize_raw(raw, net.acc_fmt))
    return fxp.dequantize_raw(raw, net.act_fmt)


# ---------------------------------------------------------------------------
# Double-precision reference twin
# ---------------------------------------------------------------------------


def _float_weights(layer: LstmLayerParams):
    s = layer.act_fmt.scale
    to_f = lambda d: {g: d[g] / s for g in GATE_ORDER}
    return to_f(layer.w_x), to_f(layer.w_h), to_f(layer.b)


def _float_sequence(layer, x_seq, masks):
    w_x, w_h, b = _float_weights(layer)
    xz, hz = _mask_arrays(masks)
    lead = x_seq.shape[1:-1]
    h = np.zeros(lead + (layer.hidden_dim,))
    c = np.zeros_like(h)
    out = np.empty((x_seq.shape[0],) + h.shape)
    sigmoid = lambda v: 1.0 / (1.0 + np.exp(-v))
    for t in range(x_seq.shape[0]):
        gates = {}
        for g in GATE_ORDER:
            xm = x_seq[t] if xz is None else x_seq[t] * xz[g]
            hm = h if hz is None else h * hz[g]
            pre = b[g] + xm @ w_x[g].T + hm @ w_h[g].T
            gates[g] = np.tanh(pre) if g == "g" else sigmoid(pre)
        c = gates["f"] * c + gates["i"] * gates["g"]
        h = gates["o"] * np.tanh(c)
        out[t] = h
    return out


def float_forward(net: NetworkParams, x: np.ndarray, mask_sets=None) -> np.ndarray:
    """Reference forward pass in float64 with exact sigmoid/tanh.

    Uses the dequantized weights and the same masks, so any output difference
    from :func:`forward_once` is due purely to datapath quantization.
    """
    x = _prepare_input(net, x)
    mask_sets = _check_masks(net, mask_sets)
    masks_by_layer = dict(zip(net.bayesian_indices, mask_sets))
    dense_w = net.dense_w / net.act_fmt.scale
    dense_b = net.dense_b / net.act_fmt.scale

    n_enc = net.arch.num_layers if net.task == "autoencoder" else len(net.layers)
    seq = x
    for idx in range(n_enc):
        seq = _float_sequence(net.layers[idx], seq, masks_by_layer.get(idx))
    if net.task == "classifier":
        return softmax(seq[-1] @ dense_w.T + dense_b)
    dec = np.broadcast_to(seq[-1], (net.seq_len,) + seq[-1].shape).copy()
    for idx in range(n_enc, len(net.layers)):
        dec = _float_sequence(net.layers[idx], dec, masks_by_layer.get(idx))
    return dec @ dense_w.T + dense_b


# ---------------------------------------------------------------------------
# Monte-Carlo prediction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    """Aggregated MC-dropout prediction.

    Regression: ``mean``/``epistemic_var`` are (T, O); ``aleatoric_var`` is the
    homoscedastic observation variance carried in the weight file and
    ``total_var`` their sum.  Classification: ``class_probs`` is the mean
    softmax vector and ``entropy`` its Shannon entropy in nats.
    """

    mean: np.ndarray
    epistemic_var: np.ndarray
    aleatoric_var: float
    samples_used: int
    class_probs: np.ndarray | None = None
    entropy: float | None = None

    @property
    def total_var(self) -> np.ndarray:
        return self.epistemic_var + self.aleatoric_var

    def __post_init__(self) -> None:
        if np.any(self.epistemic_var < 0):
            raise ValueError("negative epistemic variance")
        if self.class_probs is not None:
            if abs(float(self.class_probs.sum()) - 1.0) > 1e-6:
                raise ValueError("class probabilities do not sum to 1")


def sample_seeds(seed: int, count: int) -> list[int]:
    """Per-sample sampler seeds: consecutive outputs of a splitmix64 stream."""
    out, state, seeds = 0, seed & ((1 << 64) - 1), []
    for _ in range(count):
        out, state = splitmix64(state)
        seeds.append(out)
    return seeds


def draw_mask_sets(net: NetworkParams, sampler: BernoulliSampler, sample_index: int = 0) -> list[MaskSet]:
    """Draw one MaskSet per Bayesian layer, in layer order, from one stream."""
    return [sample_mask_set(dims, sampler, sample_index) for dims in net.mask_dims()]


def _stack_mask_sets(per_sample: list[list[MaskSet]]):
    """Stack per-sample MaskSets into (S, dim) arrays, one entry per Bayesian layer."""
    stacked = []
    for layer_idx in range(len(per_sample[0])):
        xs = {g: np.stack([ms[layer_idx].x_masks[g] for ms in per_sample]) for g in GATE_ORDER}
        hs = {g: np.stack([ms[layer_idx].h_masks[g] for ms in per_sample]) for g in GATE_ORDER}
        stacked.append((xs, hs))
    return stacked


def mc_predict(
    net: NetworkParams,
    x: np.ndarray,
    samples: int = 30,
    seed: int = 42,
    arithmetic: str = "fixed",
) -> Prediction:
    """S-sample Monte-Carlo-Dropout prediction.

    Every sample draws fresh masks for each Bayesian layer from its own
    deterministically seeded stream; (weights, input, seed, samples) determine
    the result bit for bit.  ``arithmetic`` selects the fixed-point datapath or
    the float64 reference twin.
    """
    if samples < 1:
        raise ValueError("need at least one MC sample")
    if arithmetic not in ("fixed", "float"):
        raise ValueError(f"unknown arithmetic {arithmetic!r}")
    x = _prepare_input(net, x)

    per_sample = [
        draw_mask_sets(net, BernoulliSampler(seed=s), sample_index=i)
        for i, s in enumerate(sample_seeds(seed, samples))
    ]

    if net.bayesian_indices:
        stacked = _stack_mask_sets(per_sample)
        x_b = np.broadcast_to(x[:, None, :], (net.seq_len, samples, net.input_dim))
        if arithmetic == "fixed":
            raw = _forward_raw(net, fxp.quantize_raw(x_b, net.act_fmt), stacked)
            if net.task == "classifier":
                outputs = softmax(fxp.dequantize_raw(raw, net.acc_fmt))
            else:
                outputs = fxp.dequantize_raw(raw, net.act_fmt).swapaxes(0, 1)
        else:
            if net.task == "classifier":
                outputs = _float_classifier_batch(net, x_b, stacked)
            else:
                outputs = _float_autoencoder_batch(net, x_b, stacked).swapaxes(0, 1)
    else:
        fwd = forward_once if arithmetic == "fixed" else float_forward
        one = fwd(net, x, [])
        outputs = np.repeat(one[None], samples, axis=0)

    if net.task == "classifier":
        probs = outputs  # (S, O)
        class_probs = probs.mean(axis=0)
        epi = sample_variance(probs)
        p = class_probs[class_probs > 0]
        return Prediction(
            mean=class_probs,
            epistemic_var=epi,
            aleatoric_var=net.aleatoric_var,
            samples_used=samples,
            class_probs=class_probs,
            entropy=float(-(p * np.log(p)).sum()),
        )

    mean = outputs.mean(axis=0)
    epi = sample_variance(outputs)
    return Prediction(
        mean=mean,
        epistemic_var=epi,
        aleatoric_var=net.aleatoric_var,
        samples_used=samples,
    )


def mc_predict_many(
    net: NetworkParams,
    xs: np.ndarray,
    samples: int = 30,
    seed: int = 42,
    arithmetic: str = "fixed",
    chunk: int = 32,
) -> list[Prediction]:
    """Row-wise MC prediction over a whole dataset, bit-identical to calling
    :func:`mc_predict` per row with the stream seeded as ``seed XOR row``.

    Rows and their samples are evaluated as one batch (``chunk`` rows at a
    time) purely for throughput; reductions stay per row in index order.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 2:
        xs = xs[:, :, None]
    if xs.shape[1:] != (net.seq_len, net.input_dim):
        raise ValueError(f"rows must be (T={net.seq_len}, I={net.input_dim}) signals")
    n_rows = xs.shape[0]
    if not net.bayesian_indices:
        return [mc_predict(net, xs[j], samples, seed ^ j, arithmetic) for j in range(n_rows)]

    preds: list[Prediction] = []
    for base in range(0, n_rows, chunk):
        rows = xs[base : min(base + chunk, n_rows)]
        n = rows.shape[0]
        per_pass = []  # (row, sample) major order: row-major
        for j in range(n):
            row_seed = seed ^ (base + j)
            for i, s in enumerate(sample_seeds(row_seed, samples)):
                per_pass.append(draw_mask_sets(net, BernoulliSampler(seed=s), sample_index=i))
        stacked = _stack_mask_sets(per_pass)
        x_b = np.repeat(rows, samples, axis=0)  # (n*S, T, I)
        x_b = np.moveaxis(x_b, 0, 1)  # (T, n*S, I)
        if arithmetic == "fixed":
            raw = _forward_raw(net, fxp.quantize_raw(x_b, net.act_fmt), stacked)
            if net.task == "classifier":
                outputs = softmax(fxp.dequantize_raw(raw, net.acc_fmt))
            else:
                outputs = fxp.dequantize_raw(raw, net.act_fmt).swapaxes(0, 1)
        elif net.task == "classifier":
            outputs = _float_classifier_batch(net, x_b, stacked)
        else:
            outputs = _float_autoencoder_batch(net, x_b, stacked).swapaxes(0, 1)

        outputs = outputs.reshape((n, samples) + outputs.shape[1:])
        for j in range(n):
            per_row = outputs[j]
            if net.task == "classifier":
                class_probs = per_row.mean(axis=0)
                p = class_probs[class_probs > 0]
                preds.append(
                    Prediction(
                        mean=class_probs,
                        epistemic_var=sample_variance(per_row),
                        aleatoric_var=net.aleatoric_var,
                        samples_used=samples,
                        class_probs=class_probs,
                        entropy=float(-(p * np.log(p)).sum()),
                    )
                )
            else:
                preds.append(
                    Prediction(
                        mean=per_row.mean(axis=0),
                        epistemic_var=sample_variance(per_row),
                        aleatoric_var=net.aleatoric_var,
                        samples_used=samples,
                    )
                )
    return preds


def _float_autoencoder_batch(net, x_b, stacked):
    masks_by_layer = dict(zip(net.bayesian_indices, stacked))
    n_enc = net.arch.num_layers
    seq = x_b
    for idx in range(n_enc):
        seq = _float_sequence(net.layers[idx], seq, masks_by_layer.get(idx))
    dec = np.broadcast_to(seq[-1], (net.seq_len,) + seq[-1].shape).copy()
    for idx in range(n_enc, len(net.layers)):
        dec = _float_sequence(net.layers[idx], dec, masks_by_layer.get(idx))
    return dec @ (net.dense_w / net.act_fmt.scale).T + net.dense_b / net.act_fmt.scale


def _float_classifier_batch(net, x_b, stacked):
    masks_by_layer = dict(zip(net.bayesian_indices, stacked))
    seq = x_b
    for idx in range(len(net.layers)):
        seq = _float_sequence(net.layers[idx], seq, masks_by_layer.get(idx))
    logits = seq[-1] @ (net.dense_w / net.act_fmt.scale).T + net.dense_b / net.act_fmt.scale
    return softmax(logits)
