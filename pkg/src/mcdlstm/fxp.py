"""Fixed-point arithmetic matching the accelerator datapath.

Signed two's-complement Q-formats, round-to-nearest-even, saturate-on-overflow,
and BRAM-style lookup-table activations.  Scalar operations work on :class:`Fx`
values; the ``*_raw`` variants operate on raw-integer numpy arrays and are the
workhorses of the sequence engine.  Both routes produce identical bit patterns.

Default formats used by the engine: weights/activations Q6.10 (16-bit),
MVM accumulator and cell state Q12.20 (32-bit).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QFormat",
    "Fx",
    "ActLut",
    "ACT_FORMAT",
    "ACC_FORMAT",
    "quantize",
    "quantize_raw",
    "requantize",
    "requantize_raw",
    "fx_mac",
    "act_build",
    "act_eval",
    "act_eval_raw",
    "saturate_raw",
    "overflow_count",
    "reset_overflow_count",
]


class FormatError(ValueError):
    """Raised when operand fixed-point formats violate an operation's contract."""


@dataclass(frozen=True)
class QFormat:
    """Signed fixed-point format with ``total_bits`` width and ``frac_bits`` fraction.

    Real value of a raw integer r is ``r * 2**-frac_bits``; representable range is
    [-2**(total_bits-1-frac_bits), 2**(total_bits-1-frac_bits) - 2**-frac_bits].
    """

    total_bits: int
    frac_bits: int

    def __post_init__(self) -> None:
        if not 0 < self.frac_bits < self.total_bits:
            raise FormatError(
                f"frac_bits must lie strictly inside (0, total_bits): "
                f"got Q format {self.total_bits}/{self.frac_bits}"
            )

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.raw_min / self.scale

    @property
    def max_value(self) -> float:
        return self.raw_max / self.scale

    @property
    def lsb(self) -> float:
        return 1.0 / self.scale

    def __repr__(self) -> str:
        return f"Q{self.total_bits - self.frac_bits}.{self.frac_bits}"


# Engine defaults: 16-bit activations/weights, 32-bit accumulator/cell state.
ACT_FORMAT = QFormat(16, 10)
ACC_FORMAT = QFormat(32, 20)


@dataclass(frozen=True)
class Fx:
    """A single fixed-point value: raw two's-complement integer plus its format."""

    raw: int
    fmt: QFormat

    def __post_init__(self) -> None:
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise FormatError(f"raw {self.raw} outside {self.fmt} range")

    @property
    def value(self) -> float:
        return self.raw / self.fmt.scale

    def __repr__(self) -> str:
        return f"Fx({self.value}, {self.fmt})"


# ---------------------------------------------------------------------------
# Overflow diagnostics.  Saturation is silent in the datapath; a thread-local
# event counter lets tests and pipelines detect quantization range problems.
# ---------------------------------------------------------------------------

_tls = threading.local()


def overflow_count() -> int:
    """Number of saturation events recorded on this thread since the last reset."""
    return getattr(_tls, "count", 0)


def reset_overflow_count() -> None:
    _tls.count = 0


def _note_overflow(n: int) -> None:
    if n:
        _tls.count = getattr(_tls, "count", 0) + int(n)


def saturate_raw(raw: np.ndarray | int, fmt: QFormat):
    """Clamp raw integer(s) into the signed range of ``fmt``, counting events."""
    clipped = np.clip(raw, fmt.raw_min, fmt.raw_max)
    _note_overflow(np.count_nonzero(clipped != raw))
    if np.isscalar(raw) or np.ndim(raw) == 0:
        return int(clipped)
    return clipped


def _rne_shift_right(raw, shift: int):
    """Arithmetic right shift with round-to-nearest, ties to even."""
    if shift <= 0:
        return raw << -shift if shift else raw
    q = raw >> shift
    rem = raw - (q << shift)
    half = 1 << (shift - 1)
    up = (rem > half) | ((rem == half) & ((q & 1) == 1))
    return q + up


def _rne_div(num, den: int):
    """Nearest-integer division with ties to even (num may be a numpy array)."""
    q = num // den
    rem = num - q * den
    up = (2 * rem > den) | ((2 * rem == den) & ((q & 1) == 1))
    return q + up


# ---------------------------------------------------------------------------
# Quantization
# ---------------------------------------------------------------------------


def quantize_raw(x, fmt: QFormat) -> np.ndarray:
    """Round-to-nearest-even of ``x * 2**frac_bits``, saturated; returns int64 raws."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)):
        raise ValueError("cannot quantize NaN")
    rounded = np.rint(arr * fmt.scale)
    # Clip in float so +/-inf and huge values cast safely to int64.
    clipped = np.clip(rounded, float(fmt.raw_min), float(fmt.raw_max))
    _note_overflow(np.count_nonzero(clipped != rounded))
    return clipped.astype(np.int64)


def quantize(x: float, fmt: QFormat) -> Fx:
    """Quantize a real number into ``fmt`` (round-to-nearest-even, saturating)."""
    return Fx(int(quantize_raw(x, fmt)), fmt)


def requantize_raw(raw, src: QFormat, dst: QFormat):
    """Convert raw(s) from format ``src`` to ``dst``: RNE rounding then saturation."""
    shift = src.frac_bits - dst.frac_bits
    if shift > 0:
        moved = _rne_shift_right(raw, shift)
    else:
        moved = raw << -shift if shift else raw
    return saturate_raw(moved, dst)


def requantize(x: Fx, fmt: QFormat) -> Fx:
    return Fx(int(requantize_raw(x.raw, x.fmt, fmt)), fmt)


def fx_mac(acc: Fx, a: Fx, b: Fx) -> Fx:
    """Saturating multiply-accumulate: ``acc + a*b`` in the accumulator format.

    Requires ``acc.fmt.frac_bits == a.fmt.frac_bits + b.fmt.frac_bits`` so the
    full-precision product aligns with the accumulator without shifting.
    """
    if acc.fmt.frac_bits != a.fmt.frac_bits + b.fmt.frac_bits:
        raise FormatError(
            f"accumulator {acc.fmt} does not align with product of {a.fmt} and {b.fmt}"
        )
    total = acc.raw + a.raw * b.raw
    return Fx(saturate_raw(total, acc.fmt), acc.fmt)


def dequantize_raw(raw, fmt: QFormat) -> np.ndarray:
    """Exact float64 value of raw integer(s) in ``fmt``."""
    return np.asarray(raw, dtype=np.float64) / fmt.scale


# ---------------------------------------------------------------------------
# Lookup-table activations
# ---------------------------------------------------------------------------

_ACT_FUNCS = {
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
    "tanh": np.tanh,
}

# Saturation values returned for inputs outside the table's range.
_ASYMPTOTES = {"sigmoid": (0.0, 1.0), "tanh": (-1.0, 1.0)}


@dataclass(frozen=True, eq=False)
class ActLut:
    """BRAM-style activation table.

    Entries sample the activation on an even lattice ``lo + k*step`` (the k-th
    bin is centred on its lattice point); evaluation rounds the input to the
    nearest lattice index, so an input of exactly 0 hits the exact midpoint
    entry.  Inputs outside [lo, hi) return the quantized asymptote values.
    """

    kind: str
    lo: float
    hi: float
    entries: np.ndarray = field(repr=False)
    in_fmt: QFormat
    out_fmt: QFormat
    below_raw: int
    above_raw: int

    @property
    def n_entries(self) -> int:
        return len(self.entries)

    @property
    def lo_raw(self) -> int:
        return int(self.lo * self.in_fmt.scale)

    @property
    def hi_raw(self) -> int:
        return int(self.hi * self.in_fmt.scale)

    @property
    def raw_step(self) -> int:
        return (self.hi_raw - self.lo_raw) // self.n_entries


def act_build(
    kind: str,
    in_range: tuple[float, float],
    n_entries: int,
    in_fmt: QFormat,
    out_fmt: QFormat,
) -> ActLut:
    """Precompute an activation LUT over ``in_range = [lo, hi)``.

    ``n_entries`` must be a power of two and the range symmetric about zero;
    the raw-integer step between lattice points must be a whole number so the
    index computation is a pure bit-slice, as in the hardware.
    """
    lo, hi = in_range
    if kind not in _ACT_FUNCS:
        raise ValueError(f"unknown activation kind {kind!r}")
    if n_entries < 2 or n_entries & (n_entries - 1):
        raise ValueError(f"n_entries must be a power of two, got {n_entries}")
    if lo != -hi or not lo < 0 < hi:
        raise ValueError(f"input range must be symmetric about 0, got [{lo}, {hi})")
    span_raw = int(round((hi - lo) * in_fmt.scale))
    if span_raw % n_entries:
        raise ValueError("table size does not divide the raw input span")

    step = (hi - lo) / n_entries
    points = lo + step * np.arange(n_entries)
    entries = quantize_raw(_ACT_FUNCS[kind](points), out_fmt)
    if np.any(np.diff(entries) < 0):
        raise ValueError("activation entries are not monotone")
    below, above = _ASYMPTOTES[kind]
    return ActLut(
        kind=kind,
        lo=lo,
        hi=hi,
        entries=entries,
        in_fmt=in_fmt,
        out_fmt=out_fmt,
        below_raw=int(quantize_raw(below, out_fmt)),
        above_raw=int(quantize_raw(above, out_fmt)),
    )


def act_eval_raw(lut: ActLut, raw):
    """Vectorized nearest-bin lookup on raw integer(s) in the table's input format."""
    arr = np.asarray(raw, dtype=np.int64)
    idx = _rne_div(arr - lut.lo_raw, lut.raw_step)
    idx = np.clip(idx, 0, lut.n_entries - 1)
    out = lut.entries[idx]
    out = np.where(arr < lut.lo_raw, lut.below_raw, out)
    out = np.where(arr >= lut.hi_raw, lut.above_raw, out)
    return out


def act_eval(lut: ActLut, x: Fx) -> Fx:
    """Evaluate the LUT at a single fixed-point input."""
    if x.fmt != lut.in_fmt:
        raise FormatError(f"input format {x.fmt} does not match table {lut.in_fmt}")
    return Fx(int(act_eval_raw(lut, x.raw)), lut.out_fmt)
