"""LFSR-backed Bernoulli bit streams and per-sequence dropout masks.

The hardware drops an input feature with probability p = 0.125 by NAND-ing the
output bits of three free-running LFSRs (each bit is 1 with probability 0.5,
so the NAND emits 0 exactly when all three are 1).  A mask set is drawn once
per Monte-Carlo sample and reused for every time step of the sequence.

Three 4-bit LFSRs share the tiny period 15 and their joint statistics depend
on relative phase, so the default register width is 16; the 4-bit variant is
kept for hardware-fidelity checks (``lfsr_width=4``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Lfsr",
    "BernoulliSampler",
    "MaskSet",
    "DROPOUT_P",
    "GATE_ORDER",
    "lfsr_next",
    "bern_next",
    "sample_mask_set",
    "splitmix64",
    "MAXIMAL_TAPS",
]

DROPOUT_P = 0.125
N_LFSR = 3
GATE_ORDER = ("i", "f", "g", "o")

# Maximal-length feedback tap sets (period 2**width - 1).
MAXIMAL_TAPS = {
    4: (4, 3),
    16: (16, 14, 13, 11),
}

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 generator: returns (output, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


@dataclass(frozen=True)
class Lfsr:
    """Fibonacci linear feedback shift register.

    ``taps`` are the exponents of the feedback polynomial (e.g. (4, 3) for
    x^4 + x^3 + 1).  In this right-shift form the output is the LSB, exponent
    p reads the bit (width - p) places above it, and the XOR of the tapped
    bits re-enters at the MSB.  State 0 is a fixed point of the recurrence and
    is rejected at construction.
    """

    width: int
    taps: tuple[int, ...]
    state: int

    def __post_init__(self) -> None:
        if self.state == 0:
            raise ValueError("LFSR state must be nonzero")
        if not 0 < self.state < (1 << self.width):
            raise ValueError(f"state {self.state:#x} does not fit in {self.width} bits")
        if not self.taps or any(not 1 <= t <= self.width for t in self.taps):
            raise ValueError(f"tap positions must lie in [1, {self.width}]")

    def step(self) -> tuple[int, "Lfsr"]:
        out = self.state & 1
        fb = 0
        for t in self.taps:
            fb ^= (self.state >> (self.width - t)) & 1
        nxt = (self.state >> 1) | (fb << (self.width - 1))
        return out, Lfsr(self.width, self.taps, nxt)


def lfsr_next(l: Lfsr) -> tuple[int, Lfsr]:
    """Emit the next output bit and the successor register."""
    return l.step()


@lru_cache(maxsize=8)
def _lfsr_cycle(width: int, taps: tuple[int, ...]):
    """Full state cycle of an LFSR from state 1: (states, outputs, state->pos).

    Returns None when the orbit does not close back on its start (possible for
    non-maximal tap sets); callers then fall back to stepwise stepping.
    """
    reg = Lfsr(width, taps, 1)
    states, outputs = [], []
    cur = reg
    for _ in range(1 << width):
        states.append(cur.state)
        bit, cur = cur.step()
        outputs.append(bit)
        if cur.state == 1:
            pos = {s: i for i, s in enumerate(states)}
            return np.asarray(states, dtype=np.int64), np.asarray(outputs, dtype=np.int64), pos
    return None


def _expand_seeds(seed: int, width: int, count: int) -> list[int]:
    """Derive ``count`` distinct nonzero ``width``-bit seeds from one user seed."""
    seeds: list[int] = []
    state = seed & _MASK64
    mask = (1 << width) - 1
    while len(seeds) < count:
        out, state = splitmix64(state)
        candidate = out & mask
        if candidate and candidate not in seeds:
            seeds.append(candidate)
    return seeds


class BernoulliSampler:
    """Stream of mask bits that are 0 with probability 0.125.

    Each call steps all three LFSRs and emits NAND(b1, b2, b3).  A sampler is a
    mutable stream owned by one worker; independent Monte-Carlo samples use
    independently seeded samplers.
    """

    p_zero = DROPOUT_P

    def __init__(self, seed: int = 0, lfsr_width: int = 16):
        if lfsr_width not in MAXIMAL_TAPS:
            raise ValueError(f"no maximal tap set known for width {lfsr_width}")
        taps = MAXIMAL_TAPS[lfsr_width]
        self.lfsrs = [
            Lfsr(lfsr_width, taps, s) for s in _expand_seeds(seed, lfsr_width, N_LFSR)
        ]
        self.bits_drawn = 0

    def next_bit(self) -> int:
        b = 1
        for i, l in enumerate(self.lfsrs):
            bit, self.lfsrs[i] = l.step()
            b &= bit
        self.bits_drawn += 1
        return 1 - b  # NAND

    def take(self, n: int) -> np.ndarray:
        """Draw ``n`` mask bits as an int64 vector.

        Equivalent to ``n`` calls of :meth:`next_bit`; when the registers sit
        on a known closed cycle the bits are served by indexing the
        precomputed cycle instead of stepping, which is orders of magnitude
        faster and bit-identical.
        """
        if n < 0:
            raise ValueError("cannot draw a negative number of bits")
        joint = None
        advanced = []
        for l in self.lfsrs:
            cycle = _lfsr_cycle(l.width, l.taps)
            if cycle is None or l.state not in cycle[2]:
                return np.fromiter(
                    (self.next_bit() for _ in range(n)), dtype=np.int64, count=n
                )
            states, outputs, posmap = cycle
            period = len(states)
            pos = posmap[l.state]
            idx = (pos + np.arange(n, dtype=np.int64)) % period
            bits = outputs[idx]
            joint = bits if joint is None else joint & bits
            advanced.append(Lfsr(l.width, l.taps, int(states[(pos + n) % period])))
        self.lfsrs = advanced
        self.bits_drawn += n
        return 1 - joint if joint is not None else np.empty(0, dtype=np.int64)


def bern_next(s: BernoulliSampler) -> int:
    """Draw one Bernoulli mask bit (0 with probability 0.125)."""
    return s.next_bit()


@dataclass(frozen=True)
class MaskSet:
    """Per-layer dropout masks for one Monte-Carlo sample.

    Eight binary vectors: one input mask of length I and one hidden mask of
    length H per gate, sampled once and reused for all time steps.
    """

    x_masks: dict[str, np.ndarray] = field(repr=False)
    h_masks: dict[str, np.ndarray] = field(repr=False)
    sample_index: int = 0

    def __post_init__(self) -> None:
        for masks, name in ((self.x_masks, "x"), (self.h_masks, "h")):
            if tuple(masks.keys()) != GATE_ORDER:
                raise ValueError(f"{name} masks must cover gates {GATE_ORDER}")

    @property
    def input_dim(self) -> int:
        return len(self.x_masks["i"])

    @property
    def hidden_dim(self) -> int:
        return len(self.h_masks["i"])

    @classmethod
    def all_ones(cls, input_dim: int, hidden_dim: int, sample_index: int = 0) -> "MaskSet":
        ones = lambda n: np.ones(n, dtype=np.int64)
        return cls(
            x_masks={g: ones(input_dim) for g in GATE_ORDER},
            h_masks={g: ones(hidden_dim) for g in GATE_ORDER},
            sample_index=sample_index,
        )


def sample_mask_set(layer_dims: tuple[int, int], stream, sample_index: int = 0) -> MaskSet:
    """Draw the 4I + 4H mask bits for one layer in the fixed wire order.

    Order: input masks for gates i, f, g, o, then hidden masks in the same gate
    order.  ``stream`` is anything exposing ``take(n)``.
    """
    input_dim, hidden_dim = layer_dims
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("layer dimensions must be positive")
    x_masks = {g: stream.take(input_dim) for g in GATE_ORDER}
    h_masks = {g: stream.take(hidden_dim) for g in GATE_ORDER}
    return MaskSet(x_masks=x_masks, h_masks=h_masks, sample_index=sample_index)
