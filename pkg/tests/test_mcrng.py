import numpy as np
import pytest

from mcdlstm import mcrng
from mcdlstm.mcrng import BernoulliSampler, Lfsr, MaskSet, sample_mask_set


def enumerate_period(reg: Lfsr, limit: int) -> tuple[int, list[int]]:
    """Step until the start state recurs; returns (period, output bits)."""
    bits = []
    cur = reg
    for step in range(1, limit + 1):
        bit, cur = cur.step()
        bits.append(bit)
        if cur.state == reg.state:
            return step, bits
    raise AssertionError("no cycle found within the limit")


def test_width4_period_is_15():
    period, _ = enumerate_period(Lfsr(4, (4, 3), 0b0001), 100)
    assert period == 15


def test_width4_visits_every_nonzero_state():
    seen = set()
    cur = Lfsr(4, (4, 3), 0b0001)
    for _ in range(15):
        seen.add(cur.state)
        _, cur = cur.step()
    assert seen == set(range(1, 16))


@pytest.mark.parametrize("width", [4, 16])
def test_maximal_period_bit_balance(width):
    reg = Lfsr(width, mcrng.MAXIMAL_TAPS[width], 1)
    period, bits = enumerate_period(reg, 2**width)
    assert period == 2**width - 1
    assert sum(bits) == 2 ** (width - 1)  # ones
    assert period - sum(bits) == 2 ** (width - 1) - 1  # zeros


def test_lfsr_step_is_pure():
    reg = Lfsr(16, mcrng.MAXIMAL_TAPS[16], 0xBEEF)
    first = reg.step()
    for _ in range(5):
        assert reg.step() == first


def test_lfsr_rejects_zero_state():
    with pytest.raises(ValueError):
        Lfsr(4, (4, 3), 0)


def test_lfsr_rejects_bad_taps():
    with pytest.raises(ValueError):
        Lfsr(4, (5,), 1)


def test_nand_truth_table_exhaustive():
    # Force register states whose output bits (LSBs) form each combination.
    for combo in range(8):
        bits = [(combo >> k) & 1 for k in range(3)]
        sampler = BernoulliSampler(seed=0)
        sampler.lfsrs = [
            Lfsr(16, mcrng.MAXIMAL_TAPS[16], 0b10 | b) for b in bits
        ]
        expected = 1 - (bits[0] & bits[1] & bits[2])
        assert mcrng.bern_next(sampler) == expected


def test_zero_rate_one_million_draws():
    sampler = BernoulliSampler(seed=42)
    bits = sampler.take(1_000_000)
    zero_rate = 1.0 - bits.mean()
    assert 0.120 <= zero_rate <= 0.130


def test_zero_rate_stable_across_windows():
    sampler = BernoulliSampler(seed=9001)
    for _ in range(3):
        window = sampler.take(1_000_000)
        assert 0.115 <= 1.0 - window.mean() <= 0.135


def test_take_matches_stepwise_draws():
    fast = BernoulliSampler(seed=7)
    slow = BernoulliSampler(seed=7)
    got = fast.take(4096)
    want = np.array([slow.next_bit() for _ in range(4096)])
    assert np.array_equal(got, want)
    assert [l.state for l in fast.lfsrs] == [l.state for l in slow.lfsrs]
    assert fast.bits_drawn == slow.bits_drawn == 4096


def test_sampler_width4_mode():
    sampler = BernoulliSampler(seed=5, lfsr_width=4)
    bits = sampler.take(64)
    assert set(np.unique(bits)) <= {0, 1}
    with pytest.raises(ValueError):
        BernoulliSampler(seed=5, lfsr_width=8)


def test_sampler_seeds_are_distinct_and_nonzero():
    for seed in (0, 1, 42, 2**63):
        sampler = BernoulliSampler(seed=seed)
        states = [l.state for l in sampler.lfsrs]
        assert len(set(states)) == 3
        assert all(s != 0 for s in states)


def test_splitmix64_is_deterministic():
    out1, state1 = mcrng.splitmix64(12345)
    out2, state2 = mcrng.splitmix64(12345)
    assert (out1, state1) == (out2, state2)
    assert mcrng.splitmix64(state1)[0] != out1


class ConstantStream:
    """Mask-bit stub emitting a fixed bit."""

    def __init__(self, bit: int):
        self.bit = bit
        self.drawn = 0

    def take(self, n: int) -> np.ndarray:
        self.drawn += n
        return np.full(n, self.bit, dtype=np.int64)


def test_mask_set_bit_budget():
    stream = ConstantStream(1)
    sample_mask_set((1, 2), stream)
    assert stream.drawn == 12  # 4*1 + 4*2
    stream = ConstantStream(1)
    sample_mask_set((3, 16), stream)
    assert stream.drawn == 4 * 3 + 4 * 16


def test_mask_set_wire_order():
    class Counting:
        def __init__(self):
            self.next = 0

        def take(self, n):
            out = np.arange(self.next, self.next + n, dtype=np.int64)
            self.next += n
            return out

    ms = sample_mask_set((2, 3), Counting())
    # input masks first in gate order i,f,g,o, then hidden masks
    assert ms.x_masks["i"].tolist() == [0, 1]
    assert ms.x_masks["o"].tolist() == [6, 7]
    assert ms.h_masks["i"].tolist() == [8, 9, 10]
    assert ms.h_masks["o"].tolist() == [17, 18, 19]


def test_mask_set_deterministic():
    a = sample_mask_set((2, 4), BernoulliSampler(seed=11))
    b = sample_mask_set((2, 4), BernoulliSampler(seed=11))
    for g in mcrng.GATE_ORDER:
        assert np.array_equal(a.x_masks[g], b.x_masks[g])
        assert np.array_equal(a.h_masks[g], b.h_masks[g])


def test_mask_set_all_ones_stream():
    ms = sample_mask_set((4, 4), ConstantStream(1))
    for g in mcrng.GATE_ORDER:
        assert ms.x_masks[g].all() and ms.h_masks[g].all()


def test_mask_sets_differ_across_samples():
    from mcdlstm.engine import sample_seeds

    seen = []
    for s in sample_seeds(42, 30):
        ms = sample_mask_set((1, 16), BernoulliSampler(seed=s))
        key = tuple(
            tuple(ms.x_masks[g].tolist()) + tuple(ms.h_masks[g].tolist())
            for g in mcrng.GATE_ORDER
        )
        seen.append(key)
    assert len(set(seen)) == 30


def test_mask_set_rejects_bad_dims():
    with pytest.raises(ValueError):
        sample_mask_set((0, 4), ConstantStream(1))


def test_mask_set_all_ones_constructor():
    ms = MaskSet.all_ones(3, 5)
    assert ms.input_dim == 3 and ms.hidden_dim == 5
    assert all(ms.x_masks[g].all() for g in mcrng.GATE_ORDER)
