from hypothesis import given, settings
from hypothesis import strategies as st

from mcs.core import Fixed129
from mcs.prbg import extract_bits, generate_prbs, prbg_next

MASK = (1 << 129) - 1


def big_int_oracle(raw):
    """Direct evaluation of the state update on arbitrary-precision ints."""
    parity = bin(raw & ((1 << 64) - 1)).count("1") % 2
    h = MASK if parity else 0
    return ((raw ^ h) * 419 >> 8) & MASK


def test_next_examples():
    assert prbg_next(Fixed129(0)).raw == 0
    assert prbg_next(Fixed129(1 << 64)).raw == 419 << 56
    assert prbg_next(Fixed129(1)).raw == ((419 * ((1 << 129) - 2)) >> 8) & MASK


def test_extract_bits_examples():
    assert not extract_bits(Fixed129(0)).any()
    v = extract_bits(Fixed129(1 << 128))
    assert v[0] == 1 and not v[1:].any()
    v = extract_bits(Fixed129(1))
    assert v[128] == 1 and not v[:128].any()


def test_stream_matches_big_int_oracle():
    x0 = Fixed129.from_decimal_string("0.251")
    stream = generate_prbs(x0, 3)
    raw = x0.raw
    expected = []
    for _ in range(3):
        expected.extend((raw >> (128 - t)) & 1 for t in range(129))
        raw = big_int_oracle(raw)
    assert list(stream.flat()) == expected


def test_zero_fixed_point():
    stream = generate_prbs(Fixed129(0), 2)
    assert stream.bits.shape == (2, 129)
    assert not stream.bits.any()


def test_single_block_is_initial_state():
    x0 = Fixed129(0x1234567890ABCDEF << 40)
    stream = generate_prbs(x0, 1)
    assert (stream.block(0) == extract_bits(x0)).all()


@given(st.integers(0, MASK), st.integers(1, 6))
@settings(max_examples=40)
def test_prefix_property(raw, blocks):
    x0 = Fixed129(raw)
    short = generate_prbs(x0, blocks)
    long = generate_prbs(x0, blocks + 1)
    assert (long.bits[:blocks] == short.bits).all()


@given(st.integers(0, MASK))
@settings(max_examples=60)
def test_next_stays_in_range_and_matches_oracle(raw):
    out = prbg_next(Fixed129(raw)).raw
    assert 0 <= out < (1 << 129)
    assert out == big_int_oracle(raw)


def test_determinism():
    x0 = Fixed129(0xDEADBEEF)
    a = generate_prbs(x0, 5)
    b = generate_prbs(x0, 5)
    assert (a.bits == b.bits).all()
    assert a.bit(2, 7) == int(a.bits[2, 7])
