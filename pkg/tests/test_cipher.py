import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SAMPLE_KEY, random_key, random_plain
from mcs.cipher import (
    SWAP_TABLE,
    decrypt,
    encrypt,
    expand_block,
    expansion_chain_mismatches,
    inverse_swap_bytes,
    mask_values,
    rotate_horizontal,
    rotate_row,
    rotate_vertical,
    seed_star_bytes,
    swap_bytes,
)
from mcs.core import Fixed129, SecretKey, block_weight
from mcs.errors import NonDivisibleLength
from mcs.prbg import generate_prbs
from reference import ref_decrypt, ref_encrypt

GOLDEN_PLAIN = bytes(range(45))
GOLDEN_CIPHER = bytes.fromhex(
    "ca0be55ea5f310b185fbb3c4ae63d3f912bbf0ad13b6d36c"
    "2691b0c9f978425cae0715493cd6c0a6105295b2411e2041"
)


def test_swap_table_shape():
    assert len(SWAP_TABLE) == 32
    assert SWAP_TABLE[0] == (0, 8, 4)
    assert SWAP_TABLE[-1] == (14, 15, 35)
    controls = [l for _, _, l in SWAP_TABLE]
    assert sorted(controls) == list(range(4, 36))


def test_expand_block():
    plain = bytes(range(1, 16))
    block, temp = expand_block(plain, 20, 0)
    assert block == plain + bytes([20])
    assert temp == 1
    block, temp = expand_block(bytes(15), 0, 9)
    assert block == bytes(16) and temp == 0
    _, temp = expand_block(plain, 20, 15)
    assert temp == 20


def test_swap_bytes_examples():
    block = bytes(range(16))
    assert swap_bytes(block, [0] * 32) == block
    bits = [0] * 32
    bits[0] = 1  # table entry (0, 8, 4)
    out = swap_bytes(block, bits)
    assert out[0] == 8 and out[8] == 0 and out[1:8] == block[1:8]


def test_swap_bytes_matches_sequential_replay(rng):
    for _ in range(50):
        block = bytes(rng.randrange(256) for _ in range(16))
        bits = [rng.randrange(2) for _ in range(32)]
        expected = list(block)
        for (i, j, _), b in zip(SWAP_TABLE, bits):
            if b:
                expected[i], expected[j] = expected[j], expected[i]
        assert swap_bytes(block, bits) == bytes(expected)
        assert inverse_swap_bytes(swap_bytes(block, bits), bits) == block


def test_mask_all_zero_bits_complements():
    bits = [0] * 129
    block = bytes(range(16))
    assert mask_values(block, bits) == bytes(b ^ 0xFF for b in block)


def test_mask_identity_when_first_seed_selected_and_zero():
    # selector bits 36..51 all 1 pick the first seed; make its quads cancel
    bits = [0] * 129
    for t in range(36, 52):
        bits[t] = 1
    assert seed_star_bytes(bits) == bytes(16)
    block = bytes(range(16))
    assert mask_values(block, bits) == block


def test_mask_involution(rng):
    for _ in range(30):
        bits = [rng.randrange(2) for _ in range(129)]
        block = bytes(rng.randrange(256) for _ in range(16))
        assert mask_values(mask_values(block, bits), bits) == block


def test_mask_matches_bit_plane_form(rng):
    # byte-wise mask equals the per-plane masking of the naive reference
    for _ in range(30):
        bits = [rng.randrange(2) for _ in range(129)]
        block = [rng.randrange(256) for _ in range(16)]
        seed1 = sum((bits[4 * i] ^ bits[4 * i + 1] ^ bits[4 * i + 2]
                     ^ bits[4 * i + 3]) << i for i in range(16))
        seed2 = sum((bits[64 + 4 * i] ^ bits[64 + 4 * i + 1] ^ bits[64 + 4 * i + 2]
                     ^ bits[64 + 4 * i + 3]) << i for i in range(16))
        out = list(block)
        for j in range(8):
            plane = sum(((block[i] >> j) & 1) << i for i in range(16))
            sel = 2 * bits[36 + 2 * j] + bits[37 + 2 * j]
            seed = {3: seed1, 2: seed1 ^ 0xFFFF, 1: seed2, 0: seed2 ^ 0xFFFF}[sel]
            plane ^= seed
            for i in range(16):
                out[i] = (out[i] & ~(1 << j)) | (((plane >> i) & 1) << j)
        assert mask_values(bytes(block), bits) == bytes(out)


def test_rotate_row():
    assert rotate_row(0x37, 0) == 0x37
    assert rotate_row(0x01, 2) == 0x04
    for r in range(256):
        for a in range(8):
            assert rotate_row(rotate_row(r, a), (8 - a) % 8) == r
    # index oracle: bit c moves to (c + a) % 8
    assert rotate_row(0x80, 1) == 0x01


def test_rotate_horizontal_examples():
    bits = [0] * 129
    block = bytes([0x01] + [0] * 15)
    out = rotate_horizontal(block, bits, (2, 5), (3, 4))
    assert out[0] == 0x04  # amount alpha1 = 2
    bits[65] = 1  # direction bit of row 0
    bits[66] = 1  # magnitude bit of row 0: amount 8 - 7 = 1
    out = rotate_horizontal(block, bits, (2, 5), (3, 4))
    assert out[0] == 0x02
    assert rotate_horizontal(bytes([0xFF] * 16), bits, (2, 5), (3, 4)) == bytes([0xFF] * 16)


def test_rotate_vertical_examples():
    bits = [0] * 129
    # alpha = 2, magnitude bits 0 -> every column shifts down by 2
    block = bytes([0xFF] + [0] * 15)
    out = rotate_vertical(block, bits, (2, 5), (2, 4))
    assert out[:8] == bytes([0, 0, 0xFF, 0, 0, 0, 0, 0])
    uniform = bytes([0x5A] * 16)
    assert rotate_vertical(uniform, bits, (2, 5), (2, 4)) == uniform


def test_rotate_vertical_inverse(rng):
    for _ in range(20):
        bits = [rng.randrange(2) for _ in range(129)]
        block = bytes(rng.randrange(256) for _ in range(16))
        once = rotate_vertical(block, bits, (2, 5), (3, 4))
        # applying the complementary shifts undoes it
        inv_bits = list(bits)
        for base in (81, 113):
            for j in range(8):
                inv_bits[base + 2 * j] ^= 1  # flip direction: s -> 8 - s
        assert rotate_vertical(once, inv_bits, (2, 5), (3, 4)) == block


def test_scalar_pipeline_matches_bulk(rng):
    # one-block encryption assembled from the step functions
    for _ in range(25):
        key = random_key(rng)
        plain = random_plain(rng, 1)
        bits = generate_prbs(key.x0, 1).bits[0].tolist()
        block, _ = expand_block(plain, key.secret, sum(bits[i] << i for i in range(4)))
        block = swap_bytes(block, bits[4:36])
        block = mask_values(block, bits)
        block = rotate_horizontal(block, bits, (key.alpha1, key.beta1),
                                  (key.alpha2, key.beta2))
        block = rotate_vertical(block, bits, (key.alpha1, key.beta1),
                                (key.alpha2, key.beta2))
        assert block == encrypt(plain, key)


def test_golden_vector_sample_key():
    assert encrypt(GOLDEN_PLAIN, SAMPLE_KEY) == GOLDEN_CIPHER
    assert decrypt(GOLDEN_CIPHER, SAMPLE_KEY) == GOLDEN_PLAIN


def test_matches_naive_reference(rng):
    for _ in range(10):
        key = random_key(rng)
        plain = random_plain(rng, rng.choice([1, 2, 5]))
        cipher = encrypt(plain, key)
        assert cipher == ref_encrypt(plain, key)
        assert decrypt(cipher, key) == ref_decrypt(cipher, key) == plain


def test_length_contracts():
    key = SAMPLE_KEY
    assert len(encrypt(bytes(15), key)) == 16
    assert encrypt(b"", key) == b""
    assert decrypt(b"", key) == b""
    with pytest.raises(NonDivisibleLength):
        encrypt(bytes(16), key)
    with pytest.raises(NonDivisibleLength):
        decrypt(bytes(15), key)


def test_decrypt_ignores_secret(rng):
    for _ in range(10):
        key = random_key(rng)
        other = SecretKey(key.alpha1, key.beta1, key.alpha2, key.beta2,
                          (key.secret + 1) % 256, key.x0)
        plain = random_plain(rng, 4)
        assert decrypt(encrypt(plain, key), other) == plain


def test_zero_prbs_decrypt_oracle():
    # 16 zero bytes under an all-zero stream, inverted step by step by hand
    key = SecretKey(2, 5, 3, 4, 20, Fixed129(0))
    bits = [0] * 129
    cipher = bytes(16)
    block = rotate_vertical(cipher, [0] * 81 + [1, 0] * 8 + [0] * 16 + [1, 0] * 8,
                            (2, 5), (3, 4))  # undo down-shifts via direction flips
    block = rotate_horizontal(block, [0] * 65 + [1, 0] * 8 + [0] * 16 + [1, 0] * 8,
                              (2, 5), (3, 4))
    block = mask_values(block, bits)
    block = inverse_swap_bytes(block, bits[4:36])
    assert decrypt(cipher, key) == block[:15]


@given(st.integers(0, (1 << 129) - 1), st.binary(min_size=15, max_size=15),
       st.binary(min_size=15, max_size=15))
@settings(max_examples=30, deadline=None)
def test_round_trip_property(raw, p1, p2):
    key = SecretKey(1, 1, 5, 2, 77, Fixed129(raw))
    plain = p1 + p2
    assert decrypt(encrypt(plain, key), key) == plain


# ---------------------------------------------------------------------------
# Differential properties the attack relies on
# ---------------------------------------------------------------------------

def expanded_blocks(plain, key):
    """The expanded 16-byte blocks an encryption of ``plain`` would process."""
    bits = generate_prbs(key.x0, len(plain) // 15).bits
    temp = key.secret
    out = []
    for k in range(len(plain) // 15):
        block, temp = expand_block(plain[15 * k:15 * k + 15], temp,
                                   sum(int(bits[k, i]) << i for i in range(4)))
        out.append(block)
    return out


def test_property_masking_preserves_differential(rng):
    for _ in range(20):
        bits = [rng.randrange(2) for _ in range(129)]
        b1 = bytes(rng.randrange(256) for _ in range(16))
        b2 = bytes(rng.randrange(256) for _ in range(16))
        m1, m2 = mask_values(b1, bits), mask_values(b2, bits)
        assert bytes(x ^ y for x, y in zip(m1, m2)) == bytes(
            x ^ y for x, y in zip(b1, b2))


def test_property_expansion_independent_of_secret(rng):
    for _ in range(10):
        key = random_key(rng)
        other = SecretKey(key.alpha1, key.beta1, key.alpha2, key.beta2,
                          (key.secret + 123) % 256, key.x0)
        p1, p2 = random_plain(rng, 4), random_plain(rng, 4)
        d_a = [bytes(x ^ y for x, y in zip(a, b))
               for a, b in zip(expanded_blocks(p1, key), expanded_blocks(p2, key))]
        d_b = [bytes(x ^ y for x, y in zip(a, b))
               for a, b in zip(expanded_blocks(p1, other), expanded_blocks(p2, other))]
        assert d_a == d_b


def test_property_swaps_permute_differential(rng):
    for _ in range(20):
        bits = [rng.randrange(2) for _ in range(32)]
        b1 = bytes(rng.randrange(256) for _ in range(16))
        b2 = bytes(rng.randrange(256) for _ in range(16))
        swapped_diff = bytes(x ^ y for x, y in zip(swap_bytes(b1, bits),
                                                   swap_bytes(b2, bits)))
        diff_swapped = swap_bytes(bytes(x ^ y for x, y in zip(b1, b2)), bits)
        assert swapped_diff == diff_swapped


def test_property_rotations_preserve_half_bit_multisets(rng):
    for _ in range(20):
        bits = [rng.randrange(2) for _ in range(129)]
        b1 = bytes(rng.randrange(256) for _ in range(16))
        b2 = bytes(rng.randrange(256) for _ in range(16))
        d_before = bytes(x ^ y for x, y in zip(b1, b2))
        r1 = rotate_vertical(rotate_horizontal(b1, bits, (2, 5), (3, 4)),
                             bits, (2, 5), (3, 4))
        r2 = rotate_vertical(rotate_horizontal(b2, bits, (2, 5), (3, 4)),
                             bits, (2, 5), (3, 4))
        d_after = bytes(x ^ y for x, y in zip(r1, r2))
        for half in (0, 1):
            assert block_weight(d_before[8 * half:8 * half + 8]) == \
                block_weight(d_after[8 * half:8 * half + 8])


def test_weight_conservation_expansion_to_cipher(rng):
    for _ in range(10):
        key = random_key(rng)
        p1, p2 = random_plain(rng, 6), random_plain(rng, 6)
        c_diff = bytes(x ^ y for x, y in zip(encrypt(p1, key), encrypt(p2, key)))
        e_diff = [bytes(x ^ y for x, y in zip(a, b))
                  for a, b in zip(expanded_blocks(p1, key), expanded_blocks(p2, key))]
        for k in range(6):
            assert block_weight(c_diff[16 * k:16 * k + 16]) == block_weight(e_diff[k])


def test_chain_diagnostics(rng):
    key = random_key(rng)
    plain = random_plain(rng, 8)
    cipher = encrypt(plain, key)
    assert expansion_chain_mismatches(cipher, key) == []
    tampered = bytearray(cipher)
    tampered[5] ^= 0xFF
    # corrupting block 0 disturbs the chain without raising
    assert isinstance(expansion_chain_mismatches(bytes(tampered), key), list)
