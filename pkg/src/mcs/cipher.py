"""MCS encryption and decryption.

Per 15-byte block: data expansion (append the running temp byte), 32
conditional byte swaps, bit-plane value masking, horizontal row rotations
and vertical column rotations on the two 8x8 bit matrices of the halves.
The first half (bytes 0-7) uses (alpha1, beta1) for both rotations, the
second half (bytes 8-15) uses (alpha2, beta2).

Rotation conventions (fixed for the whole package):
  * rotate_row amount a moves the bit at column c to column (c + a) % 8,
    i.e. a left-rotate of the byte value;
  * a vertical shift s moves the bit at row i to row (i + s) % 8.
"""

from __future__ import annotations

import numpy as np

from .core import SecretKey
from .errors import LengthMismatch, NonDivisibleLength
from .prbg import PrbsStream, generate_prbs

# The 32 conditional transpositions of the byte-swapping step, in application
# order: (i, j, l) swaps bytes i and j when controlling bit b(129k+l) is set.
SWAP_TABLE: tuple[tuple[int, int, int], ...] = (
    (0, 8, 4), (1, 9, 5), (2, 10, 6), (3, 11, 7),
    (4, 12, 8), (5, 13, 9), (6, 14, 10), (7, 15, 11),
    (0, 4, 12), (1, 5, 13), (2, 6, 14), (3, 7, 15),
    (8, 12, 16), (9, 13, 17), (10, 14, 18), (11, 15, 19),
    (0, 2, 20), (1, 3, 21), (4, 6, 22), (5, 7, 23),
    (8, 10, 24), (9, 11, 25), (12, 14, 26), (13, 15, 27),
    (0, 1, 28), (2, 3, 29), (4, 5, 30), (6, 7, 31),
    (8, 9, 32), (10, 11, 33), (12, 13, 34), (14, 15, 35),
)

# ROT[a, b] = byte b with every bit moved from column c to column (c+a) % 8.
_ROT = np.array(
    [[((b << a) | (b >> (8 - a))) & 0xFF if a else b for b in range(256)] for a in range(8)],
    dtype=np.uint8,
)


# ---------------------------------------------------------------------------
# Single-block operations
# ---------------------------------------------------------------------------

def expand_block(plain: bytes, temp: int, l: int) -> tuple[bytes, int]:
    """Append temp to a 15-byte block; new temp is the expanded block's byte l."""
    if len(plain) != 15:
        raise LengthMismatch("plain block must be 15 bytes")
    block = bytes(plain) + bytes([temp])
    return block, block[l]


def swap_bytes(block: bytes, bits) -> bytes:
    """Apply the 32 conditional transpositions in table order.

    ``bits`` holds the 32 controlling bits b(129k+4..35) in table order.
    """
    out = bytearray(block)
    for (i, j, _), bit in zip(SWAP_TABLE, bits):
        if bit:
            out[i], out[j] = out[j], out[i]
    return bytes(out)


def inverse_swap_bytes(block: bytes, bits) -> bytes:
    """Undo swap_bytes: replay the table strictly in reverse order."""
    out = bytearray(block)
    for (i, j, _), bit in zip(reversed(SWAP_TABLE), list(bits)[::-1]):
        if bit:
            out[i], out[j] = out[j], out[i]
    return bytes(out)


def _plane_seeds(bits) -> list[int]:
    """The eight 16-bit plane seeds Seed(k, j) from one block's 128 bits."""
    seed1 = sum((bits[4 * i] ^ bits[4 * i + 1] ^ bits[4 * i + 2] ^ bits[4 * i + 3]) << i
                for i in range(16))
    seed2 = sum((bits[64 + 4 * i] ^ bits[64 + 4 * i + 1] ^ bits[64 + 4 * i + 2]
                 ^ bits[64 + 4 * i + 3]) << i for i in range(16))
    seeds = []
    for j in range(8):
        sel = 2 * bits[36 + 2 * j] + bits[37 + 2 * j]
        seeds.append({3: seed1, 2: seed1 ^ 0xFFFF, 1: seed2, 0: seed2 ^ 0xFFFF}[sel])
    return seeds


def seed_star_bytes(bits) -> bytes:
    """Byte-wise mask: byte i collects bit i of every plane seed."""
    seeds = _plane_seeds(bits)
    return bytes(sum(((seeds[j] >> i) & 1) << j for j in range(8)) for i in range(16))


def mask_values(block: bytes, bits) -> bytes:
    """XOR-mask a 16-byte block; bits is the block's b(129k+0..127) slice."""
    mask = seed_star_bytes(bits)
    return bytes(x ^ m for x, m in zip(block, mask))


def rotate_row(row: int, amount: int) -> int:
    """Move the bit at column c to column (c + amount) % 8."""
    amount &= 7
    return ((row << amount) | (row >> (8 - amount))) & 0xFF if amount else row


def _row_amount(alpha: int, beta: int, direction_bit: int, magnitude_bit: int) -> int:
    r = alpha + beta * magnitude_bit
    return (8 - r) if direction_bit else r


def rotate_horizontal(block: bytes, bits, alpha_beta_1, alpha_beta_2) -> bytes:
    """Rotate the rows of both half-block matrices.

    ``bits`` is the block's full 129-bit slice; rows i of the first half use
    bit pair (65+2i, 66+2i), rows of the second half (97+2i, 98+2i).
    """
    out = bytearray(block)
    a1, b1 = alpha_beta_1
    a2, b2 = alpha_beta_2
    for i in range(8):
        out[i] = rotate_row(out[i], _row_amount(a1, b1, bits[65 + 2 * i], bits[66 + 2 * i]))
        out[8 + i] = rotate_row(out[8 + i], _row_amount(a2, b2, bits[97 + 2 * i], bits[98 + 2 * i]))
    return bytes(out)


def _shift_columns(half: bytes, amounts) -> bytes:
    """Shift column j of an 8-byte half downwards by amounts[j]."""
    out = bytearray(8)
    for j in range(8):
        col = sum(((half[i] >> j) & 1) << i for i in range(8))
        col = rotate_row(col, amounts[j])
        for i in range(8):
            out[i] |= ((col >> i) & 1) << j
    return bytes(out)


def rotate_vertical(block: bytes, bits, alpha_beta_1, alpha_beta_2) -> bytes:
    """Shift the columns of both half-block matrices downwards.

    Column j of the first half uses bit pair (81+2j, 82+2j), of the second
    half (113+2j, 114+2j).
    """
    a1, b1 = alpha_beta_1
    a2, b2 = alpha_beta_2
    am1 = [_row_amount(a1, b1, bits[81 + 2 * j], bits[82 + 2 * j]) for j in range(8)]
    am2 = [_row_amount(a2, b2, bits[113 + 2 * j], bits[114 + 2 * j]) for j in range(8)]
    return _shift_columns(block[:8], am1) + _shift_columns(block[8:], am2)


# ---------------------------------------------------------------------------
# Vectorized bulk pipeline
# ---------------------------------------------------------------------------

def _transpose_halves(arr: np.ndarray) -> np.ndarray:
    """Bitwise transpose of each row-wise 8x8 matrix; arr has shape (B, 8)."""
    bits = np.unpackbits(arr, axis=1, bitorder="little").reshape(-1, 8, 8)
    return np.packbits(bits.transpose(0, 2, 1).reshape(-1, 64), axis=1,
                       bitorder="little")


def _bulk_swaps(blocks: np.ndarray, bits: np.ndarray, inverse: bool) -> None:
    table = SWAP_TABLE[::-1] if inverse else SWAP_TABLE
    for i, j, l in table:
        m = bits[:, l] == 1
        tmp = blocks[m, i]
        blocks[m, i] = blocks[m, j]
        blocks[m, j] = tmp


def _bulk_seed_star(bits: np.ndarray) -> np.ndarray:
    num = bits.shape[0]
    q1 = bits[:, 0:64].reshape(num, 16, 4)
    q2 = bits[:, 64:128].reshape(num, 16, 4)
    s1b = q1[:, :, 0] ^ q1[:, :, 1] ^ q1[:, :, 2] ^ q1[:, :, 3]
    s2b = q2[:, :, 0] ^ q2[:, :, 1] ^ q2[:, :, 2] ^ q2[:, :, 3]
    seed1 = np.packbits(s1b, axis=1, bitorder="little").view("<u2").reshape(num)
    seed2 = np.packbits(s2b, axis=1, bitorder="little").view("<u2").reshape(num)
    sel = 2 * bits[:, 36:51:2] + bits[:, 37:52:2]  # (B, 8)
    seeds = np.where(sel == 3, seed1[:, None],
                     np.where(sel == 2, ~seed1[:, None],
                              np.where(sel == 1, seed2[:, None], ~seed2[:, None])))
    sb = seeds.astype("<u2").view(np.uint8).reshape(num, 8, 2)
    plane_bits = np.unpackbits(sb, axis=2, bitorder="little")  # [b, j, i]
    return np.packbits(plane_bits.transpose(0, 2, 1), axis=2,
                       bitorder="little")[:, :, 0]  # (B, 16)


def _bulk_row_amounts(bits: np.ndarray, base: int, alpha: int, beta: int) -> np.ndarray:
    p = bits[:, base:base + 16:2]
    mag = bits[:, base + 1:base + 17:2]
    r = alpha + beta * mag.astype(np.int16)
    return np.where(p == 1, 8 - r, r).astype(np.uint8) & 7


def _bulk_rotate_h(blocks: np.ndarray, bits: np.ndarray, ab1, ab2,
                   inverse: bool) -> np.ndarray:
    am = np.concatenate([_bulk_row_amounts(bits, 65, *ab1),
                         _bulk_row_amounts(bits, 97, *ab2)], axis=1)
    if inverse:
        am = (8 - am) & 7
    return _ROT[am, blocks]


def _bulk_rotate_v(blocks: np.ndarray, bits: np.ndarray, ab1, ab2,
                   inverse: bool) -> np.ndarray:
    out = np.empty_like(blocks)
    for half, (base, (alpha, beta)) in enumerate(((81, ab1), (113, ab2))):
        am = _bulk_row_amounts(bits, base, alpha, beta)
        if inverse:
            am = (8 - am) & 7
        cols = _transpose_halves(np.ascontiguousarray(blocks[:, 8 * half:8 * half + 8]))
        out[:, 8 * half:8 * half + 8] = _transpose_halves(_ROT[am, cols])
    return out


def _temp_chain(plain_rows: np.ndarray, l_vals: np.ndarray, secret: int) -> np.ndarray:
    temps = np.empty(len(l_vals), dtype=np.uint8)
    t = secret
    for k, lk in enumerate(l_vals):
        temps[k] = t
        if lk < 15:
            t = int(plain_rows[k, lk])
    return temps


def expansion_l_values(prbs: PrbsStream) -> np.ndarray:
    """l(k) = b(129k) + 2 b(129k+1) + 4 b(129k+2) + 8 b(129k+3) for every block."""
    b = prbs.bits
    return (b[:, 0] + 2 * b[:, 1] + 4 * b[:, 2] + 8 * b[:, 3]).astype(np.int64)


def encrypt_with_stream(plain: bytes, bits: np.ndarray, ab1, ab2,
                        secret: int) -> bytes:
    """The encryption pipeline driven by an explicit controlling-bit matrix.

    ``bits`` has shape (blocks, 129); ab1/ab2 are the (alpha, beta) pairs of
    the two halves.
    """
    if len(plain) % 15 != 0 or bits.shape != (len(plain) // 15, 129):
        raise NonDivisibleLength(
            f"plaintext of {len(plain)} bytes needs a ({len(plain) // 15}, 129) "
            f"bit matrix, got {bits.shape}")
    num = len(plain) // 15
    rows = np.frombuffer(bytes(plain), dtype=np.uint8).reshape(num, 15)
    l_vals = (bits[:, 0] + 2 * bits[:, 1] + 4 * bits[:, 2]
              + 8 * bits[:, 3]).astype(np.int64)
    blocks = np.empty((num, 16), dtype=np.uint8)
    blocks[:, :15] = rows
    blocks[:, 15] = _temp_chain(rows, l_vals, secret)
    _bulk_swaps(blocks, bits, inverse=False)
    blocks ^= _bulk_seed_star(bits)
    blocks = _bulk_rotate_h(blocks, bits, ab1, ab2, inverse=False)
    blocks = _bulk_rotate_v(blocks, bits, ab1, ab2, inverse=False)
    return blocks.tobytes()


def decrypt_with_stream(cipher: bytes, bits: np.ndarray, ab1, ab2) -> bytes:
    num = len(cipher) // 16
    blocks = np.frombuffer(bytes(cipher), dtype=np.uint8).reshape(num, 16).copy()
    blocks = _bulk_rotate_v(blocks, bits, ab1, ab2, inverse=True)
    blocks = _bulk_rotate_h(blocks, bits, ab1, ab2, inverse=True)
    blocks ^= _bulk_seed_star(bits)
    _bulk_swaps(blocks, bits, inverse=True)
    return np.ascontiguousarray(blocks[:, :15]).tobytes()


def encrypt(plain: bytes, key: SecretKey) -> bytes:
    """Encrypt a plaintext whose length is divisible by 15."""
    if len(plain) % 15 != 0:
        raise NonDivisibleLength(f"plaintext length {len(plain)} not divisible by 15")
    num = len(plain) // 15
    if num == 0:
        return b""
    bits = generate_prbs(key.x0, num).bits
    return encrypt_with_stream(plain, bits, (key.alpha1, key.beta1),
                               (key.alpha2, key.beta2), key.secret)


def decrypt(cipher: bytes, key: SecretKey) -> bytes:
    """Invert the pipeline; output length is 15/16 of the input length."""
    if len(cipher) % 16 != 0:
        raise NonDivisibleLength(f"ciphertext length {len(cipher)} not divisible by 16")
    num = len(cipher) // 16
    if num == 0:
        return b""
    bits = generate_prbs(key.x0, num).bits
    return decrypt_with_stream(cipher, bits, (key.alpha1, key.beta1),
                               (key.alpha2, key.beta2))


def expansion_chain_mismatches(cipher: bytes, key: SecretKey) -> list[int]:
    """Diagnostic: block indices whose recovered expanded byte breaks the chain.

    Never raises on mismatch; block 0 is skipped because its expanded byte is
    the secret byte, which decryption does not need to know.
    """
    if len(cipher) % 16 != 0:
        raise NonDivisibleLength(f"ciphertext length {len(cipher)} not divisible by 16")
    num = len(cipher) // 16
    if num == 0:
        return []
    prbs = generate_prbs(key.x0, num)
    bits = prbs.bits
    blocks = np.frombuffer(bytes(cipher), dtype=np.uint8).reshape(num, 16).copy()
    blocks = _bulk_rotate_v(blocks, bits, (key.alpha1, key.beta1),
                            (key.alpha2, key.beta2), inverse=True)
    blocks = _bulk_rotate_h(blocks, bits, (key.alpha1, key.beta1),
                            (key.alpha2, key.beta2), inverse=True)
    blocks ^= _bulk_seed_star(bits)
    _bulk_swaps(blocks, bits, inverse=True)
    l_vals = expansion_l_values(prbs)
    bad = []
    for k in range(1, num):
        expected = blocks[k - 1, l_vals[k - 1]]
        if blocks[k, 15] != expected:
            bad.append(k)
    return bad
