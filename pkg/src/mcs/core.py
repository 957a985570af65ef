"""Shared domain types, bit utilities and block partitioning.

Bit-order convention used everywhere in this package: bit j of a byte has
weight 2**j (LSB is j=0).  An 8x8 bit matrix built from 8 bytes has
element (i, j) equal to bit j of byte i.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError, LengthMismatch, NonDivisibleLength

FIXED129_BITS = 129
FIXED129_MAX = 1 << FIXED129_BITS
FRACTION_MASK = (1 << 64) - 1

BLOCK_PLAIN = 15
BLOCK_EXPANDED = 16
BITS_PER_BLOCK = 129


@dataclass(frozen=True)
class Fixed129:
    """A 129-bit fixed point value; semantic value is raw * 2**-64.

    Bit j of the semantic value (j = -64..64) is bit j+64 of ``raw``.
    """

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < FIXED129_MAX:
            raise DomainError(f"raw value out of range: {self.raw:#x}")

    @classmethod
    def from_fraction(cls, numerator: int, denominator: int) -> "Fixed129":
        """Round numerator/denominator to the nearest multiple of 2**-64."""
        if denominator <= 0 or numerator < 0:
            raise DomainError("fraction must be non-negative with positive denominator")
        raw = (numerator * (1 << 64) + denominator // 2) // denominator
        if raw >= FIXED129_MAX:
            raise DomainError("fraction too large for fixed-point range")
        return cls(raw)

    @classmethod
    def from_decimal_string(cls, text: str) -> "Fixed129":
        """Parse a decimal like '0.251' with exact rational rounding."""
        text = text.strip()
        if "." in text:
            whole, frac = text.split(".", 1)
        else:
            whole, frac = text, ""
        if not (whole or frac) or not (whole + frac).isdigit():
            raise DomainError(f"bad decimal value: {text!r}")
        num = int((whole or "0") + frac)
        return cls.from_fraction(num, 10 ** len(frac))

    def to_hex(self) -> str:
        """33 hex digits, MSB first (129 bits fit in 33 nibbles)."""
        return f"{self.raw:033x}"

    @classmethod
    def from_hex(cls, text: str) -> "Fixed129":
        if len(text) != 33:
            raise DomainError("x0 must be exactly 33 hex digits")
        return cls(int(text, 16))

    def fraction_parity(self) -> int:
        """Parity of the 64 fractional bits (raw bits 0..63)."""
        return (self.raw & FRACTION_MASK).bit_count() & 1


def legal_alpha_beta_pairs() -> list[tuple[int, int]]:
    """All 21 (alpha, beta) pairs with 1 <= alpha, beta >= 1, alpha+beta <= 7."""
    return [(a, b) for a in range(1, 8) for b in range(1, 8) if a + b <= 7]


@dataclass(frozen=True)
class SecretKey:
    alpha1: int
    beta1: int
    alpha2: int
    beta2: int
    secret: int
    x0: Fixed129

    def __post_init__(self):
        for a, b in ((self.alpha1, self.beta1), (self.alpha2, self.beta2)):
            if not (1 <= a and b >= 1 and a + b <= 7):
                raise DomainError(f"illegal rotation parameters ({a}, {b})")
        if not 0 <= self.secret <= 255:
            raise DomainError(f"secret must be a byte, got {self.secret}")


def hamming_weight(b: int) -> int:
    """Number of 1-bits in a byte."""
    return (b & 0xFF).bit_count()


def block_weight(block: bytes) -> int:
    """Sum of per-byte Hamming weights over a block."""
    return sum(x.bit_count() for x in block)


def partition15(data: bytes) -> list[bytes]:
    """Split into 15-byte plain blocks; length must divide evenly."""
    if len(data) % BLOCK_PLAIN != 0:
        raise NonDivisibleLength(f"length {len(data)} not divisible by {BLOCK_PLAIN}")
    return [bytes(data[i : i + BLOCK_PLAIN]) for i in range(0, len(data), BLOCK_PLAIN)]


def xor_differential(a: bytes, b: bytes) -> bytes:
    """Element-wise XOR of two equal-length plaintexts (length multiple of 15)."""
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    if len(a) % BLOCK_PLAIN != 0:
        raise NonDivisibleLength(f"length {len(a)} not divisible by {BLOCK_PLAIN}")
    return bytes(x ^ y for x, y in zip(a, b))


def bytes_to_matrix(data: bytes) -> list[list[int]]:
    """8 bytes -> 8x8 bit matrix, element (i, j) = bit j of byte i."""
    if len(data) != 8:
        raise LengthMismatch("bit matrix needs exactly 8 bytes")
    return [[(byte >> j) & 1 for j in range(8)] for byte in data]


def matrix_to_bytes(matrix: list[list[int]]) -> bytes:
    """Inverse of bytes_to_matrix."""
    return bytes(sum(row[j] << j for j in range(8)) for row in matrix)
