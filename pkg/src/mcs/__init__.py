"""MCS block cipher, differential chosen-plaintext attack, and key recovery."""

from .attack import EquivalentKey, ees_decrypt, run_attack
from .cipher import decrypt, encrypt
from .core import (
    Fixed129,
    SecretKey,
    block_weight,
    hamming_weight,
    legal_alpha_beta_pairs,
    partition15,
    xor_differential,
)
from .keyrecovery import RecoveryReport, recover_report
from .prbg import PrbsStream, extract_bits, generate_prbs, prbg_next

__all__ = [
    "EquivalentKey",
    "Fixed129",
    "PrbsStream",
    "RecoveryReport",
    "SecretKey",
    "block_weight",
    "decrypt",
    "ees_decrypt",
    "encrypt",
    "extract_bits",
    "generate_prbs",
    "hamming_weight",
    "legal_alpha_beta_pairs",
    "partition15",
    "prbg_next",
    "recover_report",
    "run_attack",
    "xor_differential",
]
