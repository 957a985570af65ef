"""Post-processing of an equivalent key: rotation-amount sets, candidate
(alpha, beta) sub-keys, per-block frame offsets, and controlling bits.

The horizontal amounts in an equivalent key are true rotation amounts read
at cyclically shifted row indices, so their value set equals the true set
R = {alpha, 8-alpha, alpha+beta, 8-(alpha+beta)}.  The vertical amounts are
true amounts plus the block's frame offset, so comparing their value set
with R pins the offset up to R's rotational symmetry.  Once a block's two
offsets are unique, the within-half byte-swap permutations and the mask
bytes can be moved back to the true frame and their controlling bits read
off; rotation controlling bits are only ever constrained to two-element
pair sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attack import EquivalentKey
from .core import legal_alpha_beta_pairs
from .errors import DomainError, IllegalSet


def rotation_set(alpha: int, beta: int) -> frozenset[int]:
    return frozenset({alpha, 8 - alpha, alpha + beta, 8 - (alpha + beta)})


@dataclass(frozen=True)
class RotationSet:
    members: frozenset[int]

    @classmethod
    def from_alpha_beta(cls, alpha: int, beta: int) -> "RotationSet":
        return cls(rotation_set(alpha, beta))

    def translate(self, t: int) -> frozenset[int]:
        return frozenset((x + t) % 8 for x in self.members)


def recover_rotation_sets(ek: EquivalentKey) -> tuple[RotationSet, RotationSet]:
    """Union of {r, 8-r} over all recovered horizontal amounts, per half."""
    out = []
    for m in (0, 1):
        vals = ek.rot_x[:, 8 * m:8 * m + 8][ek.rotx_known[:, 8 * m:8 * m + 8]]
        members = set()
        for v in np.unique(vals):
            members.add(int(v))
            members.add(8 - int(v))
        out.append(RotationSet(frozenset(members)))
    return out[0], out[1]


def candidate_alpha_beta(r: RotationSet | frozenset[int]) -> frozenset[tuple[int, int]]:
    """All legal (alpha, beta) whose rotation set equals r exactly."""
    members = r.members if isinstance(r, RotationSet) else frozenset(r)
    cands = frozenset((a, b) for a, b in legal_alpha_beta_pairs()
                      if rotation_set(a, b) == members)
    if not cands:
        raise IllegalSet(f"no legal (alpha, beta) produces {sorted(members)}")
    return cands


def prop1_probability(alpha: int, beta: int, p: float, n: int) -> float:
    """Probability that n two-sided rotation draws fail to cover the full set."""
    if not (1 <= alpha and beta >= 1 and alpha + beta <= 7):
        raise DomainError(f"illegal (alpha, beta) = ({alpha}, {beta})")
    if not (0.0 <= p <= 1.0 and n >= 1):
        raise DomainError("need 0 <= p <= 1 and n >= 1")
    if 2 * alpha + beta == 8:
        return 0.0
    if n == 1:
        return 1.0
    return p ** n + (1 - p) ** n


def prop1_montecarlo(alpha: int, beta: int, p: float, n: int, trials: int,
                     seed: int = 0) -> float:
    """Empirical counterpart of prop1_probability by direct simulation."""
    if trials < 1:
        raise DomainError("need at least one trial")
    if not (1 <= alpha and beta >= 1 and alpha + beta <= 7):
        raise DomainError(f"illegal (alpha, beta) = ({alpha}, {beta})")
    rng = np.random.default_rng(seed)
    in_first = rng.random((trials, n)) < p
    side = rng.integers(0, 2, size=(trials, n))
    first = np.where(side == 0, alpha, 8 - alpha)
    second = np.where(side == 0, alpha + beta, 8 - (alpha + beta))
    draws = np.where(in_first, first, second)
    full = rotation_set(alpha, beta)
    covered = np.ones(trials, dtype=bool)
    for member in full:
        covered &= ((draws == member) | (draws == 8 - member)).any(axis=1)
    return float((~covered).mean())


def determine_s_offsets(ek: EquivalentKey, r1: RotationSet, r2: RotationSet
                        ) -> list[tuple[int | frozenset, int | frozenset]]:
    """Per block, the frame offset of each half, or the candidate set.

    A candidate offset t is valid when the block's observed vertical
    amounts all lie in the rotation set translated by t; rotational symmetry
    of the set ({2,6} and {1,3,5,7}) makes some blocks inherently ambiguous.
    """
    out = []
    translates = []
    for r in (r1, r2):
        translates.append([r.translate(t) for t in range(8)])
    for k in range(ek.num_blocks):
        entry = []
        for m, r in enumerate((r1, r2)):
            obs = {int(v) for v in ek.rot_y[k, 8 * m:8 * m + 8]}
            cands = frozenset(t for t in range(8) if obs <= translates[m][t])
            entry.append(next(iter(cands)) if len(cands) == 1 else cands)
        out.append((entry[0], entry[1]))
    return out


# Within-half swap phases: (sources, controlling-bit base) per half.
_PHASE1 = ((0, 4), (1, 5), (2, 6), (3, 7))
_PHASE2 = ((0, 2), (1, 3), (4, 6), (5, 7))
_PHASE3 = ((0, 1), (2, 3), (4, 5), (6, 7))
_PHASE_BIT_BASE = {0: (12, 16), 1: (20, 24), 2: (28, 32)}  # phase -> (half1, half2)


def _apply_pairs(perm: list[int], pairs, bits) -> list[int]:
    out = list(perm)
    for (i, j), b in zip(pairs, bits):
        if b:
            out[i], out[j] = out[j], out[i]
    return out


def recover_swap_bits_9to35(ek: EquivalentKey,
                            s_offsets: list[tuple[int | frozenset, int | frozenset]]
                            ) -> list[dict[int, int] | None]:
    """Bits b(129k+12..35) per block; None entries where an offset is ambiguous.

    Each half's 12 conditional swaps decompose into three phases (across
    quarters, across pair-of-pairs, within pairs); once the true permutation
    is known, each phase's four bits are forced in turn.
    """
    out: list[dict[int, int] | None] = []
    for k in range(ek.num_blocks):
        bits: dict[int, int] = {}
        any_half = False
        for m in (0, 1):
            t = s_offsets[k][m]
            if isinstance(t, frozenset):
                continue
            any_half = True
            perm = [(int(ek.perms[k, m, i]) + t) % 8 for i in range(8)]
            base1 = _PHASE_BIT_BASE[0][m]
            p1_bits = [1 if perm[i] >= 4 else 0 for i in range(4)]
            for i in range(4):
                bits[base1 + i] = p1_bits[i]
            star = _apply_pairs(perm, _PHASE1, p1_bits)
            p2_bits = [1 if star[0] in (2, 3) else 0,
                       1 if star[1] in (2, 3) else 0,
                       1 if star[4] in (6, 7) else 0,
                       1 if star[5] in (6, 7) else 0]
            base2 = _PHASE_BIT_BASE[1][m]
            for i in range(4):
                bits[base2 + i] = p2_bits[i]
            star2 = _apply_pairs(star, _PHASE2, p2_bits)
            base3 = _PHASE_BIT_BASE[2][m]
            for i, (a, b) in enumerate(_PHASE3):
                if star2[a] == b and star2[b] == a:
                    bits[base3 + i] = 1
                elif star2[a] == a and star2[b] == b:
                    bits[base3 + i] = 0
                else:
                    raise ValueError(
                        f"block {k} half {m}: permutation is not phase-decomposable")
        out.append(bits if any_half else None)
    return out


def _deoffset_seed(ek: EquivalentKey, k: int, t1: int, t2: int
                   ) -> tuple[list[int], list[bool]]:
    seed = [0] * 16
    known = [False] * 16
    for p in range(8):
        src = (p - t1) % 8
        seed[p] = int(ek.seed_star[k, src])
        known[p] = bool(ek.seed_known[k, src])
        src2 = 8 + (p - t2) % 8
        seed[8 + p] = int(ek.seed_star[k, src2])
        known[8 + p] = bool(ek.seed_known[k, src2])
    return seed, known


@dataclass
class MaskingRecovery:
    """Per-block outcome of the masking-bit stage."""

    bits: dict[int, int] = field(default_factory=dict)
    seed1: int | None = None
    status: str = "ok"  # ok | gated | single-family | collision | inconsistent


def recover_masking_bits(ek: EquivalentKey,
                         s_offsets: list[tuple[int | frozenset, int | frozenset]],
                         known_bits: list[dict[int, int]]) -> list[MaskingRecovery]:
    """Bits b(129k+36+2j) and, for first-seed planes, b(129k+37+2j).

    The nine低 low bits of the first plane seed are recomputed from the 36
    already-recovered controlling bits and matched against the bit-plane
    words of the de-offset mask.  Assignment happens only when exactly one
    complement-class of plane words matches and another class witnesses the
    mismatch, so a reported bit is never a guess.
    """
    out = []
    for k in range(ek.num_blocks):
        rec = MaskingRecovery()
        t1, t2 = s_offsets[k]
        bits = known_bits[k]
        if isinstance(t1, frozenset) or isinstance(t2, frozenset) or \
                any(i not in bits for i in range(36)):
            rec.status = "gated"
            out.append(rec)
            continue
        seed, known = _deoffset_seed(ek, k, t1, t2)
        mask_low = sum(1 << p for p in range(9) if known[p])
        seed1_low = sum(((bits[4 * i] ^ bits[4 * i + 1] ^ bits[4 * i + 2]
                          ^ bits[4 * i + 3]) << i) for i in range(9))
        mask_full = sum(1 << p for p in range(16) if known[p])
        words = []
        for j in range(8):
            w = sum((((seed[p] >> j) & 1) << p) for p in range(16) if known[p])
            words.append(w)
        groups: dict[int, list[int]] = {}
        for j, w in enumerate(words):
            groups.setdefault(min(w, ~w & mask_full), []).append(j)
        if mask_low == 0 or len(groups) > 2:
            rec.status = "inconsistent" if len(groups) > 2 else "gated"
            out.append(rec)
            continue
        s1 = seed1_low & mask_low
        ns1 = ~seed1_low & mask_low
        matching = []
        for key, js in groups.items():
            low = words[js[0]] & mask_low
            if low in (s1, ns1) or (~words[js[0]] & mask_low) in (s1, ns1):
                matching.append(key)
        if len(groups) == 1:
            if not matching:
                # a first-family plane would have to match the recomputed
                # low bits, so every plane provably uses the second seed
                for j in range(8):
                    rec.bits[36 + 2 * j] = 0
                rec.status = "ok"
            else:
                rec.status = "single-family"
        elif len(matching) == 2:
            rec.status = "collision"
        elif len(matching) == 0:
            rec.status = "inconsistent"
        else:
            fam1 = matching[0]
            for j in range(8):
                in_fam1 = min(words[j], ~words[j] & mask_full) == fam1
                rec.bits[36 + 2 * j] = 1 if in_fam1 else 0
                if in_fam1 and mask_low:
                    rec.bits[37 + 2 * j] = 1 if (words[j] & mask_low) == s1 else 0
            fam1_js = [j for j in range(8) if min(words[j], ~words[j] & mask_full) == fam1]
            if fam1_js:
                j0 = fam1_js[0]
                w = words[j0] if (words[j0] & mask_low) == s1 else ~words[j0] & mask_full
                rec.seed1 = w if mask_full == 0xFFFF else None
        out.append(rec)
    return out


def rotation_pair_constraints(r: RotationSet | frozenset[int], value: int
                              ) -> frozenset[tuple[int, int]]:
    """Admissible (direction bit, magnitude bit) pairs for one amount.

    Derived by enumerating every candidate (alpha, beta) of the set and
    every bit pair that produces the observed amount.
    """
    members = r.members if isinstance(r, RotationSet) else frozenset(r)
    pairs = set()
    for a, b in candidate_alpha_beta(RotationSet(frozenset(members))):
        for pb in (0, 1):
            for mb in (0, 1):
                amount = a + b * mb
                if pb:
                    amount = 8 - amount
                if amount % 8 == value % 8:
                    pairs.add((pb, mb))
    if not pairs:
        raise IllegalSet(f"amount {value} impossible for set {sorted(members)}")
    return frozenset(pairs)


def constrain_rotation_bits(ek: EquivalentKey, r1: RotationSet, r2: RotationSet,
                            s_offsets: list[tuple[int | frozenset, int | frozenset]]
                            ) -> dict[tuple[int, int], frozenset]:
    """Admissible (direction, magnitude) bit pairs for every rotation.

    Keys are absolute controlling-bit index pairs; offsets must be unique
    for the half a rotation belongs to, and unrecovered horizontal rows are
    skipped.  No rotation bit is ever pinned to a single value.
    """
    constrained: dict[tuple[int, int], frozenset] = {}
    for k in range(ek.num_blocks):
        for m, r in enumerate((r1, r2)):
            t = s_offsets[k][m]
            if isinstance(t, frozenset):
                continue
            h_base, v_base = (65, 81) if m == 0 else (97, 113)
            for i in range(8):
                src = (i - t) % 8
                if ek.rotx_known[k, 8 * m + src]:
                    v = int(ek.rot_x[k, 8 * m + src])
                    lo = 129 * k + h_base + 2 * i
                    constrained[(lo, lo + 1)] = rotation_pair_constraints(r, v)
            for j in range(8):
                v = (int(ek.rot_y[k, 8 * m + j]) - t) % 8
                lo = 129 * k + v_base + 2 * j
                constrained[(lo, lo + 1)] = rotation_pair_constraints(r, v)
    return constrained


@dataclass
class RecoveryReport:
    """Everything derivable from an equivalent key about the hidden key."""

    r1: RotationSet
    r2: RotationSet
    ab_candidates1: frozenset[tuple[int, int]]
    ab_candidates2: frozenset[tuple[int, int]]
    s_offsets: list[tuple[int | frozenset, int | frozenset]]
    known_bits: dict[int, int]                      # absolute index -> 0/1
    constrained: dict[tuple[int, int], frozenset]   # (idx, idx) -> pair set
    masking: list[MaskingRecovery]
    num_blocks: int

    def bit_state(self, index: int) -> str:
        if index in self.known_bits:
            return "one" if self.known_bits[index] else "zero"
        for key in self.constrained:
            if index in key:
                return "constrained"
        return "unknown"


def recover_report(ek: EquivalentKey) -> RecoveryReport:
    """Run the whole sub-key recovery pipeline over an equivalent key."""
    r1, r2 = recover_rotation_sets(ek)
    try:
        cand1 = candidate_alpha_beta(r1)
    except IllegalSet:
        cand1 = frozenset()
    try:
        cand2 = candidate_alpha_beta(r2)
    except IllegalSet:
        cand2 = frozenset()
    offsets = determine_s_offsets(ek, r1, r2)

    known: dict[int, int] = {}
    per_block: list[dict[int, int]] = [dict() for _ in range(ek.num_blocks)]
    for k in range(ek.num_blocks):
        if ek.l_values[k] >= 0:
            for i in range(4):
                per_block[k][i] = (int(ek.l_values[k]) >> i) & 1
        for i in range(8):
            if ek.swap_known[k, i]:
                per_block[k][4 + i] = int(ek.swap_bits[k, i])
    swaps = recover_swap_bits_9to35(ek, offsets)
    for k, bits in enumerate(swaps):
        if bits:
            per_block[k].update(bits)
    masking = recover_masking_bits(ek, offsets, per_block)
    for k, rec in enumerate(masking):
        per_block[k].update(rec.bits)
    for k in range(ek.num_blocks):
        for t, b in per_block[k].items():
            known[129 * k + t] = b

    if cand1 and cand2:
        constrained = constrain_rotation_bits(ek, r1, r2, offsets)
    else:
        constrained = {}

    return RecoveryReport(r1, r2, cand1, cand2, offsets, known, constrained,
                          masking, ek.num_blocks)
