"""Differential chosen-plaintext attack: seven queries to an encryption
oracle yield an equivalent key that decrypts any ciphertext under the same
hidden key.

Stage order (each stage chooses its plaintext differentials adaptively from
what earlier stages recovered):

  1. expansion indices l(k) from Hamming-weight bookkeeping over two
     differentials with per-byte weights arranged so that every block's
     (w1, w2) pairs are distinct and never (0, 0);
  2. the eight cross-half swap bits per block, from half-block weight
     differences decoded against a dissociated set of pair deltas;
  3. the vertical-rotation part, probing with one 255 (or one 0) byte per
     half so horizontal rotations act trivially;
  4. the horizontal-rotation part, probing with uniform single-bit bytes so
     within-half byte swaps act trivially;
  5. the within-half byte-swap part, by value-matching the stage-1
     differentials after undoing both rotation parts;
  6. the masking part, by XORing the known base plaintext against its
     ciphertext after undoing everything else.

All recovered rotation/permutation/mask items live in a per-block "EES
frame" that is a cyclic re-indexing of the true one by an unknowable
per-half offset; the offsets cancel when the parts are composed, so
decryption of payload bytes is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cipher import _ROT, _transpose_halves
from .errors import (
    AmbiguousMatch,
    AttackFailed,
    CiphertextTooLong,
    InconsistentWeights,
    InvalidDeltaSum,
    LengthMismatch,
    MalformedColumn,
    MalformedRow,
    NonDivisibleLength,
    UnresolvedExpansion,
)

EncryptionOracle = Callable[[bytes], bytes]

_POP = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)
_SINGLE = np.full(256, -1, dtype=np.int8)
for _i in range(8):
    _SINGLE[1 << _i] = _i

# Sign matrix for decoding four pair deltas: row p gives (1 - 2*bit_i(p)).
_SIGNS = np.array([[1 - 2 * ((p >> i) & 1) for i in range(4)] for p in range(16)],
                  dtype=np.int16)

# Dissociated companion triples: {d} | COMPANIONS[d] has 16 distinct signed sums.
_COMPANIONS = {1: (4, 6, 8), 2: (4, 7, 8), 3: (6, 7, 8), 4: (6, 7, 8),
               5: (4, 6, 8), 6: (4, 7, 8), 7: (4, 6, 8), 8: (4, 5, 6)}

_CANONICAL_DELTAS = (4, 5, 6, 8)


def _weight_byte(w: int) -> int:
    """Canonical byte of Hamming weight w."""
    return (1 << w) - 1


# ---------------------------------------------------------------------------
# Stage 1: expansion indices
# ---------------------------------------------------------------------------

def expansion_weight_tables(length: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-byte weights of the two expansion-probing differentials.

    The second sequence cycles 0..8 with period 9.  The first runs nine of
    each weight 0..8 (period 81) except on the positions where the second
    sequence is 0: those take a period-8 ramp over weights 1..8 instead, so
    no position carries the pair (0, 0).  Within any 15-byte window all 15
    weight pairs are distinct, and equal pairs are at least 72 positions
    apart, so only an expansion chain at least four blocks deep can make the
    inherited pair collide with a payload pair.
    """
    idx = np.arange(length, dtype=np.int64)
    w1 = (idx % 81) // 9
    mult9 = idx % 9 == 0
    w1[mult9] = (idx[mult9] // 9) % 8 + 1
    w2 = idx % 9
    return w1.astype(np.uint8), w2.astype(np.uint8)


def gen_expansion_differentials(num_blocks: int) -> tuple[bytes, bytes]:
    """The two plaintext differentials that break the data expansion."""
    w1, w2 = expansion_weight_tables(15 * num_blocks)
    d1 = ((1 << w1.astype(np.uint16)) - 1).astype(np.uint8)
    d2 = ((1 << w2.astype(np.uint16)) - 1).astype(np.uint8)
    return d1.tobytes(), d2.tobytes()


def _block_weights(data: bytes, width: int) -> np.ndarray:
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, width)
    return _POP[arr].sum(axis=1, dtype=np.int32)


def _expanded_weight_deltas(d: bytes, cdiff: bytes) -> np.ndarray:
    """Per block, the weight the expanded byte contributed to the ciphertext."""
    if len(cdiff) * 15 != len(d) * 16:
        raise LengthMismatch("ciphertext differential has the wrong length")
    e = _block_weights(cdiff, 16) - _block_weights(d, 15)
    if ((e < 0) | (e > 8)).any():
        raise InconsistentWeights("expanded-byte weight outside 0..8")
    return e


def recover_expansion_indices(d1: bytes, d2: bytes, c1diff: bytes,
                              c2diff: bytes) -> list[int | frozenset]:
    """l(k) for k = 0..B-2; ambiguous blocks yield a frozenset of candidates."""
    num = len(d1) // 15
    e1 = _expanded_weight_deltas(d1, c1diff)
    e2 = _expanded_weight_deltas(d2, c2diff)
    if e1[0] != 0 or e2[0] != 0:
        raise InconsistentWeights("block 0 must have a zero expanded differential")
    pw1 = _POP[np.frombuffer(d1, dtype=np.uint8)].reshape(num, 15)
    pw2 = _POP[np.frombuffer(d2, dtype=np.uint8)].reshape(num, 15)
    # match the pair observed for block k against block k-1's 16 positions
    hit = (pw1[:-1] == e1[1:, None]) & (pw2[:-1] == e2[1:, None])
    counts = hit.sum(axis=1)
    pos15 = (e1[:-1] == e1[1:]) & (e2[:-1] == e2[1:])
    total = counts + pos15
    if (total == 0).any():
        k = int(np.nonzero(total == 0)[0][0]) + 1
        raise InconsistentWeights(f"no position of block {k - 1} matches block {k}")
    out: list[int | frozenset] = []
    payload_pos = np.argmax(hit, axis=1)
    for k in range(num - 1):
        if total[k] == 1:
            out.append(int(payload_pos[k]) if counts[k] else 15)
        else:
            cands = {int(p) for p in np.nonzero(hit[k])[0]}
            if pos15[k]:
                cands.add(15)
            out.append(frozenset(cands))
    return out


def _amb_payload_candidate(l_entry) -> int | None:
    """The payload member of an ambiguous candidate set, else None."""
    if isinstance(l_entry, frozenset):
        payload = sorted(c for c in l_entry if c < 15)
        if len(payload) != 1 or 15 not in l_entry:
            raise UnresolvedExpansion(f"cannot neutralize candidate set {set(l_entry)}")
        return payload[0]
    return None


# ---------------------------------------------------------------------------
# Stage 2: the first eight byte-swapping bits
# ---------------------------------------------------------------------------

@dataclass
class _SwapPlan:
    pairs: tuple[int, int, int, int]
    deltas: np.ndarray  # (B, 4) signed deltas, aligned with ``pairs``


def _build_swap_differential(num_blocks: int, l_seq: Sequence,
                             target_low: bool) -> tuple[np.ndarray, _SwapPlan, list[int]]:
    """One swap-probing differential plus its per-block decode plan.

    Returns (payload rows, plan, e_chain values).  Pair p means byte pair
    (p, p+8); byte 15 of each expanded block inherits the previous block's
    differential at l(k-1), so pair 7 is threaded through the chain and pair
    deltas are re-derived per block wherever the inherited weight or an
    ambiguous candidate position interferes.
    """
    pairs = (0, 1, 2, 3) if target_low else (4, 5, 6, 7)
    payload = np.zeros((num_blocks, 15), dtype=np.uint8)
    deltas = np.zeros((num_blocks, 4), dtype=np.int16)
    e_chain = [0] * num_blocks
    e_val = 0
    for k in range(num_blocks):
        e_chain[k] = e_val
        w_e = e_val.bit_count()
        row = payload[k]
        amb_c = _amb_payload_candidate(l_seq[k]) if k < len(l_seq) else None
        pr = amb_c % 8 if amb_c is not None else None
        d: dict[int, int] = {}

        if target_low:
            row[7] = e_val  # pair 7 stays delta-0 under the chain
            if pr is not None and pr in pairs:
                # forced byte at the candidate: delta magnitude from its weight
                if amb_c < 8:
                    w_p = 0 if w_e >= 1 else 8
                    row[pr] = e_val
                    row[pr + 8] = _weight_byte(w_p)
                    d[pr] = w_e - w_p
                else:
                    w_p = 0 if w_e >= 1 else 8
                    row[amb_c] = e_val
                    row[pr] = _weight_byte(w_p)
                    d[pr] = w_p - w_e
                mag = abs(d[pr])
                rest = [p for p in pairs if p != pr]
                for p, mg in zip(rest, _COMPANIONS[mag]):
                    row[p] = _weight_byte(mg)
                    d[p] = mg
            else:
                for p, mg in zip(pairs, _CANONICAL_DELTAS):
                    row[p] = _weight_byte(mg)
                    d[p] = mg
                if pr is not None:  # candidate sits in a delta-0 pair or is 7
                    if pr != 7:
                        row[amb_c] = e_val
                        row[amb_c ^ 8] = e_val
                    # pr == 7 needs nothing: row[7] = e_val already
        else:
            if amb_c == 7:
                # pair (7, 15) forced equal: its bit cannot be observed here
                row[7] = e_val
                for p, mg in zip((4, 5, 6), (4, 5, 6)):
                    row[p] = _weight_byte(mg)
                    d[p] = mg
                d[7] = 0
            elif pr is not None and pr in (4, 5, 6):
                # doubly constrained: candidate pair and pair 7 both forced
                w_c = w_e - 2 if w_e >= 2 else w_e + 2
                if amb_c < 8:
                    row[pr] = e_val
                    row[pr + 8] = _weight_byte(w_c)
                    d[pr] = w_e - w_c
                else:
                    row[amb_c] = e_val
                    row[pr] = _weight_byte(w_c)
                    d[pr] = w_c - w_e
                w7 = w_e - 4 if w_e >= 4 else w_e + 4
                row[7] = _weight_byte(w7)
                d[7] = w7 - w_e
                rest = [p for p in (4, 5, 6) if p != pr]
                for p, mg in zip(rest, (7, 8)):
                    row[p] = _weight_byte(mg)
                    d[p] = mg
            else:
                if w_e == 8:
                    d[7] = -8
                    row[7] = 0x00
                else:
                    d[7] = 8 - w_e
                    row[7] = 0xFF
                comp = _CANONICAL_DELTAS[:3] if w_e == 0 else _COMPANIONS[abs(d[7])]
                for p, mg in zip((4, 5, 6), comp):
                    row[p] = _weight_byte(mg)
                    d[p] = mg
                if pr is not None:  # candidate in a delta-0 pair of this probe
                    row[amb_c] = e_val
                    row[amb_c ^ 8] = e_val
        deltas[k] = [d.get(p, 0) for p in pairs]

        if k < len(l_seq):
            l = l_seq[k]
            if isinstance(l, frozenset):
                pass  # neutralized: inherited value equals e_val
            elif l < 15:
                e_val = int(row[l])
    return payload, _SwapPlan(pairs, deltas), e_chain


def gen_swap_differentials(num_blocks: int, l_seq: Sequence) -> tuple[bytes, bytes]:
    """The two differentials that break the first eight swap bits."""
    rows_a, _, _ = _build_swap_differential(num_blocks, l_seq, target_low=True)
    rows_b, _, _ = _build_swap_differential(num_blocks, l_seq, target_low=False)
    return rows_a.tobytes(), rows_b.tobytes()


_DECODE_CANONICAL = {}
for _p in range(16):
    _s = sum((1 - 2 * ((_p >> _i) & 1)) * _CANONICAL_DELTAS[_i] for _i in range(4))
    _DECODE_CANONICAL[_s] = tuple((_p >> _i) & 1 for _i in range(4))


def decode_swap_bits(delta_sum: int) -> tuple[int, int, int, int]:
    """Invert a signed sum of (4, 5, 6, 8) to its four swap bits."""
    try:
        return _DECODE_CANONICAL[delta_sum]
    except KeyError:
        raise InvalidDeltaSum(f"{delta_sum} is not a signed sum of (4, 5, 6, 8)") from None


def _half_weight_delta(cdiff: bytes) -> np.ndarray:
    w = _POP[np.frombuffer(cdiff, dtype=np.uint8).reshape(-1, 16)].astype(np.int32)
    return w[:, :8].sum(axis=1) - w[:, 8:].sum(axis=1)


def _recover_swap_bits(c3diff: bytes, c4diff: bytes, plan_a: _SwapPlan,
                       plan_b: _SwapPlan) -> tuple[np.ndarray, np.ndarray]:
    num = len(c3diff) // 16
    bits = np.zeros((num, 8), dtype=np.uint8)
    known = np.ones((num, 8), dtype=bool)
    for cdiff, plan in ((c3diff, plan_a), (c4diff, plan_b)):
        obs = _half_weight_delta(cdiff)
        sums = plan.deltas @ _SIGNS.T  # (B, 16)
        match = sums == obs[:, None]
        cnt = match.sum(axis=1)
        if (cnt == 0).any():
            k = int(np.nonzero(cnt == 0)[0][0])
            raise InvalidDeltaSum(
                f"block {k}: observed half-weight delta {int(obs[k])} not decodable")
        pat = np.argmax(match, axis=1)
        for i, p in enumerate(plan.pairs):
            bits[:, p] = (pat >> i) & 1
        for k in np.nonzero(cnt > 1)[0]:
            pats = np.nonzero(match[k])[0]
            for i, p in enumerate(plan.pairs):
                vals = {(int(q) >> i) & 1 for q in pats}
                if len(vals) > 1:
                    known[k, p] = False
                    bits[k, p] = 0
    return bits, known


# ---------------------------------------------------------------------------
# Stages 3-4: rotation parts
# ---------------------------------------------------------------------------

def _first8_perm(swap_bits: np.ndarray) -> np.ndarray:
    """pi[b, pos] = where pre-swap byte pos sits after the first 8 swaps."""
    num = swap_bits.shape[0]
    pi = np.tile(np.arange(16, dtype=np.int64), (num, 1))
    for i in range(8):
        m = swap_bits[:, i] == 1
        pi[m, i] = i + 8
        pi[m, i + 8] = i
    return pi


def gen_vertical_differential(num_blocks: int, l_seq: Sequence,
                              swap_bits: np.ndarray
                              ) -> tuple[bytes, np.ndarray, np.ndarray]:
    """Probe differential for the vertical part plus (chosen rows, pattern types).

    After the known first-8 swaps each half carries a single 255 among 0s
    (type 0) or a single 0 among 255s (type 1) at the chosen row; the type
    follows the inherited chain value so the expanded byte always fits the
    pattern.
    """
    payload = np.zeros((num_blocks, 15), dtype=np.uint8)
    rows_out = np.zeros(num_blocks, dtype=np.uint8)
    types = np.zeros(num_blocks, dtype=np.uint8)
    e_val = 0
    for k in range(num_blocks):
        amb_c = _amb_payload_candidate(l_seq[k]) if k < len(l_seq) else None
        banned = {amb_c % 8} if amb_c is not None else set()
        l = min(set(range(7)) - banned)
        rows_out[k] = l
        types[k] = 1 if e_val == 255 else 0
        if e_val == 0:
            pat = [0] * 16
            pat[l] = pat[8 + l] = 255
        else:
            pat = [255] * 16
            pat[l] = pat[8 + l] = 0
        for pos in range(15):
            dest = pos + 8 if (pos < 8 and swap_bits[k, pos]) else (
                pos - 8 if (pos >= 8 and swap_bits[k, pos - 8]) else pos)
            payload[k, pos] = pat[dest]
        if k < len(l_seq):
            l_k = l_seq[k]
            if not isinstance(l_k, frozenset) and l_k < 15:
                e_val = int(payload[k, l_k])
    return payload.tobytes(), rows_out, types


def _inverse_vertical(blocks: np.ndarray, rot_y: np.ndarray) -> np.ndarray:
    out = np.empty_like(blocks)
    for m in (0, 1):
        cols = _transpose_halves(np.ascontiguousarray(blocks[:, 8 * m:8 * m + 8]))
        cols = _ROT[(8 - rot_y[:, 8 * m:8 * m + 8]) & 7, cols]
        out[:, 8 * m:8 * m + 8] = _transpose_halves(cols)
    return out


def recover_vertical_part(c5diff: bytes, chosen_rows: np.ndarray,
                          types: np.ndarray) -> np.ndarray:
    """Per block, 16 column amounts (true amount plus the half's offset)."""
    arr = np.frombuffer(c5diff, dtype=np.uint8).reshape(-1, 16)
    rot_y = np.empty((arr.shape[0], 16), dtype=np.uint8)
    for m in (0, 1):
        cols = _transpose_halves(np.ascontiguousarray(arr[:, 8 * m:8 * m + 8]))
        probe = np.where(types[:, None] == 0, cols, ~cols & 0xFF)
        pos = _SINGLE[probe].astype(np.int16)
        if (pos < 0).any():
            k, j = np.argwhere(pos < 0)[0]
            raise MalformedColumn(f"block {k} half {m} column {j} is not single-bit")
        rot_y[:, 8 * m:8 * m + 8] = (pos - chosen_rows[:, None]) % 8
    return rot_y


def gen_horizontal_differential(num_blocks: int, l_seq: Sequence
                                ) -> tuple[bytes, list[list[int]]]:
    """All-0x01 probe differential; returns it plus per-block zero positions.

    Positions listed per block are pre-swap positions whose differential is
    forced to zero: the expanded byte while the chain is still rooted in
    block 0, which only ever affects the discarded byte.  (An ambiguous
    block always has a payload-sourced, hence nonzero, chain value, so a
    neutralized candidate never goes dark; the candidate entry below is
    defensive.)
    """
    payload = np.ones((num_blocks, 15), dtype=np.uint8)
    zero_positions: list[list[int]] = []
    e_val = 0
    for k in range(num_blocks):
        zp = []
        if e_val == 0:
            zp.append(15)
        amb_c = _amb_payload_candidate(l_seq[k]) if k < len(l_seq) else None
        if amb_c is not None:
            payload[k, amb_c] = e_val
            if e_val == 0:
                zp.append(amb_c)
        zero_positions.append(zp)
        if k < len(l_seq):
            l = l_seq[k]
            if not isinstance(l, frozenset) and l < 15:
                e_val = int(payload[k, l])
    return payload.tobytes(), zero_positions


def recover_horizontal_part(c6diff: bytes, rot_y: np.ndarray,
                            swap_bits: np.ndarray,
                            zero_positions: list[list[int]]
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Per block, 16 row amounts in the vertical part's frame, plus validity."""
    arr = np.frombuffer(c6diff, dtype=np.uint8).reshape(-1, 16)
    num = arr.shape[0]
    d1 = _inverse_vertical(arr, rot_y)
    pos = _SINGLE[d1].astype(np.int16)
    known = pos >= 0
    bad = (pos < 0) & (d1 != 0)
    if bad.any():
        k, i = np.argwhere(bad)[0]
        raise MalformedRow(f"block {k} row {i} is neither single-bit nor empty")
    # a zero row must appear exactly where a zero-differential byte landed
    expected = np.zeros((num, 2), dtype=np.int64)
    pi = _first8_perm(swap_bits)
    for k, zps in enumerate(zero_positions):
        for z in zps:
            expected[k, pi[k, z] // 8] += 1
    got = np.stack([(~known[:, :8]).sum(axis=1), (~known[:, 8:]).sum(axis=1)], axis=1)
    if (expected != got).any():
        k = int(np.nonzero((expected != got).any(axis=1))[0][0])
        raise MalformedRow(f"block {k}: zero-row count mismatch {got[k]} != {expected[k]}")
    return (pos % 8).astype(np.uint8), known


# ---------------------------------------------------------------------------
# Stage 5: within-half byte-swap part
# ---------------------------------------------------------------------------

def _inverse_rotations(blocks: np.ndarray, rot_x: np.ndarray,
                       rot_y: np.ndarray) -> np.ndarray:
    return _ROT[(8 - rot_x) & 7, _inverse_vertical(blocks, rot_y)]


def _chain_values(diff: bytes, l_seq: Sequence, num_blocks: int) -> np.ndarray:
    """Inherited differential byte per block for an already-sent differential."""
    rows = np.frombuffer(diff, dtype=np.uint8).reshape(num_blocks, 15)
    e = np.zeros(num_blocks, dtype=np.uint8)
    val = 0
    for k in range(num_blocks):
        e[k] = val
        if k < len(l_seq):
            l = l_seq[k]
            if isinstance(l, frozenset):
                c = min(x for x in l if x < 15)
                val = int(rows[k, c])  # equals the inherited value by construction
            elif l < 15:
                val = int(rows[k, l])
    return e


@dataclass
class _PermChoice:
    """An unresolved two-way assignment inside one block's byte-swap part."""
    block: int
    kind: str                      # "perm" or "swapbit11"
    half: int = 0
    sources: tuple[int, int] = (0, 0)   # within-half source rows (perm kind)


def recover_byteswap_part(d1: bytes, d2: bytes, c1diff: bytes, c2diff: bytes,
                          l_seq: Sequence, swap_bits: np.ndarray,
                          rot_x: np.ndarray, rotx_known: np.ndarray,
                          rot_y: np.ndarray
                          ) -> tuple[np.ndarray, list[_PermChoice]]:
    """Per block, the two within-half permutations (source row -> frame row)."""
    num = len(d1) // 15
    pi = _first8_perm(swap_bits)
    f16_1 = np.column_stack([np.frombuffer(d1, np.uint8).reshape(num, 15),
                             _chain_values(d1, l_seq, num)])
    f16_2 = np.column_stack([np.frombuffer(d2, np.uint8).reshape(num, 15),
                             _chain_values(d2, l_seq, num)])
    exp1 = np.take_along_axis(f16_1, pi, axis=1).astype(np.int32)
    exp2 = np.take_along_axis(f16_2, pi, axis=1).astype(np.int32)
    obs1 = _inverse_rotations(np.frombuffer(c1diff, np.uint8).reshape(num, 16),
                              rot_x, rot_y).astype(np.int32)
    obs2 = _inverse_rotations(np.frombuffer(c2diff, np.uint8).reshape(num, 16),
                              rot_x, rot_y).astype(np.int32)
    perms = np.zeros((num, 2, 8), dtype=np.uint8)
    choices: list[_PermChoice] = []
    for m in (0, 1):
        sl = slice(8 * m, 8 * m + 8)
        ek = exp1[:, sl] * 256 + exp2[:, sl]
        ok = obs1[:, sl] * 256 + obs2[:, sl]
        order_e = np.argsort(ek, axis=1, kind="stable")
        order_o = np.argsort(ok, axis=1, kind="stable")
        np.put_along_axis(perms[:, m, :], order_e.astype(np.uint8),
                          order_o.astype(np.uint8), axis=1)
        se = np.take_along_axis(ek, order_e, axis=1)
        so = np.take_along_axis(ok, order_o, axis=1)
        dup = (se[:, 1:] == se[:, :-1]).any(axis=1)
        partial = ~rotx_known[:, sl].all(axis=1)
        clean_bad = (se != so).any(axis=1) & ~dup & ~partial
        if clean_bad.any():
            k = int(np.nonzero(clean_bad)[0][0])
            raise AmbiguousMatch(f"block {k} half {m}: byte values do not match")
        for k in np.nonzero(dup | partial)[0]:
            _match_half_fallback(int(k), m, ek[k], ok[k], rotx_known[k, sl],
                                 perms, choices)
    return perms, choices


def _match_half_fallback(k: int, m: int, exp_keys: np.ndarray, obs_keys: np.ndarray,
                         row_ok: np.ndarray, perms: np.ndarray,
                         choices: list[_PermChoice]) -> None:
    rows_by_val: dict[int, list[int]] = {}
    for r in range(8):
        if row_ok[r]:
            rows_by_val.setdefault(int(obs_keys[r]), []).append(r)
    srcs_by_val: dict[int, list[int]] = {}
    for s in range(8):
        srcs_by_val.setdefault(int(exp_keys[s]), []).append(s)
    leftover: list[int] = []
    for val, srcs in srcs_by_val.items():
        rows = rows_by_val.get(val, [])
        if len(rows) > len(srcs) or len(srcs) > 2:
            raise AmbiguousMatch(
                f"block {k} half {m}: byte value multiplicity mismatch")
        for s, r in zip(srcs, rows):
            perms[k, m, s] = r
        leftover.extend(srcs[len(rows):])
        if len(srcs) == 2:
            # equal probe values: the two sources are interchangeable here
            choices.append(_PermChoice(k, "perm", m, (srcs[0], srcs[1])))
    unknown_rows = [r for r in range(8) if not row_ok[r]]
    if len(leftover) != len(unknown_rows) or len(leftover) > 2:
        raise AmbiguousMatch(f"block {k} half {m}: unmatched byte values")
    for s, r in zip(leftover, unknown_rows):
        perms[k, m, s] = r
    if len(leftover) == 2 and exp_keys[leftover[0]] != exp_keys[leftover[1]]:
        choices.append(_PermChoice(k, "perm", m, (leftover[0], leftover[1])))


# ---------------------------------------------------------------------------
# Stage 6: masking part
# ---------------------------------------------------------------------------

def _temp_values(base: bytes, l_seq: Sequence, num_blocks: int
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Absolute expanded bytes of the base plaintext, where derivable."""
    rows = np.frombuffer(base, dtype=np.uint8).reshape(num_blocks, 15)
    vals = np.zeros(num_blocks, dtype=np.uint8)
    known = np.zeros(num_blocks, dtype=bool)
    val, ok = 0, False  # block 0 inherits the unknown secret byte
    for k in range(num_blocks):
        vals[k], known[k] = val, ok
        if k < len(l_seq):
            l = l_seq[k]
            if isinstance(l, frozenset):
                # known only when both candidate positions agree on the value
                c = min(x for x in l if x < 15)
                ok = ok and int(rows[k, c]) == val
                val = val if ok else 0
            elif l < 15:
                val, ok = int(rows[k, l]), True
    return vals, known


def recover_masking_part(base: bytes, c0: bytes, l_seq: Sequence,
                         swap_bits: np.ndarray, perms: np.ndarray,
                         rot_x: np.ndarray, rotx_known: np.ndarray,
                         rot_y: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mask bytes in the frame of the recovered parts, plus validity flags.

    Also returns the plaintext-side frame bytes and their validity so the
    two-way choices left by earlier stages can be re-tested cheaply.
    """
    num = len(base) // 15
    pi = _first8_perm(swap_bits)
    temps, temps_known = _temp_values(base, l_seq, num)
    f16 = np.column_stack([np.frombuffer(base, np.uint8).reshape(num, 15), temps])
    f16_known = np.ones((num, 16), dtype=bool)
    f16_known[:, 15] = temps_known
    fstar = np.take_along_axis(f16, pi, axis=1)
    fstar_known = np.take_along_axis(f16_known, pi, axis=1)
    ghat = np.zeros((num, 16), dtype=np.uint8)
    ghat_known = np.zeros((num, 16), dtype=bool)
    for m in (0, 1):
        sl = slice(8 * m, 8 * m + 8)
        np.put_along_axis(ghat[:, sl], perms[:, m, :], fstar[:, sl], axis=1)
        np.put_along_axis(ghat_known[:, sl], perms[:, m, :], fstar_known[:, sl], axis=1)
    d2 = _inverse_rotations(np.frombuffer(c0, np.uint8).reshape(num, 16), rot_x, rot_y)
    seed = ghat ^ d2
    seed_known = ghat_known & rotx_known
    return seed, seed_known, ghat, d2


def _mask_structure_score(seed_row: np.ndarray, known_row) -> tuple[int, int]:
    """Complement-class counts of one block's mask: (plane words, bytes).

    A correctly recovered mask is built from two 16-bit plane seeds, so its
    eight bit-plane words fall into at most two complement classes and its
    sixteen bytes into at most two as well; a mis-assigned byte pair strictly
    increases at least one count unless the two bytes differ in one of four
    degenerate patterns.  Scores stay valid under any cyclic re-indexing of
    the byte positions.
    """
    mask = 0
    for p in range(16):
        if known_row[p]:
            mask |= 1 << p
    if mask == 0:
        return (0, 0)
    plane_keys = set()
    for j in range(8):
        w = 0
        for p in range(16):
            if known_row[p]:
                w |= ((int(seed_row[p]) >> j) & 1) << p
        plane_keys.add(min(w, ~w & mask))
    byte_keys = {min(int(seed_row[p]), int(seed_row[p]) ^ 0xFF)
                 for p in range(16) if known_row[p]}
    return (len(plane_keys), len(byte_keys))


# ---------------------------------------------------------------------------
# Equivalent key and its decryptor
# ---------------------------------------------------------------------------

@dataclass
class EquivalentKey:
    """Everything the attack recovers, per block, in a self-consistent frame."""

    num_blocks: int
    l_values: np.ndarray          # (B,) int16; -1 where unknown or ambiguous
    l_candidates: dict[int, frozenset]
    swap_bits: np.ndarray         # (B, 8) uint8
    swap_known: np.ndarray        # (B, 8) bool
    perms: np.ndarray             # (B, 2, 8) uint8, source row -> frame row
    seed_star: np.ndarray         # (B, 16) uint8
    seed_known: np.ndarray        # (B, 16) bool
    rot_x: np.ndarray             # (B, 16) uint8
    rotx_known: np.ndarray        # (B, 16) bool
    rot_y: np.ndarray             # (B, 16) uint8
    unreliable_blocks: frozenset = frozenset()

    def __post_init__(self):
        for m in (0, 1):
            if not (np.sort(self.perms[:, m, :], axis=1)
                    == np.arange(8, dtype=np.uint8)).all():
                raise AmbiguousMatch("byte-swap parts must be bijections")


def ees_decrypt(cipher: bytes, ek: EquivalentKey) -> bytes:
    """Decrypt with the recovered parts; payload bytes are exact."""
    if len(cipher) % 16 != 0:
        raise NonDivisibleLength(f"ciphertext length {len(cipher)} not divisible by 16")
    num = len(cipher) // 16
    if num > ek.num_blocks:
        raise CiphertextTooLong(f"{num} blocks but key covers {ek.num_blocks}")
    if num == 0:
        return b""
    arr = np.frombuffer(bytes(cipher), dtype=np.uint8).reshape(num, 16)
    arr = _inverse_rotations(arr, ek.rot_x[:num], ek.rot_y[:num])
    arr ^= ek.seed_star[:num]
    out = np.empty_like(arr)
    for m in (0, 1):
        sl = slice(8 * m, 8 * m + 8)
        out[:, sl] = np.take_along_axis(arr[:, sl], ek.perms[:num, m, :], axis=1)
    for i in range(8):
        m = ek.swap_bits[:num, i] == 1
        tmp = out[m, i]
        out[m, i] = out[m, i + 8]
        out[m, i + 8] = tmp
    return np.ascontiguousarray(out[:, :15]).tobytes()


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class DifferentialPlan:
    """The base plaintext and the six differentials the attack sent."""

    base: bytes
    expansion: tuple[bytes, bytes]
    swap: tuple[bytes, bytes]
    vertical: bytes
    horizontal: bytes

    def chosen_plaintexts(self) -> list[bytes]:
        diffs = [*self.expansion, *self.swap, self.vertical, self.horizontal]
        return [self.base] + [bytes(a ^ b for a, b in zip(self.base, d)) for d in diffs]


def _xor(a: bytes, b: bytes) -> bytes:
    return (np.frombuffer(a, np.uint8) ^ np.frombuffer(b, np.uint8)).tobytes()


def _resolve_choices(choices: list[_PermChoice], ek: EquivalentKey,
                     ghat: np.ndarray, d2: np.ndarray) -> None:
    """Settle two-way assignments using the mask's complement-class structure.

    The correct assignment never has more plane or byte classes than the
    wrong one, so the hypothesis with the lexicographically smaller score
    wins; a tie with differing bytes is flagged, a tie with equal bytes is
    harmless either way.
    """
    unreliable = set(ek.unreliable_blocks)
    for ch in choices:
        k = ch.block
        if ch.kind == "swapbit11":
            r1 = int(ek.perms[k, 0, 7])
            r2 = 8 + int(ek.perms[k, 1, 7])
        else:
            r1 = 8 * ch.half + int(ek.perms[k, ch.half, ch.sources[0]])
            r2 = 8 * ch.half + int(ek.perms[k, ch.half, ch.sources[1]])
        gh = ghat[k].copy()
        score_cur = _mask_structure_score(gh ^ d2[k], ek.seed_known[k])
        gh[r1], gh[r2] = gh[r2], gh[r1]
        score_swp = _mask_structure_score(gh ^ d2[k], ek.seed_known[k])
        resolved = True
        if score_swp < score_cur:
            ghat[k, r1], ghat[k, r2] = ghat[k, r2], ghat[k, r1]
            ek.seed_star[k] = ghat[k] ^ d2[k]
            if ch.kind == "swapbit11":
                ek.swap_bits[k, 7] ^= 1
            else:
                s_a, s_b = ch.sources
                pa, pb = ek.perms[k, ch.half, s_a], ek.perms[k, ch.half, s_b]
                ek.perms[k, ch.half, s_a], ek.perms[k, ch.half, s_b] = pb, pa
        elif score_cur == score_swp:
            if ghat[k, r1] != ghat[k, r2]:
                unreliable.add(k)
                resolved = False
        if ch.kind == "swapbit11" and resolved:
            ek.swap_known[k, 7] = True
    ek.unreliable_blocks = frozenset(unreliable)


def run_attack(oracle: EncryptionOracle, base: bytes) -> EquivalentKey:
    """Run the full attack with exactly seven oracle queries."""
    if len(base) % 15 != 0:
        raise NonDivisibleLength(f"base plaintext length {len(base)} not divisible by 15")
    num = len(base) // 15
    if num == 0:
        raise NonDivisibleLength("base plaintext must contain at least one block")
    base = bytes(base)

    def query(stage: str, plaintext: bytes) -> bytes:
        out = oracle(plaintext)
        if len(out) != 16 * num:
            raise AttackFailed(stage, f"oracle returned {len(out)} bytes, "
                                      f"expected {16 * num}")
        return out

    c0 = query("oracle", base)
    d1, d2 = gen_expansion_differentials(num)
    c1 = _xor(query("expansion", _xor(base, d1)), c0)
    c2 = _xor(query("expansion", _xor(base, d2)), c0)
    try:
        l_seq = recover_expansion_indices(d1, d2, c1, c2)
    except InconsistentWeights as exc:
        raise AttackFailed("expansion", str(exc)) from exc

    rows_a, plan_a, _ = _build_swap_differential(num, l_seq, target_low=True)
    rows_b, plan_b, _ = _build_swap_differential(num, l_seq, target_low=False)
    c3 = _xor(query("swap-bits", _xor(base, rows_a.tobytes())), c0)
    c4 = _xor(query("swap-bits", _xor(base, rows_b.tobytes())), c0)
    try:
        swap_bits, swap_known = _recover_swap_bits(c3, c4, plan_a, plan_b)
    except InvalidDeltaSum as exc:
        raise AttackFailed("swap-bits", str(exc)) from exc

    d5, chosen_rows, types = gen_vertical_differential(num, l_seq, swap_bits)
    c5 = _xor(query("vertical", _xor(base, d5)), c0)
    try:
        rot_y = recover_vertical_part(c5, chosen_rows, types)
    except MalformedColumn as exc:
        raise AttackFailed("vertical", str(exc)) from exc

    d6, zero_positions = gen_horizontal_differential(num, l_seq)
    c6 = _xor(query("horizontal", _xor(base, d6)), c0)
    try:
        rot_x, rotx_known = recover_horizontal_part(c6, rot_y, swap_bits, zero_positions)
    except MalformedRow as exc:
        raise AttackFailed("horizontal", str(exc)) from exc

    try:
        perms, choices = recover_byteswap_part(d1, d2, c1, c2, l_seq, swap_bits,
                                               rot_x, rotx_known, rot_y)
    except AmbiguousMatch as exc:
        raise AttackFailed("byte-swap", str(exc)) from exc
    for k in np.nonzero(~swap_known[:, 7])[0]:
        choices.append(_PermChoice(int(k), "swapbit11"))

    seed, seed_known, ghat, d2abs = recover_masking_part(
        base, c0, l_seq, swap_bits, perms, rot_x, rotx_known, rot_y)

    l_values = np.full(num, -1, dtype=np.int16)
    l_candidates: dict[int, frozenset] = {}
    for k, l in enumerate(l_seq):
        if isinstance(l, frozenset):
            l_candidates[k] = l
        else:
            l_values[k] = l
    ek = EquivalentKey(num, l_values, l_candidates, swap_bits, swap_known,
                       perms, seed, seed_known, rot_x, rotx_known, rot_y)
    _resolve_choices(choices, ek, ghat, d2abs)
    return ek


def build_plan(num_blocks: int, l_seq: Sequence, swap_bits: np.ndarray,
               base: bytes) -> DifferentialPlan:
    """Reconstruct the plaintext-differential plan the attack would send."""
    d1, d2 = gen_expansion_differentials(num_blocks)
    a, b = gen_swap_differentials(num_blocks, l_seq)
    d5, _, _ = gen_vertical_differential(num_blocks, l_seq, swap_bits)
    d6, _ = gen_horizontal_differential(num_blocks, l_seq)
    return DifferentialPlan(base, (d1, d2), (a, b), d5, d6)
