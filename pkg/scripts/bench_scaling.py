#!/usr/bin/env python3
"""Attack wall-time scaling: the seven-query attack is linear in the
plaintext size, same as one encryption pass.

Usage: python scripts/bench_scaling.py [--min-exp 10 --max-exp 14 --seed 0]
"""

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mcs.attack import run_attack
from mcs.cipher import decrypt, encrypt
from mcs.core import Fixed129, SecretKey, legal_alpha_beta_pairs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--min-exp", type=int, default=10)
    ap.add_argument("--max-exp", type=int, default=14)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    pairs = legal_alpha_beta_pairs()
    rows = []
    print(f"{'bytes':>9} {'encrypt':>9} {'decrypt':>9} {'attack':>9} "
          f"{'attack/enc':>10}")
    for e in range(args.min_exp, args.max_exp + 1):
        n = 15 * 2 ** e
        key = SecretKey(*pairs[rng.integers(0, 21)], *pairs[rng.integers(0, 21)],
                        int(rng.integers(0, 256)),
                        Fixed129(int.from_bytes(rng.bytes(17), "big") >> 7))
        plain = rng.bytes(n)
        samples = []
        for _ in range(3):
            t0 = time.perf_counter()
            cipher = encrypt(plain, key)
            t1 = time.perf_counter()
            decrypt(cipher, key)
            t2 = time.perf_counter()
            run_attack(lambda p: encrypt(p, key), plain)
            t3 = time.perf_counter()
            samples.append((t1 - t0, t2 - t1, t3 - t2))
        enc, dec, atk = (sorted(s[i] for s in samples)[1] for i in range(3))
        rows.append((n, atk))
        print(f"{n:>9} {enc:>9.4f} {dec:>9.4f} {atk:>9.4f} {atk / enc:>10.1f}")
    xs = [math.log2(n) for n, _ in rows]
    ys = [math.log2(t) for _, t in rows]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / \
        sum((x - mx) ** 2 for x in xs)
    print(f"per-doubling time ratio (least squares): {2 ** slope:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
