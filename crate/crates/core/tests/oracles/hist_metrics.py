#!/usr/bin/env python3
"""Independent brute-force evaluation of the four histogram metrics.

Writes 1000 random normalized histogram pairs (22 buckets, about 30% empty
buckets) and their metric values to a CSV consumed by the Rust tests:

    python3 hist_metrics.py > ../fixtures/hist_metric_pairs.csv

Columns: t0..t21 (truth), p0..p21 (prediction), intersection, correlation,
bhattacharyya, kl. Values are written with repr(), which round-trips.
"""

import math
import random
import sys

K = 22
PAIRS = 1000
EPS = 1e-10


def random_hist(rng):
    while True:
        raw = [0.0 if rng.random() < 0.3 else rng.random() for _ in range(K)]
        total = sum(raw)
        if total > 0:
            return [v / total for v in raw]


def intersection(t, p):
    return sum(min(a, b) for a, b in zip(t, p))


def correlation(t, p):
    mt = sum(t) / K
    mp = sum(p) / K
    cov = sum((a - mt) * (b - mp) for a, b in zip(t, p))
    vt = sum((a - mt) ** 2 for a in t)
    vp = sum((b - mp) ** 2 for b in p)
    if vt == 0 or vp == 0:
        return 1.0 if t == p else 0.0
    return max(-1.0, min(1.0, cov / math.sqrt(vt * vp)))


def bhattacharyya(t, p):
    bc = sum(math.sqrt(a * b) for a, b in zip(t, p))
    return math.sqrt(max(0.0, 1.0 - bc))


def kl(t, p):
    return max(0.0, sum(a * math.log(a / (b + EPS)) for a, b in zip(t, p) if a > 0))


def main():
    rng = random.Random(20240611)
    header = [f"t{i}" for i in range(K)] + [f"p{i}" for i in range(K)]
    header += ["intersection", "correlation", "bhattacharyya", "kl"]
    out = sys.stdout
    out.write(",".join(header) + "\n")
    for _ in range(PAIRS):
        t = random_hist(rng)
        p = random_hist(rng)
        row = t + p + [intersection(t, p), correlation(t, p), bhattacharyya(t, p), kl(t, p)]
        out.write(",".join(repr(v) for v in row) + "\n")


if __name__ == "__main__":
    main()
