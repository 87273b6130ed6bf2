"""Brute-force reference values for the histogram metrics.

Writes `crates/core/tests/data/hist_oracle.csv`: one row per random pair of
normalized histograms with the expected intersection, correlation,
Bhattacharyya distance and KL divergence. Bucket counts vary from 1 to 22
and about a third of the buckets are exact zeros. The Bhattacharyya
distance `sqrt(1 - sum(sqrt(t * p)))` is evaluated in its equivalent
cancellation-free form `sqrt(sum((sqrt(t) - sqrt(p))**2) / 2)`.

    python3 scripts/hist_oracle.py
"""

import csv
import math
import pathlib

import numpy as np
from scipy import special, stats

KL_EPSILON = 1e-10
PAIRS = 1000
OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/data/hist_oracle.csv"


def random_histogram(rng, k):
    h = rng.exponential(size=k)
    h[rng.random(k) < 0.33] = 0.0
    if h.sum() == 0.0:
        h[rng.integers(k)] = 1.0
    return h / h.sum()


def correlation(t, p):
    if np.ptp(t) == 0.0 or np.ptp(p) == 0.0:
        return 1.0 if np.array_equal(t, p) else 0.0
    return float(stats.pearsonr(t, p).statistic)


def main():
    rng = np.random.default_rng(20240607)
    with OUT.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["truth", "pred", "intersection", "correlation", "bhattacharyya", "kl_divergence"])
        for i in range(PAIRS):
            k = int(rng.integers(1, 23))
            t = random_histogram(rng, k)
            # Every tenth pair compares a histogram with itself.
            p = t.copy() if i % 10 == 0 else random_histogram(rng, k)
            row = [
                float(np.minimum(t, p).sum()),
                correlation(t, p),
                math.sqrt(0.5 * sum((math.sqrt(a) - math.sqrt(b)) ** 2 for a, b in zip(t, p))),
                max(0.0, float(special.rel_entr(t, p + KL_EPSILON).sum())),
            ]
            w.writerow([" ".join(repr(float(v)) for v in t), " ".join(repr(float(v)) for v in p)] + [repr(v) for v in row])


if __name__ == "__main__":
    main()
