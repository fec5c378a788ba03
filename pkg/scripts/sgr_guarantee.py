"""Monte Carlo check of the selective risk guarantee.

Each trial draws an independent validation/test split with Bernoulli(rate)
failures, selects a threshold on validation, and measures the selective risk
on test. The fraction of trials whose test risk exceeds r_star must stay at
or below delta (up to MC noise).
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fdeval import sgr_select
from fdeval.errors import NoFeasibleThreshold


def run(trials, n, rate, r_star, delta, seed0):
    violations = 0
    abstained = 0
    coverages = []
    bounds = []
    for t in range(trials):
        rng = np.random.default_rng(seed0 + t)
        val_conf = rng.random(n)
        val_res = (rng.random(n) < rate).astype(int)
        test_conf = rng.random(n)
        test_res = (rng.random(n) < rate).astype(int)
        try:
            sel = sgr_select(val_conf, val_res, r_star=r_star, delta=delta)
        except NoFeasibleThreshold:
            abstained += 1
            continue
        coverages.append(sel.empirical_coverage)
        bounds.append(sel.risk_bound)
        keep = test_conf >= sel.threshold
        if keep.sum() and float(test_res[keep].mean()) > r_star:
            violations += 1
    freq = violations / trials
    print(
        f"delta={delta:<6g} violations={violations}/{trials} (freq {freq:.4f})"
        f" abstained={abstained}"
        f" mean_coverage={np.mean(coverages) if coverages else float('nan'):.3f}"
        f" mean_bound={np.mean(bounds) if bounds else float('nan'):.4f}"
    )
    return freq


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--rate", type=float, default=0.1)
    ap.add_argument("--rstar", type=float, default=0.15)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.1, 0.01])
    args = ap.parse_args()

    seed0 = int(os.environ.get("FDSHIFT_SEED", "100000"))
    print(f"trials={args.trials} n={args.n} rate={args.rate:g} r_star={args.rstar:g} seed0={seed0}")
    ok = True
    for delta in args.deltas:
        freq = run(args.trials, args.n, args.rate, args.rstar, delta, seed0)
        ok = ok and freq <= delta + 0.03
    print("guarantee held" if ok else "guarantee VIOLATED")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
