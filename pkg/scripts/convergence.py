#!/usr/bin/env python3
"""Depth sweep: how many 11-adic digits consecutive depths share."""
import argparse
import time
import warnings

import numpy as np

from artifact.darmon import DarmonParams, darmon_integral, darmon_point, embedding_from_matrix, fixed_point, gamma_psi
from artifact.quatalg import fixture_datum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-depth", type=int, default=3)
    ap.add_argument("--N", type=int, default=6)
    ap.add_argument("--random-samples", type=int, default=1, help="randomized re-runs per depth")
    args = ap.parse_args()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        datum = fixture_datum(11)
    emb = embedding_from_matrix(datum, 8, 1, [[0, 4], [2, 0]])
    z, _ = fixed_point(datum, emb, args.N)
    g = gamma_psi(datum, emb)
    cache, prev = {}, None
    print(f"{'n':>2} {'time':>7} {'vs n-1':>7} {'random':>7}  value")
    for n in range(1, args.max_depth + 1):
        t0 = time.time()
        res = darmon_point(datum, emb, DarmonParams(n=n, N=args.N), cache=cache)
        L, t, _ = next(v for k, v in cache.items() if v[0].n == n)
        rand = min(
            (res.agreement(darmon_integral(L, g, z, t, rng=np.random.default_rng(s))) for s in range(args.random_samples)),
            default=float("nan"),
        )
        step = res.agreement(prev) if prev else float("nan")
        print(f"{n:>2} {time.time() - t0:>6.1f}s {step:>7g} {rand:>7g}  {res.value[0]}")
        prev = res


if __name__ == "__main__":
    main()
