#!/usr/bin/env python3
"""Run the p = 11 fixture pipeline for several lift seeds and report agreement."""
import argparse
import json
import time
import warnings

from artifact.cli import precision_ledger
from artifact.darmon import DarmonParams, darmon_point, embedding_from_matrix
from artifact.quatalg import fixture_datum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3, help="Riemann depth")
    ap.add_argument("--N", type=int, default=6, help="working precision")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--embedding", default="[[0,4],[2,0]]", help="i_p(psi(sqrt 8))")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        datum = fixture_datum(11)
    emb = embedding_from_matrix(datum, 8, 1, json.loads(args.embedding))
    results = []
    for seed in args.seeds:
        t0 = time.time()
        params = DarmonParams(n=args.n, N=args.N, seed=seed, fill="zero" if seed == 0 else "random")
        res = darmon_point(datum, emb, params, workers=args.workers)
        results.append(res)
        print(f"seed {seed}: {res.value[0]}  ({time.time() - t0:.1f}s)")
    print("ledger:", precision_ledger(results[0], results[0].metadata["t"], 11))
    for a, b in zip(args.seeds, args.seeds[1:]):
        i, j = args.seeds.index(a), args.seeds.index(b)
        print(f"seeds {a} and {b} agree mod 11^{results[i].agreement(results[j]):g}")


if __name__ == "__main__":
    main()
