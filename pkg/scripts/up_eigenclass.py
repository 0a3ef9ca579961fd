#!/usr/bin/env python3
"""U_p on the lifted cocycle: eigenvalue +1 modulo coboundary, and its effect on the integral.

The lift itself is not an eigenvector on X.  Pushed down to P^1 the difference
U L - L is a coboundary gamma m' - m', and the integral moves by t·mass(m')·log(eps).
"""
import argparse
import time
import warnings
from fractions import Fraction

from artifact.darmon import DarmonParams, darmon_integral, embedding_from_matrix, fixed_point, fundamental_unit, gamma_psi, pipeline_cocycle
from artifact.lift import eigen_coboundary, lift_cocycle, up_operator
from artifact.padic import QuadFieldElement, iwasawa_log
from artifact.quatalg import fixture_datum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--N", type=int, default=6)
    args = ap.parse_args()
    p = 11

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        datum = fixture_datum(p)
    t0 = time.time()
    _, _, mu = pipeline_cocycle(datum, DarmonParams(n=args.n, N=args.N))
    gens = {i: mu.value(g, args.n) for i, g in enumerate(datum.gamma0_generators)}
    L = lift_cocycle(datum, gens, args.n, args.N)
    U = up_operator(datum, L)
    for a in (1, -1, 0, 2):
        print(f"a_p = {a:>2d}: U L - a L is a P^1 coboundary: {eigen_coboundary(datum, L, U, a) is not None}")
    m = eigen_coboundary(datum, L, U, 1)
    mass = int(m.sum()) % p**args.N

    emb = embedding_from_matrix(datum, 8, 1, [[0, 4], [2, 0]])
    z, _ = fixed_point(datum, emb, args.N)
    g = gamma_psi(datum, emb)
    eps = fundamental_unit(8, 1)
    e = QuadFieldElement.from_pair(Fraction(eps.X, 2), Fraction(eps.Y, 2), p, 8, args.N)
    base = darmon_integral(L, g, z, 12)
    moved = darmon_integral(U, g, z, 12)
    corr = iwasawa_log(e) * (12 * mass)
    print(f"integral(L)               = {base.value[0]}")
    print(f"integral(U L) - correction = {(moved.value[0] - corr)}")
    print(f"agreement mod 11^{(moved.value[0] - corr).diff_valuation(base.value[0]):g}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
