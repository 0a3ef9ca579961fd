"""Acceptance criteria for the p = 11 fixture, one PASS/FAIL line each.

Depth-4 lifts are shared through the session pipeline cache.  Criterion 10
freezes the pipeline value to tests/golden/ on its first verified run.
"""
import json
import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from artifact.bttree import cover_size
from artifact.cli import precision_ledger
from artifact.cocycle import UniversalCocycle, build_radial, default_r, hecke_stabilize, solve_coboundary
from artifact.darmon import (
    DarmonParams,
    _params_key,
    darmon_integral,
    darmon_point,
    fixed_point,
    gamma_psi,
    mult_integral,
    pipeline_cocycle,
)
from artifact.lift import eigen_coboundary, lift_cocycle, up_operator
from artifact.measures import P1Measure, p1_permutation, pushforward_pi
from artifact.modsym import ManinOracle
from artifact.padic import PAdicScalar, QuadFieldElement
from artifact.tate import PeriodLattice, TateCurve, branch_log, homothety_index, log_q, scalar_psi

from conftest import D_K, P

N = 6
GOLDEN = Path(__file__).parent / "golden" / "fixture_value.json"
RESULTS: dict = {}

pytestmark = pytest.mark.acceptance


def report(key, ok, detail):
    line = f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[key] = (ok, line)
    print(line)
    assert ok, line


def digits(a, b):
    return a.agreement(b)


@pytest.fixture(scope="module")
def depth4(datum, emb, pipeline_cache):
    """Pipeline result at n = 4, N = 6 for seed 0 (zero fill), through the cache."""
    return darmon_point(datum, emb, DarmonParams(n=4, N=N, seed=0), cache=pipeline_cache)


def cached_lift(datum, params, cache):
    return cache[(datum.hash(), _params_key(params), id(None))]


# ---------------------------------------------------------------------------


def test_c1_cocycle_soundness(datum):
    t0 = time.time()
    _, _, mu = pipeline_cocycle(datum, DarmonParams(n=3, N=N))
    rng = random.Random(2024)

    def word():
        return tuple((rng.randrange(2), rng.choice((1, -1))) for _ in range(rng.randint(1, 6)))

    bad = 0
    for _ in range(50):
        g1, g2 = datum.eval_word(word()), datum.eval_word(word())
        lhs = mu.value(g1 * g2, 3)
        rhs = mu.value(g1, 3) + mu.act(g1, lambda k: mu.value(g2, k), 3)
        ok = lhs.equals(rhs) and lhs.check_harmonic() and not np.any(lhs.total_mass())
        bad += not ok
    dt = time.time() - t0
    report(1, bad == 0 and dt < 60, f"50 word pairs at depth 3, {bad} failures, {dt:.1f}s")


def test_c2_radial_independence(datum):
    t0 = time.time()
    n = 3
    r = default_r(datum)
    a = hecke_stabilize(UniversalCocycle(datum, build_radial(datum, n), n), r)
    b = hecke_stabilize(UniversalCocycle(datum, build_radial(datum, n, seed=5, twist=2), n), r)
    perms, diffs = {}, {}
    for k, g in enumerate(datum.gamma0_generators):
        perms[k] = p1_permutation(datum.embed_p(g), P, n)
        diffs[k] = (b.value(g, n) - a.value(g, n)).values
    differ = any(np.any(d) for d in diffs.values())
    m = solve_coboundary(diffs, perms)
    residual = None
    if m is not None:
        residual = 0
        for k in perms:
            gm = np.empty_like(m)
            gm[perms[k]] = m
            residual += int(np.count_nonzero(gm - m - diffs[k]))
    dt = time.time() - t0
    ok = m is not None and residual == 0 and dt < 120
    report(2, ok, f"cocycles differ: {differ}, coboundary solved: {m is not None}, residual {residual}, {dt:.1f}s")


def test_c3_lift_correctness(datum):
    n = 3
    _, _, mu = pipeline_cocycle(datum, DarmonParams(n=n, N=N))
    gens = {i: mu.value(g, n) for i, g in enumerate(datum.gamma0_generators)}
    L = lift_cocycle(datum, gens, n, N, seed=0)
    mod = P**N
    fiber = all(
        np.array_equal(pushforward_pi(L.gens[g]).values.astype(object), gens[g].values.astype(object) % mod) for g in gens
    )
    rels = all(not np.any(L.on_word(rel).values % mod) for rel in datum.relations)
    report(3, fiber and rels, f"pi_* exact on {cover_size(P, n)} balls: {fiber}; {len(datum.relations)} relations mod 11^6: {rels}")


def test_c4_lift_independence(datum, emb, depth4, pipeline_cache):
    other = darmon_point(datum, emb, DarmonParams(n=4, N=N, seed=1, fill="random"), cache=pipeline_cache)
    k = digits(depth4, other)
    report(4, k >= 4, f"seeds 0/zero and 1/random agree mod 11^{k:g} (need 4)")


def test_c5_representative_and_conjugation(datum, emb, depth4, pipeline_cache):
    n = 4
    v = np.zeros((cover_size(P, n), 1), dtype=object)
    v[0, 0], v[P**n, 0] = 1, -1  # δ_0 - δ_∞
    m = P1Measure(P, n, v)
    shifted = darmon_point(datum, emb, DarmonParams(n=n, N=N), shift=lambda k: m.truncate(k))
    ks = digits(depth4, shifted)
    kc = min(digits(depth4, darmon_point(datum, emb.conjugate(g), DarmonParams(n=n, N=N), cache=pipeline_cache)) for g in datum.gamma0_generators)
    report(5, ks >= 4 and kc >= 4, f"representative change mod 11^{ks:g}, conjugation mod 11^{kc:g} (need 4)")


def test_c6_convergence(datum, emb, depth4, pipeline_cache):
    p3 = DarmonParams(n=3, N=N)
    d3 = darmon_point(datum, emb, p3, cache=pipeline_cache)
    kappa = precision_ledger(d3, d3.metadata["t"], P)["kappa"]
    k_depth = digits(d3, depth4)
    z, _ = fixed_point(datum, emb, N)
    g = gamma_psi(datum, emb)
    k_rand = []
    for params, base in ((p3, d3), (DarmonParams(n=4, N=N), depth4)):
        L, t, _ = cached_lift(datum, params, pipeline_cache)
        for seed in (1, 2):
            k_rand.append(digits(base, darmon_integral(L, g, z, t, rng=np.random.default_rng(seed))))
    need = 3 - kappa
    ok = kappa <= 1 and k_depth >= need and min(k_rand) >= need
    report(6, ok, f"kappa {kappa}; depth 3 vs 4 mod 11^{k_depth:g}; random samples mod 11^{min(k_rand):g} (need {need})")


def test_c7_multiplicative_integral():
    n, prec = 3, 8
    z = QuadFieldElement.sqrt_d(P, D_K, prec) / 2
    z1 = z + 3
    rng = np.random.default_rng(7)
    ok, worst = True, prec
    for _ in range(5):
        v = np.zeros((cover_size(P, n), 1), dtype=object)
        idx = rng.choice(cover_size(P, n), size=6, replace=False)
        v[idx[:3], 0] = 1
        v[idx[3:], 0] = -1
        nu = P1Measure(P, n, v)
        a = mult_integral(nu, z1, z)[0]
        b = mult_integral(nu, z, z1)[0]
        ok &= (a * b).equals(QuadFieldElement.one(P, D_K, prec))
        c = QuadFieldElement.from_pair(Fraction(5), Fraction(2), P, D_K, prec)
        w = z * 3 + 1

        def f(t, c=c, w=w):  # c·f_{z1,w}·f_{w,z}: same divisor through an auxiliary point
            return c if t is None else c * ((t - z1) / (t - w)) * ((t - w) / (t - z))

        worst = min(worst, a.diff_valuation(mult_integral(nu, z1, z, f=f)[0]))
    report(7, ok and worst >= n, f"swap inversion: {ok}; f-choice agreement mod 11^{worst:g} (need {n})")


def test_c8_tate(emb, datum):
    Nt, d = 8, 8
    E = TateCurve(P, PAdicScalar.from_rational(33, P, Nt + 4), Nt, d)
    q = QuadFieldElement.from_pair(E.q, 0, P, d, E.q.prec)
    lq = log_q(E, E.q)
    kill = lq.is_zero()
    res = min(E.residual(E.point(QuadFieldElement.from_pair(a, b, P, d, Nt))) for a, b in ((2, 0), (3, 1), (5, 7), (12, 3)))
    homo = homothety_index(PeriodLattice([[q]]), PeriodLattice([[q * q]]))
    # Ψ on units does not see the branch: compare two branches through the X integral
    _, _, mu = pipeline_cocycle(datum, DarmonParams(n=2, N=4))
    gens = {i: mu.value(g, 2) for i, g in enumerate(datum.gamma0_generators)}
    L = lift_cocycle(datum, gens, 2, 4)
    z, _ = fixed_point(datum, emb, 4)
    g = gamma_psi(datum, emb)
    base = darmon_integral(L, g, z, 12)
    other = darmon_integral(L, g, z, 12, psi=scalar_psi(lambda u: branch_log(u, 7)))
    branch = all(a.equals(b) for a, b in zip(base.value, other.value))
    ok = kill and res >= Nt - 1 and homo == (2, 1) and branch
    report(8, ok, f"log_q(q)=0: {kill}; residual valuation {res:g} (need {Nt - 1}); homothety {homo}; branch cancels: {branch}")


def test_c9_fixture_arithmetic(datum):
    t0 = time.time()
    orc = ManinOracle(P)
    T2, T3 = orc.hecke(2), orc.hecke(3)
    hecke_ok = T2 == ((-2,),) and T3 == ((-1,),)
    n, Nl = 3, N
    _, _, mu = pipeline_cocycle(datum, DarmonParams(n=n, N=Nl))
    gens = {i: mu.value(g, n) for i, g in enumerate(datum.gamma0_generators)}
    L = lift_cocycle(datum, gens, n, Nl)
    U = up_operator(datum, L)
    plus = eigen_coboundary(datum, L, U, 1) is not None
    minus = eigen_coboundary(datum, L, U, -1) is None
    dt = time.time() - t0
    ok = hecke_ok and plus and minus and dt < 60
    report(9, ok, f"T2 {T2[0][0]}, T3 {T3[0][0]}; Up eigenvalue +1 mod coboundary: {plus}, -1 excluded: {minus}; {dt:.1f}s")


def test_c10_golden(depth4):
    ready = all(RESULTS.get(k, (False,))[0] for k in (4, 5, 6))
    doc = {"config": {"p": P, "d_K": D_K, "c": 1, "n": 4, "N": N, "seed": 0, "embedding": "[[0,4],[2,0]]"},
           "value": [str(v) for v in depth4.value], "precision": depth4.precision}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if not GOLDEN.exists():
        if not ready:
            report(10, False, "criteria 4-6 not verified; golden value not recorded")
        GOLDEN.parent.mkdir(exist_ok=True)
        GOLDEN.write_text(text)
        report(10, True, f"golden value recorded to {GOLDEN.name}")
        return
    same = GOLDEN.read_text() == text
    report(10, same, f"pipeline value byte-identical to {GOLDEN.name}: {same}")
