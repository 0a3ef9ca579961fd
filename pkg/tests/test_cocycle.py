import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.bttree import TreeEdge, cover_size
from artifact.cocycle import (
    GammaCocycle,
    ShiftedCocycle,
    UniversalCocycle,
    build_radial,
    default_r,
    exponent_t,
    hecke_stabilize,
    solve_coboundary,
)
from artifact.measures import P1Measure, p1_permutation

p = 11
DEPTH = 2


@pytest.fixture(scope="module")
def radial(datum):
    return build_radial(datum, DEPTH)


@pytest.fixture(scope="module")
def mu(datum, radial):
    return UniversalCocycle(datum, radial)


def word_strategy(k=2, size=6):
    return st.lists(st.tuples(st.integers(0, k - 1), st.sampled_from([1, -1])), min_size=1, max_size=size).map(tuple)


class ZeroCocycle(GammaCocycle):
    def _compute(self, g, n):
        return P1Measure.zero(self.datum.p, n, self.m)


def random_measure(seed, n, m=1):
    rng = np.random.default_rng(seed)
    return P1Measure(p, n, rng.integers(-9, 10, size=(cover_size(p, n), m)).astype(object))


def test_radial_shape(datum, radial):
    assert len(radial.reps) == len(radial.hat_reps) == p + 1
    e = TreeEdge.e_star(p)
    assert radial.reps[e].is_one() and radial.hat_reps[e].is_one() and radial.edge_rep(e).is_one()
    shell = radial.shell_edges(2)
    assert len(shell) == 132
    for edge in shell:
        assert edge.act(datum.embed_p(radial.edge_rep(edge))) == e


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_shuffled_generators_still_radial(datum, seed):
    build_radial(datum, DEPTH, seed=seed).check()
    build_radial(datum, DEPTH, seed=seed, twist=2).check()


def test_identity_gives_zero(datum, mu):
    assert not np.any(mu.value(datum.one).values)


@settings(max_examples=15)
@given(word_strategy())
def test_values_harmonic_and_antisymmetric(datum, mu, w):
    g = datum.eval_word(w)
    nu = mu.value(g)
    assert nu.check_harmonic()
    e = TreeEdge.e_star(p)
    assert mu.edge_value(g, e.reverse()) == tuple(-x for x in mu.edge_value(g, e))


@settings(max_examples=15)
@given(word_strategy(), word_strategy())
def test_cocycle_identity(datum, mu, w1, w2):
    g1, g2 = datum.eval_word(w1), datum.eval_word(w2)
    lhs = mu.value(g1 * g2)
    rhs = mu.value(g1) + mu.act(g1, lambda k: mu.value(g2, k))
    assert lhs.equals(rhs)


def test_stabilize_zero(datum):
    z = hecke_stabilize(ZeroCocycle(datum, DEPTH), 2)
    S, U = datum.gamma0_generators
    assert not np.any(z.value(S * U).values)


@pytest.mark.parametrize("r", [2, 3])
def test_stabilized_coboundary_formula(datum, r):
    """t_r of γ ↦ γm − m is γm' − m' with m' = Σ δ_i m − (r+1) m."""
    m = random_measure(r, DEPTH + 2)
    m_of = lambda k: m.truncate(k)  # noqa: E731
    base = ShiftedCocycle(ZeroCocycle(datum, DEPTH), m_of)
    st_ = hecke_stabilize(base, r)
    M = m.truncate(DEPTH).scale(-(r + 1))
    for d in st_.deltas:
        M = M + st_.act(d, m_of, DEPTH)
    for g in datum.gamma0_generators:
        expected = st_.act(g, lambda k: M, DEPTH) - M
        assert st_.value(g).equals(expected)


def test_default_r(datum):
    assert default_r(datum) == 2


def test_exponent_t(datum):
    # SL_2(Z[1/p]) has abelianization Z/12 for p >= 5
    t = exponent_t(datum)
    assert t == 12 and 12 % t == 0


def test_solve_coboundary_round_trip(datum):
    rng = np.random.default_rng(5)
    n = DEPTH
    m = rng.integers(-20, 20, size=(cover_size(p, n), 1)).astype(object)
    perms, diffs = {}, {}
    for k, g in enumerate(datum.gamma0_generators):
        perm = p1_permutation(datum.embed_p(g), p, n)
        gm = np.empty_like(m)
        gm[perm] = m
        perms[k], diffs[k] = perm, gm - m
    sol = solve_coboundary(diffs, perms)
    assert sol is not None
    for k in perms:
        gs = np.empty_like(sol)
        gs[perms[k]] = sol
        assert not np.any(gs - sol - diffs[k])
    diffs[0] = diffs[0].copy()
    diffs[0][0] += 1
    assert solve_coboundary(diffs, perms) is None
