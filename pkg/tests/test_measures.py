import numpy as np
import pytest
from hypothesis import given, strategies as st

from artifact.bttree import Ball, TreeEdge, TreeVertex, cover_size, edges_out, mat, mat_mul
from artifact.errors import DepthLoss
from artifact.measures import (
    P1Measure,
    XMeasure,
    act_p1,
    act_x,
    pushforward_pi,
    read_measure,
    total_mass,
    write_measure,
    xgrid,
)

p = 11
S = mat(0, -1, 1, 0)
T = mat(1, 1, 0, 1)
I = mat(1, 0, 0, 1)


@st.composite
def sl2z(draw):
    g = I
    for k in draw(st.lists(st.integers(-4, 4), max_size=6)):
        g = mat_mul(g, mat_mul(S, mat(1, k, 0, 1)))
    return g


def random_p1(seed, n=2, harmonic=True, m=1):
    rng = np.random.default_rng(seed)
    vals = rng.integers(-50, 50, size=(cover_size(p, n), m)).astype(object)
    if harmonic:
        vals[-1] -= vals.sum(axis=0)
    return P1Measure(p, n, vals, None, harmonic)


def random_x(seed, n=2, N=4, m=1):
    rng = np.random.default_rng(seed)
    return XMeasure(p, n, N, rng.integers(0, p**N, size=(xgrid(p, n).size, m)))


seeds = st.integers(0, 2**32 - 1)


# P^1 side -----------------------------------------------------------------------


@given(seeds)
def test_act_p1_identity(seed):
    nu = random_p1(seed)
    assert act_p1(I, nu).equals(nu)


@given(sl2z(), sl2z(), seeds)
def test_act_p1_is_action(g, h, seed):
    nu = random_p1(seed)
    assert act_p1(g, act_p1(h, nu)).equals(act_p1(mat_mul(g, h), nu))


@given(sl2z(), seeds)
def test_act_p1_preserves_harmonic(g, seed):
    assert act_p1(g, random_p1(seed)).check_harmonic()


@given(seeds)
def test_weyl_flip(seed):
    nu = random_p1(seed)
    w = mat(0, 1, 1, 0)
    lhs = act_p1(w, nu).ball_value(Ball.make(p, 0, 0))
    rhs = nu.ball_value(Ball.make(p, 0, 1, complement=True))
    assert np.array_equal(lhs, rhs)


@given(seeds)
def test_total_mass_levels(seed):
    nu = random_p1(seed, n=3, harmonic=False)
    assert np.array_equal(nu.level(1).sum(axis=0), nu.level(2).sum(axis=0))
    assert np.array_equal(nu.level(2).sum(axis=0), total_mass(nu))


def test_two_ball_measure_has_mass_zero():
    vals = np.zeros((cover_size(p, 1), 2), dtype=object)
    vals[0], vals[5] = [3, -1], [-3, 1]
    assert not np.any(total_mass(P1Measure(p, 1, vals)))


@pytest.mark.parametrize("seed", range(50))
def test_harmonic_iff_mass_zero(seed):
    harmonic = seed % 2 == 0
    nu = random_p1(seed, n=3, harmonic=harmonic)
    vertices = [TreeVertex.root(p)]
    frontier = list(vertices)
    for _ in range(2):
        frontier = [w for v in frontier for w in v.neighbors() if w.distance() > v.distance()]
        vertices += frontier
    sums_vanish = all(not np.any(sum(nu.edge_value(e) for e in edges_out(v))) for v in vertices)
    assert sums_vanish == nu.check_harmonic() == harmonic
    # complementary balls; antisymmetry exactly when the mass vanishes
    e = TreeEdge.e_star(p)
    assert np.array_equal(nu.edge_value(e.reverse()), total_mass(nu) - nu.edge_value(e))


def test_edge_beyond_depth():
    nu = random_p1(0, n=1)
    far = TreeEdge(TreeVertex.make(p, 3, 0), TreeVertex.make(p, 2, 0))
    with pytest.raises(DepthLoss):
        nu.edge_value(far)


# X side -------------------------------------------------------------------------


def test_nonprimitive_has_no_class():
    g = xgrid(p, 2)
    assert g.class_of(np.array([11]), np.array([22]))[0] == -1
    assert g.class_of(np.array([1]), np.array([22]))[0] >= 0


@given(seeds)
def test_act_x_identity(seed):
    mu = random_x(seed)
    assert act_x(I, mu).equals(mu)


@given(st.integers(1, p**2 - 1).filter(lambda u: u % p), seeds)
def test_scalar_preserves_mass(u, seed):
    mu = random_x(seed)
    assert np.array_equal(total_mass(act_x(mat(u, 0, 0, u), mu)), total_mass(mu))


@given(sl2z(), seeds, seeds)
def test_act_x_pullback(g, seed, fseed):
    mu = random_x(seed)
    grid = mu.grid
    phi = np.random.default_rng(fseed).integers(0, 100, size=grid.size)
    lhs = int((phi * act_x(g, mu).values[:, 0]).sum() % mu.modulus)
    rhs = int((phi[grid.permutation(g)] * mu.values[:, 0]).sum() % mu.modulus)
    assert lhs == rhs
    assert np.array_equal(total_mass(act_x(g, mu)), total_mass(mu))


@given(sl2z(), seeds)
def test_pushforward_equivariant(g, seed):
    mu = random_x(seed)
    assert act_p1(g, pushforward_pi(mu)).equals(pushforward_pi(act_x(g, mu)))


@given(seeds)
def test_pushforward_of_affine_mass(seed):
    mu = random_x(seed)
    aff = ~mu.grid.is_x_infinity()
    nu = pushforward_pi(mu.restrict(aff))
    P = p**mu.n
    assert not np.any(nu.values[P:])  # nothing outside Z_p
    assert np.array_equal(nu.ball_value(Ball.make(p, 0, 0)) % mu.modulus, total_mass(mu.restrict(aff)))


def test_pushforward_zero():
    assert not np.any(pushforward_pi(XMeasure.zero(p, 2, 4, 1)).values)


def test_x_partition():
    g = xgrid(p, 2)
    inf = g.is_x_infinity()
    # classes in X_inf have a unit first coordinate, the rest a unit second one
    assert np.all(g.rep_a[inf] % p != 0)
    assert np.all(g.rep_b[~inf] % p != 0)


def test_depth_loss_off_x():
    mu = random_x(1)
    with pytest.raises(DepthLoss):
        act_x(mat(p, 0, 0, p), mu)


def test_measure_files_round_trip(tmp_path):
    nu = random_p1(3)
    write_measure(tmp_path / "a.measure", nu)
    back = read_measure(tmp_path / "a.measure")
    assert back.equals(nu)
    mu = random_x(4)
    write_measure(tmp_path / "b.measure", mu)
    assert read_measure(tmp_path / "b.measure").equals(mu)
    lines = (tmp_path / "b.measure").read_text().splitlines()[1:]
    keys = [tuple(int(v) for v in ln.split(" + ")[0].strip("()").split(", ")) for ln in lines]
    assert keys == sorted(keys)
