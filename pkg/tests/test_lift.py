import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.darmon import DarmonParams, pipeline_cocycle
from artifact.errors import InvariantViolation
from artifact.lift import LiftedCocycle, eigen_coboundary, lift_cocycle, read_lift, up_operator, write_lift
from artifact.measures import P1Measure, XMeasure, act_x, pushforward_pi, xgrid

p, N = 11, 4


@pytest.fixture(scope="module")
def mu_gens(datum):
    out = {}
    for n in (1, 2):
        _, _, mu = pipeline_cocycle(datum, DarmonParams(n=n, N=N))
        out[n] = {i: mu.value(g, n) for i, g in enumerate(datum.gamma0_generators)}
    return out


def truncate_x(mu: XMeasure, n: int) -> XMeasure:
    fine = mu.grid
    coarse = xgrid(mu.p, n)
    idx = coarse.class_of(fine.rep_a.astype(np.int64) % coarse.P, fine.rep_b.astype(np.int64) % coarse.P)
    vals = np.zeros((coarse.size, mu.m), dtype=np.int64)
    np.add.at(vals, idx, mu.values)
    return XMeasure(mu.p, n, mu.N, vals)


def test_zero_lifts_to_zero(datum):
    zero = {i: P1Measure.zero(p, 2, 1) for i in range(2)}
    L = lift_cocycle(datum, zero, 2, N)
    assert L.method == "zero" and all(not np.any(v.values) for v in L.gens.values())


@pytest.mark.parametrize("fill", ["zero", "random"])
@pytest.mark.parametrize("seed", [0, 7])
def test_lift_constraints(datum, mu_gens, fill, seed):
    L = lift_cocycle(datum, mu_gens[2], 2, N, seed=seed, fill=fill)
    assert L.check(mu_gens[2]) == {"fiber": True, "relations": True, "support": True}


def test_generic_method_agrees_on_constraints(datum, mu_gens):
    L = lift_cocycle(datum, mu_gens[1], 1, N, seed=3, method="generic")
    assert L.method == "generic"
    assert all(L.check(mu_gens[1]).values())


def test_refinement_coherence(datum, mu_gens):
    L2 = lift_cocycle(datum, mu_gens[2], 2, N, seed=1, fill="random")
    L1 = LiftedCocycle(datum, 1, N, {g: truncate_x(v, 1) for g, v in L2.gens.items()})
    assert all(L1.check(mu_gens[1]).values())


@settings(max_examples=10)
@given(st.lists(st.tuples(st.integers(0, 1), st.sampled_from([1, -1])), max_size=6), st.lists(st.tuples(st.integers(0, 1), st.sampled_from([1, -1])), max_size=6))
def test_lift_cocycle_rule_on_words(datum, mu_gens, w1, w2):
    L = lift_cocycle(datum, mu_gens[2], 2, N, seed=0)
    g1 = datum.eval_word(tuple(w1))
    lhs = L.on_word(tuple(w1) + tuple(w2))
    rhs = L.on_word(tuple(w1)) + act_x(datum.embed_p(g1), L.on_word(tuple(w2)))
    assert lhs.equals(rhs)


def test_up_operator_zero(datum):
    zero = LiftedCocycle(datum, 2, N, {i: XMeasure.zero(p, 2, N, 1) for i in range(2)})
    U = up_operator(datum, zero)
    assert all(not np.any(v.values) for v in U.gens.values())


def test_up_operator_eigenvalue_plus_one(datum, mu_gens):
    L = lift_cocycle(datum, mu_gens[2], 2, N, seed=0)
    U = up_operator(datum, L)
    assert U.check()["relations"]
    assert eigen_coboundary(datum, L, U, 1) is not None
    for a in (-1, 0, 2):
        assert eigen_coboundary(datum, L, U, a) is None


def test_lift_files(tmp_path, datum, mu_gens):
    L = lift_cocycle(datum, mu_gens[2], 2, N, seed=2, fill="random")
    write_lift(L, tmp_path / "lift")
    back = read_lift(datum, tmp_path / "lift")
    assert (back.n, back.N, back.seed, back.method) == (2, N, 2, L.method)
    assert all(back.gens[g].equals(L.gens[g]) for g in L.gens)
    from artifact.quatalg import fixture_datum

    other = fixture_datum(13)
    with pytest.raises(InvariantViolation):
        read_lift(other, tmp_path / "lift")
