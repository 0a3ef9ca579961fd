from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.darmon import DarmonResult
from artifact.padic import PAdicScalar, QuadFieldElement, iwasawa_log, vec_log_units
from artifact.tate import (
    NotHomothetic,
    PeriodLattice,
    TateCurve,
    branch_log,
    darmon_point_on_A,
    homothety_index,
    log_q,
    phi_A,
    scalar_psi,
    tate_psi,
)

p, d, N = 11, 8, 8


def kp(a, b=0, prec=N):
    return QuadFieldElement.from_pair(Fraction(a), Fraction(b), p, d, prec)


@pytest.fixture(scope="module")
def E1():
    return TateCurve(p, PAdicScalar.from_rational(33, p, N + 4), N, d)


@pytest.fixture(scope="module")
def E2():
    return TateCurve(p, PAdicScalar.from_rational(3 * 121, p, N + 4), N, d)


def same_point(P, Q, prec):
    if P is None or Q is None:
        return P is None and Q is None
    return all(a.diff_valuation(b) >= prec for a, b in zip(P, Q))


def test_log_q_kills_q(E1, E2):
    for E in (E1, E2):
        assert log_q(E, E.q).is_zero() or log_q(E, E.q).valuation >= N


def test_log_q_kills_roots_of_unity(E1):
    teich = pow(2, p ** (N + 2), p ** (N + 2))
    for u in (kp(-1), kp(teich)):
        v = log_q(E1, u)
        assert v.is_zero() or v.valuation >= N - 1


units = st.tuples(st.integers(1, 10), st.integers(0, 10**6), st.integers(0, 10**6))


@settings(max_examples=25)
@given(units, units, st.integers(-2, 2), st.integers(-2, 2))
def test_log_q_homomorphism(E1, u, v, ku, kv):
    x = kp(u[0] + p * u[1], u[2]) * p**ku if ku >= 0 else kp(u[0] + p * u[1], u[2]) / p**-ku
    y = kp(v[0] + p * v[1], v[2]) * p**kv if kv >= 0 else kp(v[0] + p * v[1], v[2]) / p**-kv
    lhs = log_q(E1, x * y)
    rhs = log_q(E1, x) + log_q(E1, y)
    assert lhs.diff_valuation(rhs) >= N - 3


def test_branch_log_differs_by_valuation():
    u = kp(33 * 7 + 11 * 11)
    assert branch_log(u, 5).diff_valuation(iwasawa_log(u) + 5 * u.valuation) >= N


def test_identity_points(E1, E2):
    assert E1.point(kp(1)) is None
    assert E1.point(as_q(E1)) is None
    assert E2.point(as_q(E2) * as_q(E2)) is None


def as_q(E):
    return QuadFieldElement.from_pair(E.q, 0, p, d, E.q.prec)


def test_two_torsion(E1):
    P = E1.point(kp(-1))
    assert P is not None
    assert E1.mul(2, P) is None


@pytest.mark.parametrize("u", [(2, 0), (3, 1), (5, 7), (1 + 11, 3)])
def test_points_lie_on_curve(E1, u):
    P = E1.point(kp(*u))
    assert E1.residual(P) >= N - 2


def test_points_off_units(E2):
    P = E2.point(kp(11 * 4, 1))  # valuation 1 < ord q = 2
    assert E2.residual(P) >= N - 3


@pytest.mark.parametrize("u,v", [((2, 0), (3, 1)), ((5, 2), (7, 0)), ((4, 1), (4, 10))])
def test_map_is_homomorphism(E1, u, v):
    x, y = kp(*u), kp(*v)
    lhs = E1.point(x * y)
    rhs = E1.add(E1.point(x), E1.point(y))
    assert same_point(lhs, rhs, N - 4)


def test_formal_log_matches_log(E1):
    u = kp(1 + 11 * 3, 11 * 5)
    P = E1.point(u)
    val = E1.formal_log(P)
    assert val.diff_valuation(iwasawa_log(u)) >= N - 4


def test_phi_A(E1):
    u = kp(3, 2)
    assert same_point(phi_A(E1, u, 3), E1.point(u**3), N - 2)


def test_homothety(E1):
    q = as_q(E1)
    L1 = PeriodLattice([[q]])
    assert homothety_index(L1, PeriodLattice([[q * q]])) == (2, 1)
    assert homothety_index(L1, L1) == (1, 1)
    bad = homothety_index(L1, PeriodLattice([[q * kp(12)]]))
    assert isinstance(bad, NotHomothetic) and not bad
    assert not homothety_index(L1, PeriodLattice([[q, q], [q, q * q]]))


def test_homothety_with_torsion(E1):
    q = as_q(E1)
    res = homothety_index(PeriodLattice([[q]]), PeriodLattice([[-q]]))
    assert res == (2, 2)


def _result(x):
    return DarmonResult([x], 2, {})


def test_point_on_A(E1):
    v = kp(11 * 2, 11 * 3)
    one = darmon_point_on_A(_result(v), E1)
    assert one.log[0].equals(v)
    assert same_point(one.point, E1.point(exp_of(v)), N - 3)
    two = darmon_point_on_A(_result(v), E1, f=2)
    assert two.log[0].equals(v * 2)
    zero = darmon_point_on_A(_result(v), E1, f=0)
    assert zero.log[0].is_zero() and zero.point is None


def exp_of(v):
    from artifact.padic import exp_p

    return exp_p(v)


def test_point_on_A_out_of_range(E1):
    out = darmon_point_on_A(_result(kp(3, 1)), E1)
    assert out.point is None and "convergence" in out.note


def test_branch_cancels_on_units():
    rng = np.random.default_rng(1)
    mod = p**5
    a = rng.integers(1, mod, 40) * 1
    b = rng.integers(0, mod, 40)
    a[a % p == 0] += 1
    la, lb = vec_log_units(a, b, p, d, 5)
    for L in (0, 7):
        sa, sb = scalar_psi(lambda u: branch_log(u, L))(a, b, p, d, 5)
        assert np.array_equal(np.asarray(la, dtype=object) % mod, sa % mod)
        assert np.array_equal(np.asarray(lb, dtype=object) % mod, sb % mod)


def test_tate_psi_scales(E1):
    a, b = np.array([2, 3, 13]), np.array([0, 5, 1])
    la, lb = vec_log_units(a, b, p, d, 5)
    ta, tb = tate_psi(E1, 3)(a, b, p, d, 5)
    assert list(ta) == [3 * int(x) % p**5 for x in la]
    assert list(tb) == [3 * int(x) % p**5 for x in lb]
