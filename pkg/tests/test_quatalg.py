import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from artifact.errors import InvariantViolation, ParseError
from artifact.quatalg import (
    QuaternionElement,
    datum_from_json,
    format_word,
    free_reduce,
    load_datum,
    parse_word,
    save_datum,
    split_fixture,
    word_inverse,
)

coords = st.lists(st.fractions(min_value=-20, max_value=20, max_denominator=6), min_size=4, max_size=4)
algebras = st.sampled_from([(1, 1), (-1, 3), (2, -5), (-3, -7)])

GAMMA1_GENS = [[[1, 1], [0, 1]], [[1, 0], [11, 1]], [[4, -1], [33, -8]], [[7, -2], [11, -3]], [[-1, 0], [0, -1]]]


def hamilton(x, y, a, b):
    """Product in the algebra with i^2 = a, j^2 = b, k = ij, written out by hand."""
    x0, x1, x2, x3 = x
    y0, y1, y2, y3 = y
    return [
        x0 * y0 + a * x1 * y1 + b * x2 * y2 - a * b * x3 * y3,
        x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
        x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
        x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
    ]


@given(coords, coords, algebras)
def test_product_matches_hand_formula(x, y, ab):
    a, b = ab
    q = QuaternionElement.make(x, a, b) * QuaternionElement.make(y, a, b)
    assert list(q.x) == hamilton(x, y, a, b)


@given(coords, coords, algebras)
def test_norm_multiplicative_and_trace(x, y, ab):
    a, b = ab
    q, r = QuaternionElement.make(x, a, b), QuaternionElement.make(y, a, b)
    assert (q * r).norm() == q.norm() * r.norm()
    assert q.trace() == 2 * Fraction(x[0])
    assert q.norm() == x[0] ** 2 - a * x[1] ** 2 - b * x[2] ** 2 + a * b * x[3] ** 2


def mat_mul(g, h):
    return tuple(tuple(sum(g[i][k] * h[k][j] for k in range(2)) for j in range(2)) for i in range(2))


@given(coords, coords)
def test_embedding_is_ring_map(datum, x, y):
    q, r = datum.quat(x), datum.quat(y)
    assert datum.embed_p(q * r) == mat_mul(datum.embed_p(q), datum.embed_p(r))
    Mq = datum.embed_p(q)
    assert Mq[0][0] * Mq[1][1] - Mq[0][1] * Mq[1][0] == q.norm()
    assert Mq[0][0] + Mq[1][1] == q.trace()
    Mc = datum.embed_p(q.conj())
    assert Mc == ((Mq[1][1], -Mq[0][1]), (-Mq[1][0], Mq[0][0]))  # adjugate
    assert datum.from_matrix(Mq) == q


def test_embed_basics(datum):
    assert datum.embed_p(datum.one) == ((1, 0), (0, 1))
    w = datum.embed_p(datum.omega_p)
    assert w[0][0] * w[1][1] - w[0][1] * w[1][0] == datum.p


def test_membership(datum):
    S, U = datum.gamma0_generators
    assert datum.is_in_gamma0(datum.one) and datum.is_in_gamma1(datum.one)
    assert not datum.is_in_gamma0(datum.omega_p)
    assert datum.is_in_gamma0(S * U) and datum.is_in_gamma0(U * S * S)
    assert not datum.is_in_gamma1(S)


@given(st.lists(st.sampled_from(range(2)), max_size=8), st.lists(st.booleans(), max_size=8))
def test_gamma0_hat_conjugation(datum, idx, inv):
    q = datum.one
    for k, flip in zip(idx, inv):
        g = datum.gamma0_generators[k]
        q = q * (g.inverse() if flip else g)
    w = datum.omega_p
    conj = w * q * w.inverse()
    assert datum.is_in_gamma0_hat(conj)
    assert datum.is_in_gamma0(w.inverse() * conj * w)


@given(st.lists(st.sampled_from(range(len(GAMMA1_GENS))), max_size=5), st.lists(st.sampled_from(range(len(GAMMA1_GENS))), max_size=5))
def test_abelianization_homomorphism(datum, u, v):
    def elt(idx):
        q = datum.one
        for k in idx:
            q = q * datum.from_matrix(GAMMA1_GENS[k])
        return q

    g, h = elt(u), elt(v)
    img = datum.abelianization_image
    assert tuple(a + b for a, b in zip(img(g), img(h))) == img(g * h)
    assert all(a + b == 0 for a, b in zip(img(g), img(g.inverse())))


def test_abelianization_trivial_cases(datum):
    assert datum.abelianization_image(datum.one) == (0,)
    assert datum.abelianization_image(datum.from_matrix([[1, 1], [0, 1]])) == (0,)
    with pytest.raises(InvariantViolation):
        datum.abelianization_image(datum.gamma0_generators[0])


@given(st.lists(st.tuples(st.integers(0, 1), st.sampled_from([1, -1])), max_size=10))
def test_words(datum, word):
    word = tuple(word)
    names = datum.generator_names
    assert parse_word(format_word(word, names) or "1", names) == free_reduce(word)
    assert datum.eval_word(word) * datum.eval_word(word_inverse(word)) == datum.one
    q = datum.eval_word(word)
    assert datum.eval_word(datum.word_for(q)) == q


def test_relations_hold(datum):
    for rel in datum.relations:
        assert datum.eval_word(rel).is_one()


def test_load_round_trip(tmp_path, datum):
    save_datum(datum, tmp_path / "d.json")
    with pytest.warns(UserWarning, match="D = 1"):
        back = load_datum(tmp_path / "d.json")
    assert back.hash() == datum.hash()
    assert back.gamma0_generators == datum.gamma0_generators


@pytest.mark.parametrize(
    "edit,check",
    [
        (lambda raw: raw.update(omega_p=["0", "0", "0", "1"]), "omega-norm"),
        (lambda raw: raw["gamma0_generators"].__setitem__(0, ["1", "0", "0", "1"]), "generator-norm"),  # norm 2
        (lambda raw: raw.update(p=10), "p-prime"),
        (lambda raw: raw.update(gamma0_relations=["S^2"]), "relations"),
        (lambda raw: raw["ip"].update(I=[["1", "0"], ["0", "1"]]), "ip-relations"),
        (lambda raw: raw["H"].update(rank=0), "H-rank"),
    ],
)
def test_invalid_datum_names_check(edit, check):
    raw = split_fixture(11)
    edit(raw)
    with pytest.raises(InvariantViolation) as info:
        datum_from_json(raw)
    assert info.value.check == check


def test_malformed_datum(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ParseError):
        load_datum(tmp_path / "bad.json")
    raw = split_fixture(11)
    del raw["omega_p"]
    with pytest.raises(ParseError):
        datum_from_json(raw)
    (tmp_path / "partial.json").write_text(json.dumps({"p": 11}))
    with pytest.raises(ParseError):
        load_datum(tmp_path / "partial.json")
