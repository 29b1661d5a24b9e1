from __future__ import annotations

from fractions import Fraction

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from freedense.exactalg import (DimensionError, GroupElement, IntPolynomial, SingularMatrixError, SqMatrix,
                                UnknownGeneratorError, char_poly, companion, evaluate_word, identity_element,
                                invert_word, mat_inv, mat_mul, reduce_mod, reduce_word, squarefree,
                                word_from_json, word_to_json)

small = st.integers(-6, 6)


def matrices(n):
    return st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n).map(
        lambda rows: SqMatrix(tuple(map(tuple, rows))))


@st.composite
def unimodular(draw, n=3, steps=6):
    """Products of elementary matrices: det 1 by construction."""
    m = SqMatrix.identity(n)
    for _ in range(draw(st.integers(1, steps))):
        i, j = draw(st.sampled_from([(i, j) for i in range(n) for j in range(n) if i != j]))
        rows = [[int(r == c) for c in range(n)] for r in range(n)]
        rows[i][j] = draw(st.integers(-2, 2))
        m = m @ SqMatrix(tuple(map(tuple, rows)))
    return m


def test_identity_product():
    m = SqMatrix(((3, -1), (7, 2)))
    assert mat_mul(SqMatrix.identity(2), m) == m


def test_hand_product():
    assert mat_mul(SqMatrix(((2, 1), (1, 1))), SqMatrix(((1, 1), (1, 2)))) == SqMatrix(((3, 4), (2, 3)))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        mat_mul(SqMatrix.identity(2), SqMatrix.identity(3))


@given(unimodular())
def test_inverse_roundtrip(m):
    inv = mat_inv(m)
    assert inv.is_integer()
    assert m @ inv == SqMatrix.identity(3)


def test_inverse_examples():
    assert mat_inv(SqMatrix.identity(3)) == SqMatrix.identity(3)
    assert mat_inv(SqMatrix(((2, 1), (1, 1)))) == SqMatrix(((1, -1), (-1, 2)))
    inv = mat_inv(SqMatrix.diag([4, 2, 1]))
    assert inv == SqMatrix.diag([Fraction(1, 4), Fraction(1, 2), 1])
    with pytest.raises(SingularMatrixError):
        mat_inv(SqMatrix(((1, 2), (2, 4))))


def test_char_poly_examples():
    assert char_poly(SqMatrix.identity(2)).coeffs == (1, -2, 1)
    assert char_poly(SqMatrix(((2, 1), (1, 1)))).coeffs == (1, -3, 1)
    p = IntPolynomial((-1, 3, -4, 1))
    assert char_poly(companion(p)) == p


@given(matrices(3))
def test_char_poly_matches_sympy(m):
    x = sympy.Symbol("x")
    ref = sympy.Matrix([[int(v) for v in r] for r in m.rows]).charpoly(x).all_coeffs()
    assert list(reversed(char_poly(m).coeffs)) == [int(c) for c in ref]


@given(matrices(3), unimodular())
def test_char_poly_conjugation_invariant(m, p):
    assert char_poly(p @ m @ mat_inv(p)) == char_poly(m)


@given(matrices(3))
def test_det_is_constant_term(m):
    assert char_poly(m).coeffs[0] * (-1) ** 3 == m.det()


@given(matrices(2), matrices(2), matrices(2))
def test_ring_axioms(x, y, z):
    assert (x @ y) @ z == x @ (y @ z)
    add = lambda p, q: SqMatrix(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(p.rows, q.rows)))
    assert x @ add(y, z) == add(x @ y, x @ z)


def test_squarefree_examples():
    assert squarefree(IntPolynomial((1, -3, 1)))
    assert not squarefree(IntPolynomial((1, -2, 1)))
    assert squarefree(IntPolynomial((0, -1, 0, 1)))


def test_evaluate_word_examples():
    a = GroupElement(SqMatrix(((2, 1), (1, 1))))
    b = GroupElement(SqMatrix(((1, 1), (1, 2))))
    gens = {"a": a, "b": b}
    assert evaluate_word((), gens, 2).is_identity()
    assert evaluate_word((("a", 1),), gens).matrix == a.matrix
    direct = a.matrix @ mat_inv(b.matrix) @ a.matrix
    w = evaluate_word((("a", 1), ("b", -1), ("a", 1)), gens)
    assert w.matrix == direct
    assert w.word == (("a", 1), ("b", -1), ("a", 1))
    with pytest.raises(UnknownGeneratorError):
        evaluate_word((("c", 1),), gens)


words = st.lists(st.tuples(st.sampled_from("ab"), st.integers(-3, 3).filter(bool)), max_size=6)


@given(words, words)
def test_evaluate_word_homomorphism(w1, w2):
    gens = {"a": GroupElement(SqMatrix(((2, 1), (1, 1)))), "b": GroupElement(SqMatrix(((1, 1), (1, 2))))}
    lhs = evaluate_word(w1 + w2, gens, 2).matrix
    assert lhs == evaluate_word(w1, gens, 2).matrix @ evaluate_word(w2, gens, 2).matrix


@given(words)
def test_word_helpers(w):
    r = reduce_word(w)
    assert all(e != 0 for _, e in r)
    assert all(r[i][0] != r[i + 1][0] for i in range(len(r) - 1))
    assert reduce_word(tuple(w) + invert_word(tuple(w))) == ()
    assert word_from_json(word_to_json(r)) == r


def test_reduce_mod_examples():
    assert reduce_mod(SqMatrix.identity(3), 5).is_identity()
    assert reduce_mod(SqMatrix(((2, 1), (1, 1))), 2).rows == ((0, 1), (1, 1))
    with pytest.raises(ValueError):
        reduce_mod(SqMatrix.diag([Fraction(1, 2), 2]), 3)


@given(unimodular(), st.integers(2, 30))
def test_reduce_mod_preserves_det(m, modulus):
    assert reduce_mod(m, modulus).det() == m.det() % modulus


def test_json_roundtrip():
    g = identity_element(3) * GroupElement(SqMatrix(((1, 2, 0), (0, 1, 0), (0, 0, 1))), (("E12", 2),))
    assert GroupElement.from_json(g.to_json()).matrix == g.matrix
    assert all(isinstance(x, str) for r in g.to_json()["matrix"] for x in r)
