from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import elem
from freedense.congruence import (CosetConstraint, ModMatrix, closure, coset_contains, density_battery,
                                  exponent_primes, factorize, group_order, kernel_structure, reduce,
                                  standard_generators)
from freedense.exactalg import GroupElement, SqMatrix, mat_mul

SL2 = standard_generators(2)


def _brute_count(n: int, m: int) -> int:
    """|SL_n(Z/m)| by listing every matrix (tiny cases only)."""
    count = 0
    for ents in itertools.product(range(m), repeat=n * n):
        if ModMatrix(m, ents, n).special:
            count += 1
    return count


def _bfs_order(n: int, m: int) -> int:
    return closure([ModMatrix.from_rows(m, g.rows) for g in standard_generators(n)]).order


def test_group_order_examples():
    assert group_order(3, 2) == 168
    assert group_order(2, 2) == 6
    assert group_order(2, 4) == 48
    assert group_order(2, 1) == 1


@pytest.mark.parametrize("n,m", [(2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 2)])
def test_group_order_matches_brute_force(n, m):
    assert group_order(n, m) == _brute_count(n, m)


@pytest.mark.parametrize("n,m", [(2, m) for m in range(2, 13)] + [(3, m) for m in range(2, 5)])
def test_group_order_matches_bfs(n, m):
    assert _bfs_order(n, m) == group_order(n, m)


def test_closure_examples():
    assert closure([ModMatrix.identity(2, 7)]).order == 1
    img = closure([ModMatrix.from_rows(5, g.rows) for g in SL2])
    assert img.order == 120 == group_order(2, 5)
    assert closure([ModMatrix.from_rows(5, ((1, 1), (0, 1)))]).order == 5


def test_closure_respects_lagrange():
    rng = random.Random(9)
    for _ in range(30):
        n, m = rng.choice(((2, 6), (2, 8), (2, 9), (3, 2), (3, 3)))
        gens = []
        for _ in range(rng.randint(1, 2)):
            x = SqMatrix.identity(n)
            for _ in range(3):
                i, j = rng.sample(range(n), 2)
                rows = [[int(r == c) for c in range(n)] for r in range(n)]
                rows[i][j] = rng.randint(-3, 3)
                x = x @ SqMatrix(tuple(map(tuple, rows)))
            gens.append(reduce(x, m))
        assert group_order(n, m) % closure(gens).order == 0


def test_capped_closure_is_flagged():
    img = closure([ModMatrix.from_rows(7, g.rows) for g in SL2], cap=50)
    assert img.capped and img.elements is None


small_sl2 = st.tuples(st.integers(-6, 6), st.integers(-6, 6)).map(
    lambda xy: SqMatrix(((1, xy[0]), (0, 1))) @ SqMatrix(((1, 0), (xy[1], 1))))


@given(small_sl2, small_sl2, st.integers(2, 40))
def test_reduction_is_homomorphism(x, y, m):
    assert reduce(mat_mul(x, y), m) == reduce(x, m) * reduce(y, m)


def test_crt_consistency_on_fixtures():
    fixtures = [
        [elem(g) for g in SL2],
        [elem(((1, 2), (0, 1))), elem(((1, 0), (2, 1)))],
        [elem(((2, 1), (1, 1))), elem(((1, 1), (1, 2)))],
        [elem(((1, 3), (0, 1))), elem(((0, -1), (1, 0)))],
    ]
    for gens in fixtures:
        rep = density_battery(gens, 30)
        ok = {r.m: r.surjective == "yes" for r in rep.rows}
        for m1, m2 in itertools.combinations(range(2, 16), 2):
            if m1 * m2 <= 30 and factorize(m1).keys().isdisjoint(factorize(m2).keys()):
                assert ok[m1 * m2] == (ok[m1] and ok[m2]), (m1, m2)


def test_battery_gamma2_and_empty():
    rep = density_battery([elem(((1, 2), (0, 1))), elem(((1, 0), (2, 1)))], 6)
    assert rep.row(2).surjective == "no" and rep.row(2).order == 1
    empty = density_battery([], 6, n=2)
    assert empty.failing == list(range(2, 7))


def test_battery_sl3_standard_pair():
    rep = density_battery([elem(g) for g in standard_generators(3)], 30)
    assert rep.all_surjective and not rep.undecided


def test_coset_examples():
    x = elem(((2, 1), (1, 1)))
    c = CosetConstraint.of(x, 4)
    assert coset_contains(x, c)
    k = elem(((1, 4), (0, 1)))
    assert coset_contains(GroupElement(mat_mul(x.matrix, k.matrix)), c)
    assert not coset_contains(elem(SqMatrix.identity(2)), c)
    with pytest.raises(ValueError):
        CosetConstraint(4, ModMatrix.from_rows(4, ((2, 0), (0, 1))))


@pytest.mark.parametrize("n,p,expected", [(2, 2, (8, True, 3)), (2, 3, (27, True, 3)),
                                          (3, 2, (256, True, 8))])
def test_kernel_structure(n, p, expected):
    ks = kernel_structure(n, p)
    assert (ks.order, ks.elementary_abelian, ks.rank) == expected
    assert group_order(n, p * p) == group_order(n, p) * p ** (n * n - 1)


def test_exponent_primes():
    assert exponent_primes(2, 3) == {2, 3}
    assert 7 in exponent_primes(3, 2)
