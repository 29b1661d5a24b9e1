from __future__ import annotations

import itertools
import json
import random
from fractions import Fraction

import pytest

from conftest import A, B, assert_roundtrip, assert_sound, elem
from freedense.encl import hyperbolicity
from freedense.exactalg import SqMatrix, evaluate_word, mat_pow
from freedense.pingpong import (Cell, CheckReport, Member, NotMember, PowerFail, RootedFreeSystem,
                                SchottkyCertificate, SynthesisFail, check_rooted, check_schottky,
                                membership, min_power, powered, synthesize_balls, verify_certificate)
from freedense.projdyn import Ball

# smallest common power certifying <a^k, b^k> with the synthesized cells
REGRESSION_K = 2


def test_overlapping_balls_fail(a, b):
    ball = Ball((1, 0), Fraction(1, 4))
    rep = check_schottky([a, b], [Cell(ball, Ball((0, 1), Fraction(1, 4))),
                                  Cell(Ball((1, Fraction(1, 10)), Fraction(1, 4)), Ball((1, -1), Fraction(1, 4)))])
    assert isinstance(rep, CheckReport) and rep.status == "failed"
    assert rep.condition == "balls not disjoint"
    root = RootedFreeSystem(a, (b,), (Cell(ball, Ball((0, 1), Fraction(1, 4))),
                                      Cell(Ball((1, Fraction(1, 10)), Fraction(1, 4)), Ball((1, -1), Fraction(1, 4)))))
    assert check_rooted(root).condition == "1"


def test_singleton_certifies(a, ab_cells):
    g = a ** 16
    cert = check_schottky([g], [ab_cells[0]])
    assert isinstance(cert, SchottkyCertificate)
    assert check_rooted(RootedFreeSystem(g, (), (ab_cells[0],))).certified


def test_regression_power(ab_power, ab_cells):
    k, cert = ab_power
    assert k == REGRESSION_K
    assert isinstance(check_schottky(powered(cert.generators, 1), ab_cells), SchottkyCertificate)
    assert not isinstance(check_schottky(powered([elem(A), elem(B)], k - 1), ab_cells), SchottkyCertificate) or k == 1


def test_sixteenth_powers_certify(a, b, ab_cells):
    cert = check_schottky([a ** 16, b ** 16], ab_cells)
    assert isinstance(cert, SchottkyCertificate)
    assert_sound(cert, random.Random(1), count=200)


def test_already_certified_gens_give_one(ab_power, ab_cells):
    _, cert = ab_power
    k, _ = min_power(cert.generators, ab_cells, 8)
    assert k == 1


def test_a_and_a_squared_never_certify(a):
    prof = hyperbolicity(a)
    assert isinstance(synthesize_balls([prof, hyperbolicity(a ** 2)]), SynthesisFail)
    cells = synthesize_balls([prof])
    for k in (1, 2, 5, 64):
        assert not isinstance(check_schottky(powered([a, a ** 2], k), [cells[0], cells[0]]), SchottkyCertificate)
    assert isinstance(min_power([a, a ** 2], [cells[0], cells[0]], 16), PowerFail)


def test_synthesis_examples(a, b, ab_cells):
    assert len(ab_cells) == 2
    one = synthesize_balls([hyperbolicity(a)])
    assert len(one) == 1


def test_no_relation_exhaustive(ab_power):
    _, cert = ab_power
    gens = dict(zip(cert.names, cert.generators))
    letters = [(nm, s) for nm in cert.names for s in (1, -1)]
    count = 0
    for length in range(1, 7):
        for w in itertools.product(letters, repeat=length):
            if any(x[0] == y[0] and x[1] == -y[1] for x, y in zip(w, w[1:])):
                continue
            assert not evaluate_word(w, gens).is_identity()
            count += 1
    assert count == sum(4 * 3 ** (n - 1) for n in range(1, 7))


def test_soundness_and_roundtrip(ab_power):
    _, cert = ab_power
    rng = random.Random(42)
    assert_sound(cert, rng)
    assert_roundtrip(cert, rng)


def test_membership_examples(a, b, ab_cells):
    cert = check_schottky([a ** 16, b ** 16], ab_cells)
    n = 2
    assert membership(cert, elem(SqMatrix.identity(n))) == Member(())
    assert membership(cert, cert.generators[0]) == Member((("g0", 1),))
    got = membership(cert, elem(((1, 1), (0, 1))))
    assert isinstance(got, NotMember)
    w = (("g0", 1), ("g1", -1), ("g0", 2), ("g1", 1), ("g0", -1))
    g = evaluate_word(w, dict(zip(cert.names, cert.generators)))
    assert membership(cert, g) == Member(w)


def test_certificate_json_roundtrip_reproduces_margins(ab_power):
    _, cert = ab_power
    data = json.loads(json.dumps(cert.to_json()))
    again = SchottkyCertificate.from_json(data)
    rep = verify_certificate(again)
    assert rep.certified
    assert [q.margin for q in rep.inequalities] == [q.margin for q in cert.inequalities]
    assert verify_certificate(data).certified


def test_tampered_certificate_fails(ab_power):
    _, cert = ab_power
    data = cert.to_json()
    data["balls"][0]["plus"]["radius"] = str(Fraction(data["balls"][0]["plus"]["radius"]) * 3)
    assert not verify_certificate(data).certified
    data = cert.to_json()
    data["generators"][0] = {**data["generators"][0], "matrix": [["1", "1"], ["0", "1"]]}
    assert not verify_certificate(data).certified


def test_monotonicity_of_failures(ab_power, ab_cells):
    # enlarging radii never repairs a failure: once two balls overlap they keep overlapping
    _, cert = ab_power
    for factor in (4, 8, 16):
        cells = [c.scaled(factor) for c in ab_cells]
        rep = check_schottky(cert.generators, cells)
        assert not isinstance(rep, SchottkyCertificate)
        for bigger in (2, 3):
            rep2 = check_schottky(cert.generators, [c.scaled(bigger) for c in cells])
            assert not isinstance(rep2, SchottkyCertificate)


def test_rooted_example(ab_power, ab_cells):
    _, cert = ab_power
    g0, g1 = cert.generators
    rep = check_rooted(RootedFreeSystem(g0 ** 8, (g1 ** 8,), tuple(ab_cells)))
    assert rep.certified


def test_commuting_pair_never_certifies(a):
    cells = synthesize_balls([hyperbolicity(a)])
    got = min_power([a, elem(mat_pow(A, 3))], [cells[0], cells[0]], 8)
    assert isinstance(got, PowerFail)


def test_dimension_mismatch_raises(ab_power):
    _, cert = ab_power
    with pytest.raises(ValueError):
        membership(cert, elem(SqMatrix.identity(3)))
