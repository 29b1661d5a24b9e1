from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from freedense.encl import hyperbolicity
from freedense.exactalg import GroupElement, SqMatrix
from freedense.pingpong import min_power, synthesize_balls

settings.register_profile("freedense", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("freedense")

A = SqMatrix(((2, 1), (1, 1)))
B = SqMatrix(((1, 1), (1, 2)))


def elem(rows, name=None) -> GroupElement:
    m = rows if isinstance(rows, SqMatrix) else SqMatrix(tuple(tuple(r) for r in rows))
    return GroupElement(m, None if name is None else ((name, 1),))


@pytest.fixture(scope="session")
def a():
    return elem(A, "a")


@pytest.fixture(scope="session")
def b():
    return elem(B, "b")


@pytest.fixture(scope="session")
def ab_cells(a, b):
    return synthesize_balls([hyperbolicity(a), hyperbolicity(b)])


@pytest.fixture(scope="session")
def ab_power(a, b, ab_cells):
    """(k, certificate) for <a^k, b^k>."""
    got = min_power([a, b], ab_cells, 64)
    assert not hasattr(got, "reason"), got
    return got


def frac_vec(xs):
    return tuple(Fraction(x) for x in xs)


def random_reduced_word(rng, names, max_len, min_len=1):
    """A uniformly-lengthed random reduced word (no adjacent cancellation)."""
    length = rng.randint(min_len, max_len)
    word = []
    while len(word) < length:
        letter = (rng.choice(names), rng.choice((1, -1)))
        if word and word[-1] == (letter[0], -letter[1]):
            continue
        word.append(letter)
    return tuple(word)


def assert_sound(cert, rng, count=500, max_len=8):
    """Random nonempty reduced words in the generators never evaluate to the identity."""
    from freedense.exactalg import evaluate_word

    gens = dict(zip(cert.names, cert.generators))
    for _ in range(count):
        w = random_reduced_word(rng, cert.names, max_len)
        assert not evaluate_word(w, gens).is_identity(), w


def assert_roundtrip(cert, rng, count=200, max_len=6):
    from freedense.exactalg import evaluate_word, reduce_word
    from freedense.pingpong import Member, membership

    gens = dict(zip(cert.names, cert.generators))
    for _ in range(count):
        w = random_reduced_word(rng, cert.names, max_len, min_len=0)
        got = membership(cert, evaluate_word(w, gens))
        assert isinstance(got, Member) and got.word == reduce_word(w), (w, got)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
