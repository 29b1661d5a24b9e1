from __future__ import annotations

from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from freedense.intervals import Interval, IntervalVector, round_down, round_up, sqrt_down, sqrt_up

rats = st.fractions(min_value=-50, max_value=50, max_denominator=1000)
pos = st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=1000)


@st.composite
def intervals(draw):
    a, b = draw(rats), draw(rats)
    return Interval(min(a, b), max(a, b))


@st.composite
def member(draw, iv):
    t = draw(st.fractions(min_value=0, max_value=1, max_denominator=100))
    return iv.lo + t * (iv.hi - iv.lo)


@given(intervals(), intervals(), st.data())
def test_arithmetic_contains_true_results(x, y, data):
    u, v = data.draw(member(x)), data.draw(member(y))
    assert (x + y).contains(u + v)
    assert (x - y).contains(u - v)
    assert (x * y).contains(u * v)
    if not y.contains_zero():
        assert (x / y).contains(u / v)
    assert abs(x).contains(abs(u))
    assert (x ** 3).contains(u ** 3)


@given(pos, st.integers(8, 80))
def test_rounding_and_sqrt_are_outward(x, bits):
    assert round_down(x, bits) <= x <= round_up(x, bits)
    lo, hi = sqrt_down(x, bits), sqrt_up(x, bits)
    assert lo * lo <= x <= hi * hi
    assert hi - lo <= max(hi, 1) * Fraction(1, 1 << (bits - 4))


@given(pos)
def test_log_encloses(x):
    import math

    iv = Interval.point(x).log()
    assert iv.lo - Fraction(1, 10 ** 9) <= Fraction(math.log(x)) <= iv.hi + Fraction(1, 10 ** 9)
    assert iv.width < Fraction(1, 10 ** 12)


def test_vector_dot_and_json():
    v = IntervalVector.exact([1, 2, 3])
    assert v.dot([1, 1, 1]) == Interval.point(6)
    iv = Interval(Fraction(1, 3), Fraction(1, 2))
    assert Interval.from_json(iv.to_json()) == iv
