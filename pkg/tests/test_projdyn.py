from __future__ import annotations

import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from conftest import A, B, elem
from freedense.encl import HyperbolicProfile, hyperbolicity, matrix_profile
from freedense.exactalg import SqMatrix, mat_inv, mat_pow, mat_vec
from freedense.projdyn import (Ball, EnclosedProjHyperplane, EnclosedProjPoint, NotTransversal,
                               TransversalityWitness, contraction_tail, dist, dist_point_hyperplane,
                               hausdorff_hyperplanes, lipschitz, map_ball, profile_close, sin2,
                               transversality)

P = EnclosedProjPoint
H = EnclosedProjHyperplane


def _rand_vec(rng, n, span=20):
    while True:
        v = tuple(Fraction(rng.randint(-span, span), rng.randint(1, 5)) for _ in range(n))
        if any(v):
            return v


def _rand_sl(rng, n, steps=4):
    m = SqMatrix.identity(n)
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        rows = [[int(r == c) for c in range(n)] for r in range(n)]
        rows[i][j] = rng.choice((-2, -1, 1, 2))
        m = m @ SqMatrix(tuple(map(tuple, rows)))
    return m


def test_dist_examples():
    assert dist(P((1, 0)), P((0, 1))) == dist(P((0, 1)), P((1, 0)))
    assert dist(P((1, 0)), P((0, 1))).hi == 1
    assert dist(P((1, 2, 3)), P((2, 4, 6))).lo == 0
    assert sin2((1, 0), (1, 1)) == Fraction(1, 2)
    d = dist(P((1, 0)), P((1, 1)))
    assert d.lo ** 2 <= Fraction(1, 2) <= d.hi ** 2


def test_point_hyperplane_examples():
    assert dist_point_hyperplane(P((1, 0, 0)), H((1, 0, 0))).hi == 1
    assert dist_point_hyperplane(P((0, 1, 0)), H((1, 0, 0))).lo == 0
    d = dist_point_hyperplane(P((1, 1, 0)), H((1, 0, 0)))
    assert d.lo ** 2 <= Fraction(1, 2) <= d.hi ** 2


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _sin(v, w):
    v, w = _unit(v), _unit(w)
    return float(np.linalg.norm(np.cross(v, w))) if len(v) == 3 else abs(v[0] * w[1] - v[1] * w[0])


def _plane_samples(phi, count):
    """Unit vectors spread over the plane ker(phi) in R^3."""
    phi = _unit(phi)
    basis = np.linalg.svd(phi.reshape(1, 3))[2][1:]
    t = np.linspace(0, np.pi, count, endpoint=False)
    return np.cos(t)[:, None] * basis[0] + np.sin(t)[:, None] * basis[1]


def _min_dist_to_plane(v, phi, count=10_000):
    v = _unit(v)
    pts = _plane_samples(phi, count)
    return float(np.min(np.linalg.norm(np.cross(pts, v), axis=1)))


def test_point_hyperplane_matches_sampled_minimum():
    rng = random.Random(11)
    for _ in range(25):
        v, phi = _rand_vec(rng, 3), _rand_vec(rng, 3)
        d = dist_point_hyperplane(P(v), H(phi))
        oracle = _min_dist_to_plane([float(x) for x in v], [float(x) for x in phi])
        assert float(d.lo) - 1e-3 <= oracle <= float(d.hi) + 1e-3


def _sampled_hausdorff(phi1, phi2, count=720):
    p1, p2 = _plane_samples(phi1, count), _plane_samples(phi2, count)

    def one_side(xs, ys):
        return max(float(np.min(np.linalg.norm(np.cross(ys, x), axis=1))) for x in xs)

    return max(one_side(p1, p2), one_side(p2, p1))


def test_hausdorff_examples_and_sampled_oracle():
    assert hausdorff_hyperplanes(H((1, 2, 3)), H((1, 2, 3))).lo == 0
    d = hausdorff_hyperplanes(H((1, 0, 0)), H((0, 1, 0)))
    assert d.hi == 1
    assert _sampled_hausdorff([1, 0, 0], [0, 1, 0]) == pytest.approx(1, abs=1e-3)
    rng = random.Random(5)
    for _ in range(10):
        a, b = _rand_vec(rng, 3), _rand_vec(rng, 3)
        d = hausdorff_hyperplanes(H(a), H(b))
        oracle = _sampled_hausdorff([float(x) for x in a], [float(x) for x in b])
        assert float(d.lo) - 1e-2 <= oracle <= float(d.hi) + 1e-2


def test_triangle_type_property():
    rng = random.Random(17)
    for _ in range(200):
        a, b, c = P(_rand_vec(rng, 3)), H(_rand_vec(rng, 3)), H(_rand_vec(rng, 3))
        lhs = dist_point_hyperplane(a, c).lo
        rhs = dist_point_hyperplane(a, b).hi + hausdorff_hyperplanes(b, c).hi
        assert lhs <= rhs


def test_metric_axioms_sampled():
    rng = random.Random(3)
    for _ in range(1000):
        n = rng.choice((2, 3))
        x, y, z = (P(_rand_vec(rng, n)) for _ in range(3))
        dxy = dist(x, y)
        assert dxy == dist(y, x)
        assert 0 <= dxy.lo <= dxy.hi <= 1
        assert dist(x, z).lo <= dxy.hi + dist(y, z).hi


def test_lipschitz_sampled():
    rng = random.Random(23)
    for _ in range(100):
        n = rng.choice((2, 3))
        g = _rand_sl(rng, n)
        x, y = _rand_vec(rng, n), _rand_vec(rng, n)
        lip = lipschitz(g).hi
        assert sin2(mat_vec(g, x), mat_vec(g, y)) <= lip * lip * sin2(x, y)


def _ball_samples(rng, b: Ball, count):
    """Exact rational points in b, biased towards the boundary."""
    c = b.center
    n = len(c)
    out = []
    while len(out) < count:
        e = _rand_vec(rng, n)
        t = Fraction(rng.randint(1, 1000), 1000) * b.radius
        x = tuple(ci + t * ei / max(abs(v) for v in e) for ci, ei in zip(c, e))
        if any(x) and b.contains_point(x):
            out.append(x)
    return out


def test_map_ball_identity_and_diag():
    b = Ball((1, Fraction(1, 3), 0), Fraction(1, 10))
    img = map_ball(SqMatrix.identity(3), b)
    assert sin2(img.center, b.center) <= Fraction(1, 2 ** 120)
    assert b.radius <= img.radius <= b.radius + Fraction(1, 2 ** 38)
    d = SqMatrix.diag([2, Fraction(1, 2)])
    small = map_ball(d, Ball((1, 0), Fraction(1, 10)), use_lipschitz=False)
    assert small.radius < Fraction(1, 10)


def test_map_ball_sampled_containment():
    rng = random.Random(29)
    for trial in range(50):
        n = rng.choice((2, 3))
        g = _rand_sl(rng, n)
        b = Ball(_rand_vec(rng, n), Fraction(rng.randint(1, 50), 400))
        for flag in (True, False):
            img = map_ball(g, b, use_lipschitz=flag)
            for x in _ball_samples(rng, b, 20 if trial % 5 else 100):
                assert img.contains_point(mat_vec(g, x))


def test_transversality_examples():
    pa, pb = hyperbolicity(elem(A)), hyperbolicity(elem(B))
    w = transversality(pa, pb)
    assert isinstance(w, TransversalityWitness) and w.epsilon > 0
    # oracle: A+(a) = (1, phi-1), B+(b) = ker of left eigencovector of b
    phi = (1 + mpmath.sqrt(5)) / 2
    a_plus = [1, float(phi - 1)]
    b_covec = [float(phi - 1), 1]
    true = abs(np.dot(a_plus, b_covec)) / np.linalg.norm(a_plus) / np.linalg.norm(b_covec)
    assert w.bounds["A+(g) vs B+(h)"] <= true + 1e-12
    assert isinstance(transversality(pa, pa), NotTransversal)
    inv = hyperbolicity(elem(mat_inv(A)))
    assert isinstance(transversality(pa, inv), NotTransversal)


def _tail_check(m: SqMatrix, delta: Fraction, a_plus, phi, ks, seed):
    prof = hyperbolicity(elem(m)) if m.is_integer() else matrix_profile(m)
    assert isinstance(prof, HyperbolicProfile)
    tail = contraction_tail(prof, delta)
    rs = [tail.r(k) for k in range(tail.first_valid, max(ks) + 1)]
    assert all(r is not None for r in rs)
    assert all(x >= y for x, y in zip(rs, rs[1:]))
    mpmath.mp.dps = 60
    rng = random.Random(seed)
    n = m.n
    checked = 0
    while checked < 50:
        v = [mpmath.mpf(rng.uniform(-1, 1)) for _ in range(n)]
        dphi = abs(sum(p * x for p, x in zip(phi, v))) / (mpmath.norm(phi) * mpmath.norm(v))
        if dphi < mpmath.mpf(delta.numerator) / delta.denominator:
            continue
        checked += 1
        for k in ks:
            if k < tail.first_valid:
                continue
            gk = mpmath.matrix([[mpmath.mpf(Fraction(x).numerator) / Fraction(x).denominator for x in row]
                                for row in mat_pow(m, k).rows])
            w = gk * mpmath.matrix(v)
            a = mpmath.matrix(a_plus)
            cross2 = (mpmath.norm(w) ** 2 * mpmath.norm(a) ** 2 - (sum(w[i] * a[i] for i in range(n))) ** 2)
            d = mpmath.sqrt(max(cross2, 0)) / (mpmath.norm(w) * mpmath.norm(a))
            assert d <= tail.r(k) * (1 + mpmath.mpf(10) ** -30)
    return tail


def test_contraction_tail_diag():
    tail = _tail_check(SqMatrix.diag([3, 1, Fraction(1, 3)]), Fraction(1, 2), [1, 0, 0], [1, 0, 0],
                       range(1, 11), 1)
    assert tail.r(10) < Fraction(1, 3 ** 8)


def test_contraction_tail_golden():
    mpmath.mp.dps = 60
    g = (mpmath.sqrt(5) - 1) / 2
    _tail_check(A, Fraction(1, 4), [1, g], [1, g], range(1, 13), 2)


def _eig_oracle(m: SqMatrix):
    """Top right eigenvector and top left eigen-covector from mpmath at high precision."""
    mpmath.mp.dps = 60
    mm = mpmath.matrix([[mpmath.mpf(x) for x in row] for row in m.rows])
    vals, right = mpmath.eig(mm)
    top = max(range(len(vals)), key=lambda i: abs(vals[i]))
    valsT, leftT = mpmath.eig(mm.T)
    topT = max(range(len(valsT)), key=lambda i: abs(valsT[i]))
    u = [mpmath.re(right[i, top]) for i in range(m.n)]
    phi = [mpmath.re(leftT[i, topT]) for i in range(m.n)]
    return u, phi


def test_contraction_tail_random_sampled():
    rng = random.Random(31)
    done = 0
    while done < 4:
        m = _rand_sl(rng, 3, 5)
        prof = hyperbolicity(elem(m))
        if not isinstance(prof, HyperbolicProfile):
            continue
        tail = contraction_tail(prof, Fraction(1, 5))
        if not hasattr(tail, "r"):
            continue
        u, phi = _eig_oracle(m)
        top = max(2 * tail.k0, tail.first_valid)
        _tail_check(m, Fraction(1, 5), u, phi, range(tail.first_valid, top + 1), done)
        done += 1


def test_profile_close():
    pa, pb = hyperbolicity(elem(A)), hyperbolicity(elem(B))
    assert profile_close(pa, pa, Fraction(1, 10 ** 6)) is True
    assert profile_close(pa, hyperbolicity(elem(mat_pow(A, 2))), Fraction(1, 10 ** 6)) is True
    sep = dist(pa.a_plus, pb.a_plus).lo
    assert profile_close(pa, pb, sep / 2) is False
