"""Geometry of real projective space with the standard metric.

d([v],[w]) = |v ^ w| / (|v| |w|) with Euclidean norms, i.e. the sine of the
angle between the lines.  On rational vectors d^2 is rational, which is what
makes every comparison below exact up to one square root.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

from .exactalg import GroupElement, SqMatrix, mat_mul, mat_pow, mat_vec
from .intervals import Interval, IntervalVector, round_down, round_up, sqrt_down, sqrt_up

if TYPE_CHECKING:
    from .encl import HyperbolicProfile

BITS = 64


def canonical(v: Sequence) -> tuple[Fraction, ...]:
    """Scale so the largest |coordinate| is 1 and the first nonzero one is positive."""
    v = [Fraction(x) for x in v]
    big = max(abs(x) for x in v)
    if big == 0:
        raise ValueError("zero vector has no projective class")
    first = next(x for x in v if x != 0)
    s = big if first > 0 else -big
    return tuple(x / s for x in v)


def _dot(v, w) -> Fraction:
    return sum((Fraction(a) * b for a, b in zip(v, w)), Fraction(0))


def sin2(v: Sequence, w: Sequence) -> Fraction:
    """Exact squared standard distance between [v] and [w]."""
    vv, ww, vw = _dot(v, v), _dot(w, w), _dot(v, w)
    return (vv * ww - vw * vw) / (vv * ww)


def cos2(v: Sequence, phi: Sequence) -> Fraction:
    """Exact squared distance from [v] to the hyperplane ker(phi)."""
    vp = _dot(v, phi)
    return vp * vp / (_dot(v, v) * _dot(phi, phi))


@dataclass(frozen=True)
class EnclosedProjPoint:
    """All projective points within ``radius`` of [center]."""

    center: tuple[Fraction, ...]
    radius: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "center", canonical(self.center))
        object.__setattr__(self, "radius", Fraction(self.radius))
        if not 0 <= self.radius < 1:
            raise ValueError(f"enclosure radius must lie in [0, 1), got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def to_json(self) -> dict:
        return {"center": [str(x) for x in self.center], "radius": str(self.radius)}

    @classmethod
    def from_json(cls, d) -> EnclosedProjPoint:
        return cls(tuple(Fraction(x) for x in d["center"]), Fraction(d["radius"]))


@dataclass(frozen=True)
class EnclosedProjHyperplane:
    """Hyperplanes ker(phi') with d_h(ker phi', ker conormal) <= radius."""

    conormal: tuple[Fraction, ...]
    radius: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "conormal", canonical(self.conormal))
        object.__setattr__(self, "radius", Fraction(self.radius))
        if not 0 <= self.radius < 1:
            raise ValueError(f"enclosure radius must lie in [0, 1), got {self.radius}")

    def dual(self) -> EnclosedProjPoint:
        return EnclosedProjPoint(self.conormal, self.radius)

    def to_json(self) -> dict:
        return {"conormal": [str(x) for x in self.conormal], "radius": str(self.radius)}

    @classmethod
    def from_json(cls, d) -> EnclosedProjHyperplane:
        return cls(tuple(Fraction(x) for x in d["conormal"]), Fraction(d["radius"]))


@dataclass(frozen=True)
class Ball:
    """Closed ball {x : d(x, [center]) <= radius}.

    Cells use 0 < radius < 1; images produced by ``map_ball`` may carry
    radius 1, meaning no information (the whole space).
    """

    center: tuple[Fraction, ...]
    radius: Fraction

    def __post_init__(self):
        object.__setattr__(self, "center", canonical(self.center))
        object.__setattr__(self, "radius", Fraction(self.radius))
        if not 0 <= self.radius <= 1:
            raise ValueError("ball radius must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains_point(self, v: Sequence) -> bool:
        """Exact test d([v], center) <= radius."""
        return sin2(v, self.center) <= self.radius * self.radius

    def to_json(self) -> dict:
        return {"center": [str(x) for x in self.center], "radius": str(self.radius)}

    @classmethod
    def from_json(cls, d) -> Ball:
        return cls(tuple(Fraction(x) for x in d["center"]), Fraction(d["radius"]))


def point_from_box(box: IntervalVector, bits: int = BITS) -> EnclosedProjPoint | None:
    """Projective enclosure of every nonzero vector in ``box``.

    With c the (rounded) midpoint and h an upper bound for |v - c| over the
    box, d([v],[c]) <= |v - c| / |v| <= h / (|c| - h).
    """
    mid = box.mid()
    scale = max(abs(x) for x in mid)
    if scale == 0:
        return None
    c = tuple(round_up(x / scale, bits) for x in mid)
    h2 = Fraction(0)
    for ci, comp in zip(c, box):
        lo, hi = comp.lo / scale, comp.hi / scale
        e = max(abs(hi - ci), abs(ci - lo))
        h2 += e * e
    h = sqrt_up(h2, bits)
    cn = sqrt_down(_dot(c, c), bits)
    if cn <= h:
        return None
    r = round_up(h / (cn - h), 32)
    if r >= 1:
        return None
    return EnclosedProjPoint(c, r)


def hyperplane_from_box(box: IntervalVector, bits: int = BITS) -> EnclosedProjHyperplane | None:
    p = point_from_box(box, bits)
    return None if p is None else EnclosedProjHyperplane(p.center, p.radius)


def _slack_interval(d2: Fraction, slack: Fraction) -> Interval:
    lo = sqrt_down(d2, BITS) - slack
    hi = sqrt_up(d2, BITS) + slack
    return Interval(max(lo, Fraction(0)), min(hi, Fraction(1)))


def dist(p: EnclosedProjPoint, q: EnclosedProjPoint) -> Interval:
    """Interval containing d(x, y) for all x in p, y in q."""
    return _slack_interval(sin2(p.center, q.center), p.radius + q.radius)


def dist_point_hyperplane(p: EnclosedProjPoint, h: EnclosedProjHyperplane) -> Interval:
    """Interval for min over the hyperplane of d(x, .) = |phi(v)| / (|phi| |v|)."""
    return _slack_interval(cos2(p.center, h.conormal), p.radius + h.radius)


def hausdorff_hyperplanes(h1: EnclosedProjHyperplane, h2: EnclosedProjHyperplane) -> Interval:
    """Hausdorff distance of two hyperplanes = distance of their conormal points."""
    return dist(h1.dual(), h2.dual())


# --------------------------------------------------------------------------
# transversality


@dataclass(frozen=True)
class TransversalityWitness:
    pair: tuple[str, str]
    epsilon: Fraction
    bounds: dict  # label -> certified lower bound

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "epsilon": str(self.epsilon),
                "bounds": {k: str(v) for k, v in sorted(self.bounds.items())}}


@dataclass(frozen=True)
class NotTransversal:
    reason: str


@dataclass(frozen=True)
class GeomUndecided:
    reason: str


def _attracting(p) -> dict:
    return {"A+": p.a_plus, "A-": p.a_minus}


def _repelling(p) -> dict:
    return {"B+": p.b_plus, "B-": p.b_minus}


def transversality_distances(p1, p2) -> dict[str, Interval]:
    out = {}
    for (src, dst, tag) in ((p1, p2, "g,h"), (p2, p1, "h,g")):
        for an, a in _attracting(src).items():
            for bn, b in _repelling(dst).items():
                out[f"{an}({tag[0]}) vs {bn}({tag[2]})"] = dist_point_hyperplane(a, b)
    return out


def transversality(p1: HyperbolicProfile, p2: HyperbolicProfile, names=("g", "h")):
    """Certified epsilon-transversality of two hyperbolic profiles.

    A certified violation is reported for commuting pairs: commuting elements
    with simple spectra share an eigenbasis, so A+(g) is an eigenvector of h
    and lies in B+(h) or B-(h).
    """
    m1, m2 = p1.matrix, p2.matrix
    if mat_mul(m1, m2) == mat_mul(m2, m1):
        return NotTransversal("elements commute, so they share eigendirections")
    ds = transversality_distances(p1, p2)
    lows = {k: round_down(d.lo, 64) if d.lo > 0 else d.lo for k, d in ds.items()}
    eps = min(lows.values())
    if eps > 0:
        return TransversalityWitness(tuple(names), eps, lows)
    return GeomUndecided("a point-hyperplane distance enclosure reaches 0")


def is_transversal(p1, p2, eps: Fraction = Fraction(0)) -> bool:
    w = transversality(p1, p2)
    return isinstance(w, TransversalityWitness) and w.epsilon > eps


# --------------------------------------------------------------------------
# Lipschitz estimates and ball images


def lipschitz(g) -> Interval:
    """Certified bound on the global projective Lipschitz constant of g."""
    from .encl import sv_ratio_bound

    m = g.matrix if isinstance(g, GroupElement) else g
    return sv_ratio_bound(m)


def _frobenius_bounds(m: SqMatrix) -> tuple[Fraction, Fraction]:
    """Upper bounds for sigma_1 and sigma_1*sigma_2 (Frobenius norms of m, wedge^2 m)."""
    n = m.n
    gram = [[sum(Fraction(m.rows[k][i]) * m.rows[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)]
    tr = sum(gram[i][i] for i in range(n))
    tr2 = sum(gram[i][j] * gram[j][i] for i in range(n) for j in range(n))
    e2 = (tr * tr - tr2) / 2
    return sqrt_up(tr, BITS), sqrt_up(e2, BITS)


def image_radius(m: SqMatrix, center: Sequence, radius: Fraction,
                 lip: Fraction | None = None) -> Fraction:
    """Radius R with m(B(center, radius)) inside B(m center, R).

    Writing x = c + e with |c| = 1, e orthogonal to c and |e| <= t = tan(theta):
    d(mx, mc) <= s12 t / (|mc| (|mc| - s1 t)) where s1 >= sigma_1 and
    s12 >= sigma_1 sigma_2.  The global Lipschitz bound is used when smaller.
    """
    radius = Fraction(radius)
    if radius == 0:
        return Fraction(0)
    best = Fraction(1)
    if lip is not None:
        best = min(best, lip * radius)
    if radius < 1:
        t = radius / sqrt_down(1 - radius * radius, BITS)
        s1, s12 = _frobenius_bounds(m)
        mc = mat_vec(m, center)
        ratio = sqrt_down(_dot(mc, mc) / _dot(center, center), BITS)
        denom = ratio - s1 * t
        if denom > 0:
            best = min(best, s12 * t / (ratio * denom))
    return min(round_up(best, 40), Fraction(1))


def map_ball(g, b: Ball, use_lipschitz: bool = True) -> Ball:
    """A ball certified to contain g(b)."""
    m = g.matrix if isinstance(g, GroupElement) else g
    lip = None
    if use_lipschitz:
        try:
            lip = lipschitz(m).hi
        except ArithmeticError:
            lip = None
    image = canonical(mat_vec(m, b.center))
    radius = image_radius(m, b.center, b.radius, lip)
    # round the center well below the radius scale; the move is added to the radius
    scale = max(0, radius.denominator.bit_length() - radius.numerator.bit_length()) if radius else 0
    center = tuple(round_nearest(x, BITS + scale) for x in image)
    if center != image:
        radius += sqrt_up(sin2(center, image), BITS)
    return Ball(center, min(round_up(radius, 40), Fraction(1)))


def round_nearest(x: Fraction, bits: int) -> Fraction:
    return Fraction(round(Fraction(x) * (1 << bits)), 1 << bits)


def ball_inside(inner: Ball, outer: Ball) -> Fraction:
    """Certified lower bound on outer.radius - (d(centers) + inner.radius).

    Positive means inner (closed) sits inside the open interior of outer.
    """
    return outer.radius - (sqrt_up(sin2(inner.center, outer.center), BITS) + inner.radius)


def ball_separation(b1: Ball, b2: Ball) -> Fraction:
    """Certified lower bound on d(centers) - r1 - r2 (positive = disjoint)."""
    return sqrt_down(sin2(b1.center, b2.center), BITS) - b1.radius - b2.radius


def ball_hyperplane_margin(b: Ball, h: EnclosedProjHyperplane) -> Fraction:
    """Certified lower bound on d(b, H) (may be negative)."""
    return sqrt_down(cos2(b.center, h.conormal), BITS) - h.radius - b.radius


def point_in_ball_margin(p: EnclosedProjPoint, b: Ball) -> Fraction:
    """Certified lower bound on b.radius - d(p, center)."""
    return b.radius - (sqrt_up(sin2(p.center, b.center), BITS) + p.radius)


# --------------------------------------------------------------------------
# contraction tails


@dataclass(frozen=True)
class TailBound:
    """r(k) >= d(g^k x, A+(g)) for all k >= first_valid and d(x, B+(g)) >= delta.

    r(k) = C q / (1 - C q) with q = prefactor * beta^(k // k0).
    """

    delta: Fraction
    k0: int
    beta: Fraction
    prefactor: Fraction
    c_const: Fraction
    first_valid: int

    def r(self, k: int) -> Fraction | None:
        if k < self.first_valid:
            return None
        q = self.prefactor * self.beta ** (k // self.k0)
        cq = self.c_const * q
        if cq >= 1:
            return None
        return min(Fraction(1), round_up(cq / (1 - cq), 40))

    def to_json(self) -> dict:
        return {"delta": str(self.delta), "k0": self.k0, "beta": str(self.beta),
                "prefactor": str(self.prefactor), "C": str(self.c_const),
                "first_valid": self.first_valid}


def _interval_matrix_times_exact(m: SqMatrix, rows: list[list[Interval]]) -> list[list[Interval]]:
    n = m.n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Interval.point(0)
            for k in range(n):
                a = m.rows[i][k]
                if a:
                    acc = acc + rows[k][j] * a
            row.append(acc)
        out.append(row)
    return out


def _frobenius_upper(rows: list[list[Interval]]) -> Fraction:
    s = Fraction(0)
    for r in rows:
        for x in r:
            a = max(abs(x.lo), abs(x.hi))
            s += a * a
    return sqrt_up(s, BITS)


def contraction_tail(profile: HyperbolicProfile, delta: Fraction, k0_hint: int = 1,
                     k0_cap: int = 64, k_cap: int = 1 << 14) -> TailBound | GeomUndecided:
    """Quantitative convergence of g^k[v] to A+(g) away from B+(g).

    Decompose unit v = a u + w with u the top unit eigenvector, w in ker(phi).
    |a| >= delta |phi| |u| / |phi(u)|, |w| <= 1 + |a| and
    |g^k w| <= |g^k (I - P)| |w| with P = u phi / phi(u) the spectral projector.
    """
    delta = Fraction(delta)
    if delta <= 0:
        return GeomUndecided("delta must be positive")
    u, phi = profile.u_plus, profile.phi_plus
    n = len(u)
    phiu = phi.dot(u)
    if phiu.contains_zero():
        return GeomUndecided("phi(u) enclosure contains zero")
    proj = [[u[i] * phi[j] / phiu for j in range(n)] for i in range(n)]
    i_minus_p = [[(Interval.point(1) if i == j else Interval.point(0)) - proj[i][j]
                  for j in range(n)] for i in range(n)]
    norms = (u.norm_sq() * phi.norm_sq()).sqrt(BITS)
    a_min = delta * norms.lo / abs(phiu).hi
    c_const = round_up(1 + 1 / a_min, 40)
    lam = abs(profile.lambda_max).lo
    m = profile.matrix

    def q(j: int) -> Fraction:
        rows = _interval_matrix_times_exact(mat_pow(m, j), i_minus_p) if j else i_minus_p
        return round_up(_frobenius_upper(rows) / lam ** j, 40)

    k0 = max(1, k0_hint)
    while k0 <= k0_cap:
        beta = q(k0)
        if beta < 1:
            prefactor = max(q(j) for j in range(k0))
            first = 0
            while first <= k_cap:
                qq = prefactor * beta ** (first // k0)
                if c_const * qq < 1:
                    return TailBound(delta, k0, beta, prefactor, c_const, first)
                first += k0
            return GeomUndecided("tail bound not below 1 within k cap")
        k0 *= 2
    return GeomUndecided("no k0 with beta < 1 at current precision")


# --------------------------------------------------------------------------
# closeness of eigen-data


def profile_close(g: HyperbolicProfile, g0: HyperbolicProfile, eps) -> bool | GeomUndecided:
    """All of A+-, B+- of g within eps of those of g0 (True/False/undecided)."""
    eps = Fraction(eps)
    ds = [dist(g.a_plus, g0.a_plus), dist(g.a_minus, g0.a_minus),
          hausdorff_hyperplanes(g.b_plus, g0.b_plus),
          hausdorff_hyperplanes(g.b_minus, g0.b_minus)]
    if all(d.hi < eps for d in ds):
        return True
    if any(d.lo >= eps for d in ds):
        return False
    return GeomUndecided("an enclosure straddles eps")
