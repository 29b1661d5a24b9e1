"""Certified eigen-data of integer matrices.

Root isolation: approximate roots z_i come from mpmath and are rounded to
dyadic Gaussian rationals.  The matrix diag(z) - w 1^T with Weierstrass
corrections w_i = p(z_i) / prod_{j != i}(z_i - z_j) has characteristic
polynomial p, so by Gershgorin every root lies in some disc
D(z_i - w_i, (n-1)|w_i|), and a union of k discs disjoint from the rest holds
exactly k roots.  All of that is evaluated in exact rational arithmetic.

Eigenvectors: the columns (rows) of adj(lambda I - m) are right (left)
eigenvectors for any eigenvalue lambda.  Evaluating the adjugate polynomial on
an interval that encloses lambda gives a box containing a true eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import mpmath

from .exactalg import (GroupElement, IntPolynomial, SqMatrix, char_poly_adjugate,
                       integer_poly, mat_inv, squarefree)
from .intervals import (ComplexBox, Interval, IntervalVector, mpf_to_fraction, round_down,
                        round_up, sqrt_down, sqrt_up)
from .projdyn import (EnclosedProjHyperplane, EnclosedProjPoint, hyperplane_from_box,
                      point_from_box)

DEFAULT_PRECISION = 64
DEFAULT_CAP = 4096
DEGREE_CAP = 8
TARGET_RADIUS = Fraction(1, 1 << 30)


@dataclass(frozen=True)
class Undecided:
    reason: str
    precision: int


@dataclass(frozen=True)
class NotHyperbolic:
    reason: str


@dataclass(frozen=True)
class ModulusTie:
    """Certified equality of moduli at an extreme (e.g. a conjugate pair)."""

    which: str
    clusters: tuple


@dataclass(frozen=True)
class RootCluster:
    center: tuple[Fraction, Fraction]
    radius: Fraction
    modulus: Interval
    multiplicity: int = 1

    @property
    def box(self) -> ComplexBox:
        re, im = self.center
        return ComplexBox(Interval(re - self.radius, re + self.radius),
                          Interval(im - self.radius, im + self.radius))

    def contains(self, z: complex | tuple) -> bool:
        """Exact disc membership for a rational point (re, im)."""
        re, im = (z.real, z.imag) if isinstance(z, complex) else z
        dr, di = Fraction(re) - self.center[0], Fraction(im) - self.center[1]
        return dr * dr + di * di <= self.radius * self.radius

    def real_interval(self) -> Interval:
        return Interval(self.center[0] - self.radius, self.center[0] + self.radius)

    def meets_real_axis(self) -> bool:
        return abs(self.center[1]) <= self.radius


# --------------------------------------------------------------------------
# Gaussian-rational helpers: complex numbers as (re, im) Fraction pairs


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _csub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _cabs2(a) -> Fraction:
    return a[0] * a[0] + a[1] * a[1]


def _ceval(coeffs: Sequence[Fraction], z):
    acc = (Fraction(0), Fraction(0))
    for c in reversed(coeffs):
        acc = _cmul(acc, z)
        acc = (acc[0] + c, acc[1])
    return acc


def _round_gauss(z, bits: int):
    """Round an mpc to dyadic (re, im) with ~bits significant bits of |z|."""
    re, im = mpf_to_fraction(z.real), mpf_to_fraction(z.imag)
    mag = max(abs(re), abs(im))
    if mag == 0:
        return (Fraction(0), Fraction(0))
    e = mag.numerator.bit_length() - mag.denominator.bit_length()
    fb = max(bits - e, 0)

    def rnd(x):
        return Fraction(round(x * (1 << fb)), 1 << fb)

    return (rnd(re), rnd(im))


def _approx_roots(p: IntPolynomial, bits: int):
    coef_bits = max(abs(c).bit_length() for c in p.coeffs)
    with mpmath.workprec(bits + 2 * coef_bits + 64):
        coeffs = [mpmath.mpf(c) for c in reversed(p.coeffs)]
        try:
            roots = mpmath.polyroots(coeffs, maxsteps=400, extraprec=bits + 2 * coef_bits)
        except mpmath.libmp.libhyper.NoConvergence:
            comp = mpmath.matrix(p.degree, p.degree)
            lead = mpmath.mpf(p.leading)
            for i in range(p.degree):
                if i > 0:
                    comp[i, i - 1] = 1
                comp[i, p.degree - 1] = -mpmath.mpf(p.coeffs[i]) / lead
            roots = list(mpmath.eig(comp, left=False, right=False))
        return [_round_gauss(mpmath.mpc(r), bits) for r in roots]


def _gershgorin(p: IntPolynomial, zs, bits: int) -> list[RootCluster] | None:
    n = p.degree
    lead = Fraction(p.leading)
    q = [Fraction(c) / lead for c in p.coeffs]
    clusters = []
    for i, z in enumerate(zs):
        den = (Fraction(1), Fraction(0))
        for j, zj in enumerate(zs):
            if j != i:
                den = _cmul(den, _csub(z, zj))
        d2 = _cabs2(den)
        if d2 == 0:
            return None
        num = _ceval(q, z)
        # w = num / den = num * conj(den) / |den|^2
        w = _cmul(num, (den[0], -den[1]))
        w = (w[0] / d2, w[1] / d2)
        center = _round_center(_csub(z, w), bits)
        # rounding the center moves it by at most |center - (z - w)|
        shift = sqrt_up(_cabs2(_csub(center, _csub(z, w))), bits + 8)
        rad = (n - 1) * sqrt_up(_cabs2(w), bits + 8) + shift
        m2 = _cabs2(center)
        modulus = Interval(max(Fraction(0), sqrt_down(m2, bits + 8) - rad), sqrt_up(m2, bits + 8) + rad)
        clusters.append(RootCluster(center, round_up(rad, bits + 8) if rad else rad, modulus))
    for i in range(n):
        for j in range(i + 1, n):
            a, b = clusters[i], clusters[j]
            s = a.radius + b.radius
            if _cabs2(_csub(a.center, b.center)) <= s * s:
                return None
    return clusters


def _round_center(c, bits: int):
    mag = max(abs(c[0]), abs(c[1]))
    if mag == 0:
        return c
    e = mag.numerator.bit_length() - mag.denominator.bit_length()
    fb = max(2 * bits - e, 0)
    return (Fraction(round(c[0] * (1 << fb)), 1 << fb), Fraction(round(c[1] * (1 << fb)), 1 << fb))


def _conjugate_partner(clusters, i) -> int | None:
    """Index j != i whose disc must hold the conjugate of the root in disc i."""
    c = clusters[i]
    if c.meets_real_axis():
        return None
    mirror = (c.center[0], -c.center[1])
    hits = []
    for j, d in enumerate(clusters):
        s = c.radius + d.radius
        if _cabs2(_csub(mirror, d.center)) <= s * s:
            hits.append(j)
    if len(hits) == 1 and hits[0] != i:
        return hits[0]
    return None


def isolate_roots(p: IntPolynomial, precision: int = DEFAULT_PRECISION, cap: int = DEFAULT_CAP,
                  require_separation: bool = True, degree_cap: int = DEGREE_CAP,
                  extremes: tuple[str, ...] = ("top", "bottom")):
    """Disjoint single-root discs covering all roots of a squarefree p.

    With ``require_separation`` the precision is raised until the largest and
    smallest modulus clusters (or only those named in ``extremes``) are
    strictly separated in modulus from all the others; the result is then sorted by decreasing modulus.  A certified
    conjugate-pair tie at an extreme returns ``ModulusTie``; running out of
    precision returns ``Undecided``.
    """
    if p.degree > degree_cap:
        raise ValueError(f"degree {p.degree} above cap {degree_cap}")
    if not squarefree(p):
        raise ValueError("polynomial is not squarefree")
    if p.degree == 0:
        return []
    bits = precision
    while True:
        clusters = _gershgorin(p, _approx_roots(p, bits), bits)
        if clusters is not None:
            if not require_separation or p.degree == 1:
                return sorted(clusters, key=lambda c: -c.modulus.mid)
            order = sorted(range(len(clusters)), key=lambda i: -clusters[i].modulus.mid)
            cl = [clusters[i] for i in order]
            top_ok = "top" not in extremes or all(cl[0].modulus.lo > c.modulus.hi for c in cl[1:])
            bot_ok = "bottom" not in extremes or all(cl[-1].modulus.hi < c.modulus.lo for c in cl[:-1])
            if top_ok and bot_ok:
                return cl
            for which, idx in (("top", 0), ("bottom", len(cl) - 1)):
                if which not in extremes:
                    continue
                j = _conjugate_partner(cl, idx)
                if j is not None:
                    return ModulusTie(which, (cl[idx], cl[j]))
        if bits >= cap:
            return Undecided("root clusters not separated", bits)
        bits = min(2 * bits, cap)


# --------------------------------------------------------------------------
# eigenvector enclosures


def _eval_adjugate(adj: list[SqMatrix], lam: Interval) -> list[list[Interval]]:
    """adj(lam I - m) = sum_k B_k lam^(n-k), entrywise Horner."""
    n = adj[0].n
    out = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = Interval.point(0)
            for b in adj:
                acc = acc * lam + b.rows[i][j]
            row.append(acc)
        out.append(row)
    return out


def _best_line(rows: list[list[Interval]], side: str) -> IntervalVector | None:
    n = len(rows)
    if side == "right":
        lines = [IntervalVector(tuple(rows[i][j] for i in range(n))) for j in range(n)]
    else:
        lines = [IntervalVector(tuple(rows[i])) for i in range(n)]
    good = [v for v in lines if v.excludes_zero()]
    if not good:
        return None
    return max(good, key=lambda v: (-v.max_rel_width(), sum(abs(x) for x in v.mid())))


def eigen_box(m: SqMatrix, lam: Interval, side: str = "right",
              adj: list[SqMatrix] | None = None) -> IntervalVector | None:
    """Box containing a true right (or left) eigenvector for the eigenvalue in lam."""
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    if adj is None:
        adj = char_poly_adjugate(m)[1]
    return _best_line(_eval_adjugate(adj, lam), side)


def eig_enclosure(m: SqMatrix, lam: Interval, side: str = "right",
                  precision: int = DEFAULT_PRECISION):
    """Enclosed eigendirection: a point for side='right', the kernel hyperplane
    of the left eigen-covector for side='left'.  Undecided if the box is too wide.
    """
    box = eigen_box(m, lam, side)
    if box is None:
        return Undecided("adjugate enclosure contains zero", precision)
    enc = point_from_box(box) if side == "right" else hyperplane_from_box(box)
    if enc is None:
        return Undecided("eigenvector box too wide", precision)
    return enc


# --------------------------------------------------------------------------
# hyperbolic profiles


@dataclass(frozen=True)
class HyperbolicProfile:
    """Certified eigen-data of a hyperbolic matrix.

    u_* / phi_* are boxes containing true right eigenvectors / left
    eigen-covectors for lambda_max and lambda_min; the projective
    enclosures are derived from them.  B+ = ker(phi_plus) is the span of the
    non-top eigenvectors, B- = ker(phi_minus) the span of the non-bottom ones.
    """

    matrix: SqMatrix
    lambda_max: Interval
    lambda_min: Interval
    u_plus: IntervalVector
    u_minus: IntervalVector
    phi_plus: IntervalVector
    phi_minus: IntervalVector
    a_plus: EnclosedProjPoint
    a_minus: EnclosedProjPoint
    b_plus: EnclosedProjHyperplane
    b_minus: EnclosedProjHyperplane
    gap_top: Interval
    gap_bottom: Interval
    precision: int
    element: GroupElement | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.matrix.n

    def inverse(self) -> HyperbolicProfile:
        """Profile of g^-1: A+(g^-1) = A-(g), B+(g^-1) = B-(g)."""
        return HyperbolicProfile(
            mat_inv(self.matrix), self.lambda_min.reciprocal(), self.lambda_max.reciprocal(),
            self.u_minus, self.u_plus, self.phi_minus, self.phi_plus,
            self.a_minus, self.a_plus, self.b_minus, self.b_plus,
            self.gap_bottom, self.gap_top, self.precision,
            None if self.element is None else self.element.inverse())

    def power(self, k: int) -> HyperbolicProfile:
        """Profile of g^k (k >= 1): same eigendirections."""
        if k < 1:
            raise ValueError("power must be positive; use inverse() first")
        from .exactalg import mat_pow

        kk = Interval.point(k)
        return replace(self, matrix=mat_pow(self.matrix, k),
                       lambda_max=(self.lambda_max ** k).rounded(self.precision + 16),
                       lambda_min=(self.lambda_min ** k).rounded(self.precision + 16),
                       gap_top=self.gap_top * kk, gap_bottom=self.gap_bottom * kk,
                       element=None if self.element is None else self.element ** k)

    def to_json(self) -> dict:
        return {"lambda_max": self.lambda_max.to_json(), "lambda_min": self.lambda_min.to_json(),
                "a_plus": self.a_plus.to_json(), "a_minus": self.a_minus.to_json(),
                "b_plus": self.b_plus.to_json(), "b_minus": self.b_minus.to_json(),
                "gap_top": self.gap_top.to_json(), "gap_bottom": self.gap_bottom.to_json(),
                "precision": self.precision}


def _auto_precision(m: SqMatrix, precision: int | None, cap: int | None) -> tuple[int, int]:
    eb = m.max_entry_bits()
    start = max(precision or DEFAULT_PRECISION, 2 * eb + 64)
    top = max(cap or DEFAULT_CAP, 8 * eb + 256)
    return start, top


def matrix_profile(m: SqMatrix, precision: int | None = None, cap: int | None = None,
                   target_radius: Fraction | None = None):
    """hyperbolicity() for any invertible rational matrix (test fixtures in GL_n(Q)).

    Enclosure radii are driven below ``target_radius`` (default 2^-30) and
    below 2^-8 times the spectral ratio |lambda_2 / lambda_1|, so that strongly
    contracting powers get enclosures finer than their contraction scale.
    """
    n = m.n
    if m.det() == 0:
        return NotHyperbolic("singular matrix")
    coeffs, adj = char_poly_adjugate(m)
    p = integer_poly(coeffs)
    if not squarefree(p):
        return NotHyperbolic("characteristic polynomial is not squarefree")
    if n == 2 and m.det() == 1 and abs(m.trace()) <= 2:
        return NotHyperbolic("|trace| <= 2 in SL_2 forces equal moduli")
    bits, top = _auto_precision(m, precision, cap)
    while True:
        res = isolate_roots(p, bits, max(bits, top))
        if isinstance(res, ModulusTie):
            return NotHyperbolic(f"certified modulus tie at the {res.which}")
        if isinstance(res, Undecided):
            return res
        clusters = res
        target = _target_for(clusters, target_radius)
        lam_max = clusters[0].real_interval()
        lam_min = clusters[-1].real_interval()
        boxes = [eigen_box(m, lam_max, "right", adj), eigen_box(m, lam_min, "right", adj),
                 eigen_box(m, lam_max, "left", adj), eigen_box(m, lam_min, "left", adj)]
        encs = None
        if all(b is not None for b in boxes):
            u_p, u_m, f_p, f_m = (b.rounded(bits + 32) for b in boxes)
            # centers need enough bits to resolve the target radius
            cb = max(64, target.denominator.bit_length() - target.numerator.bit_length() + 40)
            encs = (point_from_box(u_p, cb), point_from_box(u_m, cb),
                    hyperplane_from_box(f_p, cb), hyperplane_from_box(f_m, cb))
        if encs is not None and all(e is not None and e.radius <= target for e in encs):
            break
        if bits >= top:
            return Undecided("eigenvector enclosures too wide", bits)
        bits = min(2 * bits, top)
    a_p, a_m, b_p, b_m = encs
    second = max(c.modulus.hi for c in clusters[1:])
    penult = min(c.modulus.lo for c in clusters[:-1])
    gap_top = (abs(lam_max) / Interval(second, second)).log() if second > 0 else Interval(0, 0)
    gap_bottom = (Interval(penult, penult) / abs(lam_min)).log()
    return HyperbolicProfile(m, lam_max, lam_min, u_p, u_m, f_p, f_m, a_p, a_m, b_p, b_m,
                             Interval(gap_top.lo, gap_top.lo), Interval(gap_bottom.lo, gap_bottom.lo),
                             bits)


def _target_for(clusters, target_radius) -> Fraction:
    target = TARGET_RADIUS if target_radius is None else Fraction(target_radius)
    if len(clusters) > 1:
        top = max(c.modulus.hi for c in clusters[1:]) / clusters[0].modulus.lo
        bottom = clusters[-1].modulus.hi / min(c.modulus.lo for c in clusters[:-1])
        target = min(target, round_down(min(top, bottom) / 256, 16))
    return target


def hyperbolicity(g: GroupElement, precision: int | None = None, cap: int | None = None,
                  target_radius: Fraction | None = None):
    """HyperbolicProfile | NotHyperbolic | Undecided for g in SL_n(Z)."""
    m = g.matrix if isinstance(g, GroupElement) else g
    if not m.is_integer():
        raise ValueError("hyperbolicity expects an integer matrix")
    res = matrix_profile(m, precision, cap, target_radius)
    if isinstance(res, HyperbolicProfile) and isinstance(g, GroupElement):
        res = replace(res, element=g)
    return res


# --------------------------------------------------------------------------
# singular value ratio


def _is_psd(a: list[list[Fraction]]) -> bool:
    """Exact positive-semidefiniteness test (LDL^T with diagonal pivoting)."""
    a = [list(r) for r in a]
    n = len(a)
    active = list(range(n))
    while active:
        k = max(active, key=lambda i: a[i][i])
        piv = a[k][k]
        if piv < 0:
            return False
        if piv == 0:
            return all(a[i][j] == 0 for i in active for j in active)
        active.remove(k)
        for i in active:
            f = a[i][k] / piv
            if f:
                for j in active:
                    a[i][j] -= f * a[k][j]
    return True


def _gram(m: SqMatrix) -> list[list[Fraction]]:
    n = m.n
    return [[sum(Fraction(m.rows[k][i]) * m.rows[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)]


def _wedge2(g: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(g)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [[g[i][k] * g[j][l] - g[i][l] * g[j][k] for (k, l) in pairs] for (i, j) in pairs]


def _eigsy(a: list[list[Fraction]]) -> list:
    bits = max(max(abs(x.numerator).bit_length(), x.denominator.bit_length()) for r in a for x in r)
    with mpmath.workprec(160 + 2 * bits):
        mat = mpmath.matrix([[mpmath.mpf(x.numerator) / x.denominator for x in r] for r in a])
        vals = mpmath.eigsy(mat, eigvals_only=True)
        return sorted(vals[i] for i in range(len(a)))


def _shift(a, t):
    return [[x - (t if i == j else 0) for j, x in enumerate(r)] for i, r in enumerate(a)]


def sv_ratio_bound(m: SqMatrix) -> Interval:
    """Certified enclosure [1, U] of sigma_1 sigma_2 / sigma_n^2.

    U is certified by exact PSD checks: G - t I >= 0 gives sigma_n^2 >= t and
    s I - wedge^2 G >= 0 gives sigma_1^2 sigma_2^2 <= s.
    """
    if m.det() == 0:
        raise ValueError("matrix must be invertible")
    g = _gram(m)
    n = m.n
    mu = _eigsy(g)
    t = None
    for rel in (0, 40, 24, 12, 4):
        cand = round_down(mpf_to_fraction(mu[0]), 60)
        if rel:
            cand = cand * (1 - Fraction(1, 1 << rel))
        if cand > 0 and _is_psd(_shift(g, cand)):
            t = cand
            break
    if t is None:
        raise ArithmeticError("could not certify smallest singular value")
    if n == 1:
        return Interval(1, 1)
    w = _wedge2(g)
    nu = _eigsy(w)
    s = None
    for rel in (0, 40, 24, 12, 4):
        cand = round_up(mpf_to_fraction(nu[-1]), 60)
        if rel:
            cand = cand * (1 + Fraction(1, 1 << rel))
        if _is_psd([[-x for x in r] for r in _shift(w, cand)]):
            s = cand
            break
    if s is None:
        raise ArithmeticError("could not certify top singular values")
    upper = round_up(sqrt_up(s, 64) / t, 40)
    return Interval(1, max(upper, Fraction(1)))


def refine_roots(p: IntPolynomial, previous: list[RootCluster], precision: int) -> list[RootCluster]:
    """Re-isolate at higher precision, keeping results nested in ``previous``.

    Each new disc not contained in its predecessor is replaced by the
    predecessor, which is still a valid single-root disc; the family stays
    pairwise disjoint because the previous family was.
    """
    new = isolate_roots(p, precision, precision, require_separation=False)
    out = []
    for old in previous:
        match = [c for c in new if _disc_inside(c, old)]
        out.append(match[0] if len(match) == 1 else old)
    return sorted(out, key=lambda c: -c.modulus.mid)


def _disc_inside(inner: RootCluster, outer: RootCluster) -> bool:
    gap = outer.radius - inner.radius
    return gap >= 0 and _cabs2(_csub(inner.center, outer.center)) <= gap * gap
