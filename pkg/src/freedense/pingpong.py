"""Ping-pong certificates.

Each generator g_i owns a cell made of two balls, X_i+ around A+(g_i) and
X_i- around A-(g_i).  A Schottky certificate proves, for every i != j and
every k >= 1, that g_i^k maps both balls of cell j into X_i+ and g_i^-k maps
them into X_i-.  Powers below a threshold N_i are checked one by one with
``map_ball``; all powers from N_i on are covered by a contraction tail.  With
pairwise disjoint balls this is the ping-pong lemma, so the generators are a
free basis.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import __version__
from .encl import HyperbolicProfile, Undecided, hyperbolicity
from .exactalg import (GroupElement, SqMatrix, Word, mat_mul, mat_vec, reduce_word)
from .intervals import Interval, round_down, sqrt_down, sqrt_up
from .projdyn import (Ball, TailBound, ball_hyperplane_margin, ball_inside, ball_separation,
                      canonical, contraction_tail, dist, dist_point_hyperplane, map_ball,
                      point_in_ball_margin, sin2)

POWER_CAP = 2 ** 14
BASEPOINT_RADIUS = Fraction(1, 1 << 10)


@dataclass(frozen=True)
class Cell:
    """Ping-pong cell of one generator: balls around A+ and A-."""

    plus: Ball
    minus: Ball

    def balls(self) -> tuple[Ball, Ball]:
        return (self.plus, self.minus)

    def to_json(self) -> dict:
        return {"plus": self.plus.to_json(), "minus": self.minus.to_json()}

    @classmethod
    def from_json(cls, d) -> Cell:
        return cls(Ball.from_json(d["plus"]), Ball.from_json(d["minus"]))

    def scaled(self, factor: Fraction) -> Cell:
        f = Fraction(factor)
        return Cell(Ball(self.plus.center, min(self.plus.radius * f, Fraction(1))),
                    Ball(self.minus.center, min(self.minus.radius * f, Fraction(1))))


@dataclass(frozen=True)
class Inequality:
    """One verified inequality lhs < rhs; k is a power, 'sep', 'A', 'B' or '>=N'."""

    i: str
    j: str
    k: str
    lhs: Interval
    rhs: Interval

    @property
    def margin(self) -> Fraction:
        return self.rhs.lo - self.lhs.hi

    def to_json(self) -> dict:
        return {"i": self.i, "j": self.j, "k": self.k,
                "lhs": self.lhs.to_json(), "rhs": self.rhs.to_json()}

    @classmethod
    def from_json(cls, d) -> Inequality:
        return cls(d["i"], d["j"], d["k"], Interval.from_json(d["lhs"]), Interval.from_json(d["rhs"]))


@dataclass(frozen=True)
class CheckReport:
    status: str  # "certified" | "failed" | "undecided"
    condition: str | None = None
    witness: dict | None = None
    precision: int | None = None
    inequalities: tuple[Inequality, ...] = ()

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_json(self) -> dict:
        return {"status": self.status, "condition": self.condition, "witness": self.witness,
                "precision": None if self.precision is None else str(self.precision),
                "inequalities": [q.to_json() for q in self.inequalities]}


class _Fail(Exception):
    def __init__(self, status: str, condition: str, witness: dict, precision: int | None = None):
        super().__init__(condition)
        self.report = CheckReport(status, condition, witness, precision)


@dataclass(frozen=True)
class SchottkyCertificate:
    generators: tuple[GroupElement, ...]
    names: tuple[str, ...]
    cells: tuple[Cell, ...]
    thresholds: tuple[int, ...]
    inequalities: tuple[Inequality, ...]
    margin: Fraction | None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def certified(self) -> bool:
        return True

    def named(self) -> dict[str, SqMatrix]:
        return {nm: g.matrix for nm, g in zip(self.names, self.generators)}

    def to_json(self) -> dict:
        return {
            "generators": [g.to_json() for g in self.generators],
            "names": list(self.names),
            "balls": [c.to_json() for c in self.cells],
            "thresholds": [str(t) for t in self.thresholds],
            "inequalities": [q.to_json() for q in self.inequalities],
            "margin": None if self.margin is None else str(self.margin),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d) -> SchottkyCertificate:
        return cls(tuple(GroupElement.from_json(g) for g in d["generators"]), tuple(d["names"]),
                   tuple(Cell.from_json(c) for c in d["balls"]), tuple(int(t) for t in d["thresholds"]),
                   tuple(Inequality.from_json(q) for q in d["inequalities"]),
                   None if d["margin"] is None else Fraction(d["margin"]), d.get("meta", {}))


@dataclass(frozen=True)
class PingPongConfig:
    power_cap: int = POWER_CAP
    basepoint_radius: Fraction = BASEPOINT_RADIUS
    membership_cap: int = 20_000
    precision: int | None = None
    precision_cap: int | None = None


# --------------------------------------------------------------------------
# profiles


@functools.lru_cache(maxsize=512)
def _profile_cached(m: SqMatrix, target: Fraction, precision, cap):
    return hyperbolicity(GroupElement(m), precision, cap, target)


def profile_for(g: GroupElement, target: Fraction, config: PingPongConfig = PingPongConfig()):
    return _profile_cached(g.matrix, target, config.precision, config.precision_cap)


def _target_radius(cells: Sequence[Cell], extra: Sequence[Ball] = ()) -> Fraction:
    radii = [b.radius for c in cells for b in c.balls()] + [b.radius for b in extra]
    r = min(radii) if radii else Fraction(1)
    return min(Fraction(1, 1 << 30), round_down(r / 256, 16))


def _label(i: int, sign: int) -> str:
    return f"{i}{'+' if sign > 0 else '-'}"


def _ival(x: Fraction) -> Interval:
    return Interval(x, x)


def _distance_interval(b1: Ball, b2: Ball) -> Interval:
    d2 = sin2(b1.center, b2.center)
    return Interval(sqrt_down(d2), sqrt_up(d2))


# --------------------------------------------------------------------------
# the core per-source verification


def _source_checks(prof: HyperbolicProfile, target: Ball, sources: Sequence[tuple[str, Ball]],
                   i_label: str, threshold: int | None, power_cap: int) -> tuple[int, list[Inequality]]:
    """Certify prof.matrix^k (X) inside target for every source X and k >= 1.

    Returns the threshold used and the inequality log.  Raises _Fail.
    """
    log: list[Inequality] = []
    a_margin = point_in_ball_margin(prof.a_plus, target)
    a_dist = target.radius - a_margin
    log.append(Inequality(i_label, i_label, "A", _ival(a_dist), _ival(target.radius)))
    if a_margin <= 0:
        raise _Fail("failed", "attracting point outside its ball", {"i": i_label})
    tails = []
    need = 1
    for j_label, x in sources:
        delta = ball_hyperplane_margin(x, prof.b_plus)
        log.append(Inequality(i_label, j_label, "B", _ival(Fraction(0)), _ival(delta)))
        if delta <= 0:
            raise _Fail("failed", "source ball meets repelling hyperplane",
                        {"i": i_label, "j": j_label, "margin": str(delta)})
        tail = contraction_tail(prof, round_down(delta, 32))
        if tail is None or not isinstance(tail, TailBound):
            raise _Fail("undecided", "no contraction tail", {"i": i_label, "j": j_label}, prof.precision)
        tails.append((j_label, tail))
        if threshold is None:
            k = max(tail.first_valid, 1)
            while True:
                r = tail.r(k)
                if r is not None and r < a_margin:
                    break
                k = k * 2 if k < 8 else k + max(1, k // 4)
                if k > power_cap:
                    raise _Fail("undecided", "tail threshold above power cap",
                                {"i": i_label, "j": j_label}, prof.precision)
            # tighten to the smallest valid k (r is non-increasing)
            lo = max(tail.first_valid, 1)
            while lo < k:
                mid = (lo + k) // 2
                r = tail.r(mid)
                if r is not None and r < a_margin:
                    k = mid
                else:
                    lo = mid + 1
            need = max(need, k)
    big_n = need if threshold is None else threshold
    for j_label, tail in tails:
        r = tail.r(big_n)
        if r is None or r >= a_margin:
            raise _Fail("failed", "tail bound does not reach the target",
                        {"i": i_label, "j": j_label, "k": str(big_n)})
        log.append(Inequality(i_label, j_label, f">={big_n}", _ival(r + a_dist), _ival(target.radius)))
    power = prof.matrix
    for k in range(1, big_n):
        for j_label, x in sources:
            img = map_ball(power, x, use_lipschitz=False)
            margin = ball_inside(img, target)
            if margin <= 0:
                raise _Fail("failed", "ball image not inside target",
                            {"i": i_label, "j": j_label, "k": str(k), "margin": str(margin)})
            log.append(Inequality(i_label, j_label, str(k), _ival(target.radius - margin),
                                  _ival(target.radius)))
        power = mat_mul(power, prof.matrix)
    return big_n, log


def _disjointness(labelled: Sequence[tuple[str, Ball]]) -> list[Inequality]:
    log = []
    for a in range(len(labelled)):
        for b in range(a + 1, len(labelled)):
            (la, ba), (lb, bb) = labelled[a], labelled[b]
            sep = ball_separation(ba, bb)
            log.append(Inequality(la, lb, "sep", _ival(ba.radius + bb.radius), _ival(ba.radius + bb.radius + sep)))
            if sep <= 0:
                raise _Fail("failed", "balls not disjoint", {"i": la, "j": lb, "margin": str(sep)})
    return log


def _labelled_balls(cells: Sequence[Cell]) -> list[tuple[str, Ball]]:
    out = []
    for i, c in enumerate(cells):
        out.append((_label(i, 1), c.plus))
        out.append((_label(i, -1), c.minus))
    return out


def _profiles(gens, target, config) -> list[HyperbolicProfile]:
    profs = []
    for i, g in enumerate(gens):
        p = profile_for(g, target, config)
        if not isinstance(p, HyperbolicProfile):
            status = "undecided" if isinstance(p, Undecided) else "failed"
            raise _Fail(status, "generator not certified hyperbolic", {"i": str(i), "reason": p.reason},
                        getattr(p, "precision", None))
        profs.append(p)
    return profs


# --------------------------------------------------------------------------
# Schottky check


def check_schottky(gens: Sequence[GroupElement], cells: Sequence[Cell],
                   config: PingPongConfig = PingPongConfig(), *,
                   thresholds: Sequence[int] | None = None, names: Sequence[str] | None = None,
                   meta: dict | None = None) -> SchottkyCertificate | CheckReport:
    """Verify the all-powers ping-pong table; a pure function of its inputs."""
    gens = tuple(gens)
    cells = tuple(cells)
    if len(gens) != len(cells):
        raise ValueError("need exactly one cell per generator")
    names = tuple(names) if names is not None else tuple(f"g{i}" for i in range(len(gens)))
    log: list[Inequality] = []
    try:
        labelled = _labelled_balls(cells)
        log += _disjointness(labelled)
        target = _target_radius(cells)
        profs = _profiles(gens, target, config)
        used: list[int] = []
        for i, prof in enumerate(profs):
            sources = [(lb, b) for lb, b in labelled if lb[:-1] != str(i)]
            n_i = None if thresholds is None else thresholds[i]
            ths = []
            for sign, p, tgt in ((1, prof, cells[i].plus), (-1, prof.inverse(), cells[i].minus)):
                if len(gens) == 1:
                    # a single hyperbolic element generates a free group of rank 1
                    a_margin = point_in_ball_margin(p.a_plus, tgt)
                    log.append(Inequality(_label(i, sign), _label(i, sign), "A",
                                          _ival(tgt.radius - a_margin), _ival(tgt.radius)))
                    if a_margin <= 0:
                        raise _Fail("failed", "attracting point outside its ball", {"i": _label(i, sign)})
                    ths.append(1)
                    continue
                t, entries = _source_checks(p, tgt, sources, _label(i, sign), n_i, config.power_cap)
                ths.append(t)
                log += entries
            used.append(max(ths) if n_i is None else n_i)
        if thresholds is None:
            # re-run with the common per-generator threshold so both signs share it
            if any(u != 1 for u in used) and len(gens) > 1:
                return check_schottky(gens, cells, config, thresholds=used, names=names, meta=meta)
    except _Fail as f:
        return CheckReport(f.report.status, f.report.condition, f.report.witness,
                           f.report.precision, tuple(log))
    margin = min((q.margin for q in log), default=None)
    info = {"tool_version": __version__, "precision": str(max((p.precision for p in profs), default=0))}
    if meta:
        info.update(meta)
    return SchottkyCertificate(gens, names, cells, tuple(used), tuple(log), margin, info)


def verify_certificate(cert: SchottkyCertificate | dict,
                       config: PingPongConfig = PingPongConfig()) -> CheckReport:
    """Re-run the verifier on stored data and compare the stored log exactly."""
    if isinstance(cert, dict):
        cert = SchottkyCertificate.from_json(cert)
    for g in cert.generators:
        if g.matrix.det() != 1 or not g.matrix.is_integer():
            return CheckReport("failed", "generator not in SL_n(Z)", {})
    res = check_schottky(cert.generators, cert.cells, config, thresholds=cert.thresholds,
                         names=cert.names)
    if not isinstance(res, SchottkyCertificate):
        return res
    if res.inequalities != cert.inequalities or res.margin != cert.margin:
        return CheckReport("failed", "stored inequality log does not match recomputation",
                           {"stored_margin": str(cert.margin), "recomputed_margin": str(res.margin)},
                           inequalities=res.inequalities)
    return CheckReport("certified", inequalities=res.inequalities)


# --------------------------------------------------------------------------
# the rooted definition, verbatim conditions (1)-(4)


@dataclass(frozen=True)
class RootedFreeSystem:
    root: GroupElement
    elements: tuple[GroupElement, ...]
    cells: tuple[Cell, ...]  # cells[0] belongs to the root

    def generators(self) -> tuple[GroupElement, ...]:
        return (self.root,) + tuple(self.elements)


def check_rooted(system: RootedFreeSystem, config: PingPongConfig = PingPongConfig()) -> CheckReport:
    """Conditions (1)-(4) of a g0-rooted free system, with cells as ball pairs.

    (2) is checked for i = 1..s and (3) for i = 0; (4) is checked for i != j
    (with i = j it cannot hold for an open set containing the repelling
    point).  Condition (4) is about g_i itself, not its powers.
    """
    gens = system.generators()
    cells = system.cells
    if len(cells) != len(gens):
        raise ValueError("need one cell per element including the root")
    log: list[Inequality] = []
    try:
        labelled = _labelled_balls(cells)
        try:
            log += _disjointness(labelled)
        except _Fail as f:
            raise _Fail(f.report.status, "1", f.report.witness)
        profs = _profiles(gens, _target_radius(cells), config)
        root = profs[0]
        for i in range(len(gens)):
            others = [root] if i > 0 else profs[1:]
            cond = "2" if i > 0 else "3"
            p = profs[i]
            for sign, a, ball in ((1, p.a_plus, cells[i].plus), (-1, p.a_minus, cells[i].minus)):
                m = point_in_ball_margin(a, ball)
                log.append(Inequality(_label(i, sign), _label(i, sign), "A", _ival(ball.radius - m), _ival(ball.radius)))
                if m <= 0:
                    raise _Fail("failed", cond, {"i": _label(i, sign), "margin": str(m)})
                for q in others:
                    for h in (q.b_plus, q.b_minus):
                        mh = ball_hyperplane_margin(ball, h)
                        log.append(Inequality(_label(i, sign), "B", "0", _ival(Fraction(0)), _ival(mh)))
                        if mh <= 0:
                            raise _Fail("failed", cond, {"i": _label(i, sign), "margin": str(mh)})
        for i, g in enumerate(gens):
            for j in range(len(gens)):
                if i == j:
                    continue
                for sign, src in ((1, cells[j].plus), (-1, cells[j].minus)):
                    img = map_ball(g.matrix, src, use_lipschitz=False)
                    best = max(ball_inside(img, t) for t in cells[i].balls())
                    log.append(Inequality(str(i), _label(j, sign), "1", _ival(-best), _ival(Fraction(0))))
                    if best <= 0:
                        raise _Fail("failed", "4", {"i": str(i), "j": _label(j, sign), "margin": str(best)})
    except _Fail as f:
        return CheckReport(f.report.status, f.report.condition, f.report.witness, f.report.precision, tuple(log))
    return CheckReport("certified", inequalities=tuple(log))


# --------------------------------------------------------------------------
# ball synthesis and power selection


@dataclass(frozen=True)
class SynthesisFail:
    reason: str


def synthesize_balls(profiles: Sequence[HyperbolicProfile], strategy: str = "pairs",
                     shrink_steps: int = 24, scale: Fraction = Fraction(1, 3)) -> list[Cell] | SynthesisFail:
    """Ball pairs around A+ and A- of each profile.

    Each radius starts at ``scale`` times the distance to the nearest other
    attracting/repelling point (and half the distance to every other
    generator's B+/B-), then all radii are halved together until the balls
    are disjoint, avoid the foreign hyperplanes and contain their points.
    """
    if strategy != "pairs":
        raise ValueError(f"unknown strategy {strategy!r}")
    pts = []
    for i, p in enumerate(profiles):
        pts.append((i, 1, p.a_plus))
        pts.append((i, -1, p.a_minus))
    radii = []
    for i, s, a in pts:
        r = Fraction(1, 2)
        for j, t, b in pts:
            if (j, t) == (i, s):
                continue
            d = dist(a, b).lo
            r = min(r, d * scale)
        for j, q in enumerate(profiles):
            if j == i:
                continue
            for h in (q.b_plus, q.b_minus):
                r = min(r, dist_point_hyperplane(a, h).lo / 2)
        if r <= 4 * a.radius:
            return SynthesisFail(f"no room for a ball around A{'+' if s > 0 else '-'} of generator {i}")
        radii.append(round_down(r, 24))
    for step in range(shrink_steps):
        f = Fraction(1, 1 << step)
        cells = []
        for i in range(len(profiles)):
            rp, rm = radii[2 * i] * f, radii[2 * i + 1] * f
            cells.append(Cell(Ball(pts[2 * i][2].center, rp), Ball(pts[2 * i + 1][2].center, rm)))
        if _synthesis_ok(profiles, cells):
            return cells
    return SynthesisFail("constraints still violated after shrinking")


def _synthesis_ok(profiles, cells) -> bool:
    labelled = _labelled_balls(cells)
    for a in range(len(labelled)):
        for b in range(a + 1, len(labelled)):
            if ball_separation(labelled[a][1], labelled[b][1]) <= 0:
                return False
    for i, p in enumerate(profiles):
        if point_in_ball_margin(p.a_plus, cells[i].plus) <= 0:
            return False
        if point_in_ball_margin(p.a_minus, cells[i].minus) <= 0:
            return False
        for j, q in enumerate(profiles):
            if i == j:
                continue
            for ball in cells[i].balls():
                for h in (q.b_plus, q.b_minus):
                    if ball_hyperplane_margin(ball, h) <= 0:
                        return False
    return True


@dataclass(frozen=True)
class PowerFail:
    reason: str
    cap: int


def powered(gens: Sequence[GroupElement], k: int | Sequence[int]) -> list[GroupElement]:
    ks = [k] * len(gens) if isinstance(k, int) else list(k)
    return [g ** e for g, e in zip(gens, ks)]


def min_power(gens: Sequence[GroupElement], cells: Sequence[Cell], cap: int = 64,
              config: PingPongConfig = PingPongConfig(),
              allowed: Callable[[int], bool] | None = None) -> tuple[int, SchottkyCertificate] | PowerFail:
    """Smallest k <= cap (doubling, then bisection) with <g_i^k> certified.

    With ``allowed`` the search runs over the admissible exponents in
    increasing order instead (used to keep images mod m unchanged).
    """
    def attempt(k):
        res = check_schottky(powered(gens, k), cells, config)
        return res if isinstance(res, SchottkyCertificate) else None

    if allowed is not None:
        for k in range(1, cap + 1):
            if allowed(k):
                cert = attempt(k)
                if cert is not None:
                    return k, cert
        return PowerFail("no admissible power certified", cap)
    k, good = 1, None
    while k <= cap:
        cert = attempt(k)
        if cert is not None:
            good = (k, cert)
            break
        k *= 2
    if good is None:
        if k // 2 < cap:
            cert = attempt(cap)
            if cert is not None:
                good = (cap, cert)
                k = cap
        if good is None:
            return PowerFail("no certificate up to cap", cap)
    lo, hi = k // 2 + 1, good[0]
    while lo < hi:
        mid = (lo + hi) // 2
        cert = attempt(mid)
        if cert is not None:
            hi, good = mid, (mid, cert)
        else:
            lo = mid + 1
    return good


# --------------------------------------------------------------------------
# membership by peeling


@dataclass(frozen=True)
class Member:
    word: Word


@dataclass(frozen=True)
class NotMember:
    reason: str
    residue: GroupElement | None = None


@dataclass(frozen=True)
class MembershipUndecided:
    reason: str


def _candidate_points(n: int, bound: int = 3):
    import itertools

    seen = set()
    for b in range(1, bound + 1):
        for v in itertools.product(range(-b, b + 1), repeat=n):
            if max(abs(x) for x in v) != b or v[0] < 0 or all(x == 0 for x in v):
                continue
            c = canonical(v)
            if c not in seen:
                seen.add(c)
                yield v


@functools.lru_cache(maxsize=64)
def _basepoint(cert: SchottkyCertificate, config: PingPongConfig):
    """A small integer vector whose ball is mapped like a foreign cell."""
    n = cert.generators[0].n
    target = _target_radius(cert.cells)
    profs = _profiles(cert.generators, target, config)
    labelled = _labelled_balls(cert.cells)
    for v in _candidate_points(n, {2: 24, 3: 5}.get(n, 3)):
        ball = Ball(v, config.basepoint_radius)
        if any(ball_separation(ball, b) <= 0 for _, b in labelled):
            continue
        try:
            for i, prof in enumerate(profs):
                for p, tgt in ((prof, cert.cells[i].plus), (prof.inverse(), cert.cells[i].minus)):
                    _source_checks(p, tgt, [("p", ball)], "b", None, config.power_cap)
        except _Fail:
            continue
        return v
    return None


def membership(cert: SchottkyCertificate, m: GroupElement,
               config: PingPongConfig = PingPongConfig()) -> Member | NotMember | MembershipUndecided:
    """Decide m in <generators> and recover its reduced word.

    The image of the basepoint under a nonempty reduced word lies in the ball
    of its first letter (sign included), and the basepoint lies outside all
    balls; peeling the letter read off from the current point therefore
    recovers the word.  A non-identity residue whose point is outside every
    ball cannot be in the group, and neither can a residue whose next peeled
    letter cancels the previous one (reduced words do not backtrack).
    """
    if m.n != (cert.generators[0].n if cert.generators else m.n):
        raise ValueError("dimension mismatch")
    if not cert.generators:
        return Member(()) if m.is_identity() else NotMember("trivial group", m)
    p0 = _basepoint(cert, config)
    if p0 is None:
        return MembershipUndecided("no certified basepoint")
    gens = [g.matrix for g in cert.generators]
    invs = [g.inverse().matrix for g in cert.generators]
    u = m.matrix
    letters: list[tuple[str, int]] = []
    balls = _labelled_balls(cert.cells)
    for _ in range(config.membership_cap):
        v = mat_vec(u, p0)
        hit = next((lb for lb, b in balls if b.contains_point(v)), None)
        if hit is None:
            if u.is_identity():
                return Member(reduce_word(letters))
            return NotMember("residue maps the basepoint outside every cell", GroupElement(u))
        i, sign = int(hit[:-1]), (1 if hit[-1] == "+" else -1)
        if letters and letters[-1] == (cert.names[i], -sign):
            # a group element peels along its reduced word, which never backtracks
            return NotMember("peeling backtracked", GroupElement(u))
        letters.append((cert.names[i], sign))
        u = mat_mul(invs[i], u) if sign > 0 else mat_mul(gens[i], u)
    return MembershipUndecided(f"peeling did not finish within {config.membership_cap} steps")
