"""Search procedures that turn existence arguments into certified objects.

Every search is index-ordered: candidate i is drawn from a generator seeded by
(seed, purpose, i), so the first accepted candidate does not depend on how
the work is scheduled.  Acceptance always goes through the certifying
verifiers (hyperbolicity, transversality, check_schottky, membership).
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import lcm
from typing import Callable, Iterator, Sequence

from . import __version__
from .congruence import (CosetConstraint, DensityReport, ModMatrix, coset_contains, density_battery,
                         exponent_primes, factorize, reduce, standard_generators)
from .encl import HyperbolicProfile, hyperbolicity
from .exactalg import GroupElement, SqMatrix, Word, evaluate_word, reduce_word
from .intervals import round_down
from .pingpong import (Ball, Cell, CheckReport, Member, MembershipUndecided, NotMember,
                       PingPongConfig, PowerFail, RootedFreeSystem, SchottkyCertificate,
                       SynthesisFail, check_rooted, check_schottky, membership, min_power,
                       synthesize_balls)
from .projdyn import (TransversalityWitness, ball_hyperplane_margin, dist,
                      dist_point_hyperplane, point_in_ball_margin, transversality)


# --------------------------------------------------------------------------
# configuration and ambient generators


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    max_word_len: int = 6
    max_candidates: int = 400
    power_cap: int = 64
    exponent_cap: int = 400
    threshold_cap: int = 64
    precision_cap: int | None = None
    n: int = 3

    def rng(self, purpose: str, index: int) -> random.Random:
        return random.Random(f"{self.seed}:{purpose}:{index}")

    def pingpong(self) -> PingPongConfig:
        # small thresholds keep search-time certification cheap; a weak
        # element is then blamed and its exponent raised instead
        return PingPongConfig(power_cap=self.threshold_cap, precision_cap=self.precision_cap)

    def to_json(self) -> dict:
        return {"seed": str(self.seed), "max_word_len": str(self.max_word_len),
                "max_candidates": str(self.max_candidates), "power_cap": str(self.power_cap),
                "exponent_cap": str(self.exponent_cap), "threshold_cap": str(self.threshold_cap),
                "precision_cap": None if self.precision_cap is None else str(self.precision_cap),
                "n": str(self.n)}


def ambient_generators(n: int) -> dict[str, GroupElement]:
    """Elementary matrices E_ij (1-based names) and the standard pair x1, x2."""
    gens: dict[str, GroupElement] = {}
    for i in range(n):
        for j in range(n):
            if i != j:
                rows = [[1 if a == b else 0 for b in range(n)] for a in range(n)]
                rows[i][j] = 1
                name = f"E{i + 1}{j + 1}"
                gens[name] = GroupElement(SqMatrix(tuple(map(tuple, rows))), ((name, 1),))
    for k, m in enumerate(standard_generators(n), start=1):
        gens[f"x{k}"] = GroupElement(m, ((f"x{k}", 1),))
    return gens


def random_word(rng: random.Random, names: Sequence[str], length: int) -> Word:
    """A reduced word of exactly ``length`` letters with exponents +-1."""
    out: list[tuple[str, int]] = []
    while len(out) < length:
        a, e = rng.choice(names), rng.choice((1, -1))
        if out and out[-1] == (a, -e):
            continue
        out.append((a, e))
    return reduce_word(out)


def _elementary_names(n: int) -> list[str]:
    return [f"E{i + 1}{j + 1}" for i in range(n) for j in range(n) if i != j]


def admissible(n: int, m_max: int) -> Callable[[int], bool]:
    """Exponents k coprime to every |SL_n(Z/m)|, m <= m_max.

    g -> g^k is then a bijection on every cyclic subgroup of SL_n(Z/m), so
    raising generators to k does not change their images mod m.
    """
    primes = exponent_primes(n, m_max) if m_max >= 2 else set()
    return lambda k: all(k % p for p in primes)


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SearchResult:
    element: GroupElement
    profile: HyperbolicProfile
    witnesses: tuple[TransversalityWitness, ...]
    candidates: int


@dataclass(frozen=True)
class SearchExhausted:
    reason: str
    candidates: int
    residue_matches: int = 0
    best_margin: Fraction | None = None


@dataclass(frozen=True)
class ExtensionFail:
    stage: str
    reason: str


def _witnesses(prof: HyperbolicProfile, existing: Sequence[HyperbolicProfile]):
    out = []
    best = None
    for i, q in enumerate(existing):
        w = transversality(q, prof, (f"e{i}", "new"))
        if not isinstance(w, TransversalityWitness):
            return None, best
        out.append(w)
        best = w.epsilon if best is None else min(best, w.epsilon)
    return tuple(out), best


def _fits_cells(prof: HyperbolicProfile, cells: Sequence[Cell]) -> bool:
    """A+-(h) outside every existing ball, and every ball away from B+-(h)."""
    for c in cells:
        for b in c.balls():
            if point_in_ball_margin(prof.a_plus, b) >= 0 or point_in_ball_margin(prof.a_minus, b) >= 0:
                return False
            if dist(prof.a_plus, _center(b)).lo <= 2 * b.radius or dist(prof.a_minus, _center(b)).lo <= 2 * b.radius:
                return False
            for h in (prof.b_plus, prof.b_minus):
                if ball_hyperplane_margin(b, h) <= 0:
                    return False
    return True


def _center(b: Ball):
    from .projdyn import EnclosedProjPoint

    return EnclosedProjPoint(b.center, Fraction(0))


def _accept(g: GroupElement, existing, cells, config) -> tuple | None:
    prof = hyperbolicity(g, cap=config.precision_cap)
    if not isinstance(prof, HyperbolicProfile):
        return None
    ws, _ = _witnesses(prof, existing)
    if ws is None:
        return None
    if cells and not _fits_cells(prof, cells):
        return None
    return prof, ws


def find_transversal(existing: Sequence[HyperbolicProfile], config: SearchConfig,
                     cells: Sequence[Cell] = (), purpose: str = "transversal",
                     accept: Callable[[GroupElement], bool] | None = None) -> SearchResult | SearchExhausted:
    """A hyperbolic element certified transversal to every existing profile.

    With no existing profiles the candidates are random words; otherwise they
    are conjugates w g_1 w^-1 of the first existing element (same spectrum,
    moved eigen-data), falling back to fresh words every third candidate.
    """
    n = config.n
    amb = ambient_generators(n)
    names = _elementary_names(n)
    base = existing[0].element if existing and existing[0].element is not None else None
    for idx in range(config.max_candidates):
        rng = config.rng(purpose, idx)
        length = 2 + idx % max(1, config.max_word_len - 1)
        w = evaluate_word(random_word(rng, names, length), amb)
        if base is not None and idx % 3 != 2:
            cand = base.conjugate_by(w)
        else:
            cand = w
        if n == 2 and abs(cand.matrix.trace()) <= 2:
            continue
        if accept is not None and not accept(cand):
            continue
        got = _accept(cand, existing, cells, config)
        if got is not None:
            return SearchResult(cand, got[0], got[1], idx + 1)
    return SearchExhausted("no certified transversal candidate", config.max_candidates)


def lift_residue(target: ModMatrix, config: SearchConfig, cap: int = 2_000_000) -> GroupElement:
    """An integer lift of a residue in SL_n(Z/m), with a word (BFS over E_ij)."""
    n, m = target.n, target.modulus
    amb = ambient_generators(n)
    steps = []
    for name in _elementary_names(n):
        for e in (1, -1):
            steps.append(((name, e), reduce(amb[name] ** e, m)))
    start = ModMatrix.identity(n, m)
    parent: dict[tuple, tuple | None] = {start.entries: None}
    frontier = [start]
    while frontier:
        nxt = []
        for x in frontier:
            if x.entries == target.entries:
                letters = []
                key = x.entries
                while parent[key] is not None:
                    prev, letter = parent[key]
                    letters.append(letter)
                    key = prev
                return evaluate_word(reduce_word(reversed(letters)), amb, n)
            for letter, s in steps:
                y = x * s
                if y.entries not in parent:
                    parent[y.entries] = (x.entries, letter)
                    nxt.append(y)
                    if len(parent) > cap:
                        raise OverflowError("residue lift search exceeded cap")
        frontier = nxt
    raise ValueError("residue not reachable (determinant not 1?)")


def find_in_coset_transversal(existing: Sequence[HyperbolicProfile], c: CosetConstraint,
                              config: SearchConfig, cells: Sequence[Cell] = (),
                              lift: GroupElement | None = None, start: int = 0) -> SearchResult | SearchExhausted:
    """A hyperbolic h with h = x mod m, certified transversal to ``existing``.

    Candidates are x * w E_ij^(+-m) w^-1 with random short w, so the residue
    matches by construction; odd-indexed candidates are instead random words
    filtered by their residue.
    """
    n = config.n
    amb = ambient_generators(n)
    names = _elementary_names(n)
    x = lift if lift is not None else lift_residue(c.target, config)
    matches = 0
    for idx in range(start, config.max_candidates):
        rng = config.rng("coset", idx)
        if idx % 2 == 1:
            cand = evaluate_word(random_word(rng, names + ["x1", "x2"], 2 + idx % config.max_word_len), amb)
            if not coset_contains(cand, c):
                continue
        else:
            cand = x
            for _ in range(1 + idx % 3):
                w = evaluate_word(random_word(rng, names, 1 + rng.randrange(config.max_word_len)), amb)
                e = rng.choice(names)
                t = amb[e] ** (c.modulus * rng.choice((1, -1)))
                cand = cand * t.conjugate_by(w)
        matches += 1
        if not coset_contains(cand, c):
            raise AssertionError("coset construction broke the residue")
        got = _accept(cand, existing, cells, config)
        if got is not None:
            return SearchResult(cand, got[0], got[1], idx + 1)
    if matches == 0 and start == 0:
        return SearchExhausted("no residue match found", config.max_candidates, 0)
    return SearchExhausted("residue matches found but none certified", config.max_candidates, matches)


# --------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SystemState:
    """A certified free system: root g0 plus elements, with a Schottky certificate."""

    root: GroupElement
    elements: tuple[GroupElement, ...]
    certificate: SchottkyCertificate
    rooted: CheckReport
    history: tuple[dict, ...] = ()

    def generators(self) -> tuple[GroupElement, ...]:
        return (self.root,) + self.elements

    def profiles(self, config: SearchConfig) -> list[HyperbolicProfile]:
        return [hyperbolicity(g, cap=config.precision_cap) for g in self.generators()]

    def to_json(self) -> dict:
        return {"root": self.root.to_json(), "elements": [e.to_json() for e in self.elements],
                "certificate": self.certificate.to_json(), "rooted_check": self.rooted.status,
                "history": list(self.history)}


def make_state(gens: Sequence[GroupElement], cells: Sequence[Cell], config: SearchConfig,
               history: Sequence[dict] = ()) -> SystemState | CheckReport:
    cert = check_schottky(gens, cells, config.pingpong())
    if not isinstance(cert, SchottkyCertificate):
        return cert
    rooted = check_rooted(RootedFreeSystem(gens[0], tuple(gens[1:]), tuple(cells)), config.pingpong())
    return SystemState(gens[0], tuple(gens[1:]), cert, rooted, tuple(history))


class Predicate:
    """Membership predicate F for extensions: test(g) -> True/False/None."""

    def test(self, g: GroupElement) -> bool | None:
        raise NotImplementedError

    def describe(self) -> dict:
        return {}


@dataclass(frozen=True)
class CosetPredicate(Predicate):
    coset: CosetConstraint

    def test(self, g):
        return coset_contains(g, self.coset)

    def describe(self):
        return {"kind": "coset", "coset": self.coset.to_json()}


@dataclass(frozen=True)
class Everything(Predicate):
    def test(self, g):
        return True

    def describe(self):
        return {"kind": "everything"}


@dataclass(frozen=True)
class OutsideGroup(Predicate):
    group: SchottkyCertificate

    def test(self, g):
        res = membership(self.group, g)
        if isinstance(res, NotMember):
            return True
        if isinstance(res, Member):
            return False
        return None

    def describe(self):
        return {"kind": "outside", "rank": str(self.group.rank)}


def _new_cell(prof: HyperbolicProfile, old_profiles: Sequence[HyperbolicProfile],
              cells: Sequence[Cell], shrink: int) -> Cell | None:
    """Balls around A+-(h) clear of every old ball, point and hyperplane."""
    radii = []
    for a in (prof.a_plus, prof.a_minus):
        r = Fraction(1, 2)
        other = prof.a_minus if a is prof.a_plus else prof.a_plus
        r = min(r, dist(a, other).lo / 3)
        for q in old_profiles:
            for b in (q.a_plus, q.a_minus):
                r = min(r, dist(a, b).lo / 3)
            for h in (q.b_plus, q.b_minus):
                r = min(r, dist_point_hyperplane(a, h).lo / 2)
        for c in cells:
            for b in c.balls():
                r = min(r, (dist(a, _center(b)).lo - b.radius) / 2)
        r = round_down(r / (1 << shrink), 24)
        if r <= 4 * a.radius:
            return None
        radii.append(r)
    return Cell(Ball(prof.a_plus.center, radii[0]), Ball(prof.a_minus.center, radii[1]))


def _make_room(cells: Sequence[Cell], p0: HyperbolicProfile) -> list[Cell] | None:
    """Shrink old balls away from A+-(h) and B+-(h); None if a ball would vanish."""
    out = []
    for c in cells:
        pair = []
        for b in c.balls():
            ctr = _center(b)
            r = b.radius
            for a in (p0.a_plus, p0.a_minus):
                r = min(r, dist(a, ctr).lo / 2)
            for hp in (p0.b_plus, p0.b_minus):
                r = min(r, dist_point_hyperplane(ctr, hp).lo / 2)
            if r <= 0:
                return None
            pair.append(b if r == b.radius else Ball(b.center, round_down(r, 24)))
        out.append(Cell(*pair))
    return out


def _placements(p0: HyperbolicProfile, old: Sequence[HyperbolicProfile],
                cells: Sequence[Cell]) -> Iterator[tuple[list[Cell], Cell]]:
    """Old cells shrunk by 2^-a and a new cell shrunk by 2^-b, smallest change first."""
    for a in range(4):
        base = [c.scaled(Fraction(1, 1 << a)) for c in cells]
        for b in range(3):
            cell = _new_cell(p0, old, base, b)
            if cell is None:
                break
            yield base, cell


def _blame(report: CheckReport) -> int | None:
    w = report.witness or {}
    lab = w.get("i")
    if lab is None:
        return None
    digits = "".join(ch for ch in str(lab) if ch.isdigit())
    return int(digits) if digits else None


def _exponents(pred: Predicate, base: GroupElement, start: int, cap: int) -> Iterator[int]:
    """Exponents n >= start with base^n in F, ascending."""
    if isinstance(pred, CosetPredicate):
        res = reduce(base, pred.coset.modulus)
        cur = res ** start
        for k in range(start, cap + 1):
            if cur == pred.coset.target:
                yield k
            cur = cur * res
        return
    for k in range(start, cap + 1):
        if pred.test(base ** k) is True:
            yield k


def extend_system(state: SystemState, h: GroupElement, pred: Predicate, config: SearchConfig,
                  allowed: Callable[[int], bool] | None = None,
                  label: str = "extend") -> SystemState | ExtensionFail:
    """Add g_new = g0^n0 h^n1 g0^-n0 in F and re-certify with root g0^k.

    Exponents are scanned in ascending order: n0 over {n : g0^n h g0^-n in F}
    (starting at 0), n1 over {n : h_n0^n in F} (starting at 1), and k over the
    admissible root powers.  Each attempt is a full check_schottky run; the
    blamed generator of a failure decides which exponent moves next.
    """
    old = state.profiles(config)
    prof_h = hyperbolicity(h, cap=config.precision_cap)
    if not isinstance(prof_h, HyperbolicProfile):
        return ExtensionFail("precondition", "h is not certified hyperbolic")
    ws, _ = _witnesses(prof_h, old)
    if ws is None:
        return ExtensionFail("precondition", "h is not certified transversal to the system")
    allowed = allowed or (lambda k: True)
    root = state.root
    cells_old = list(state.certificate.cells)
    tried = 0
    n0_seen = 0
    for n0 in _conjugation_exponents(pred, root, h, config.exponent_cap):
        n0_seen += 1
        if n0_seen > 4:
            break
        conj = root ** n0
        h0 = h.conjugate_by(conj) if n0 else h
        p0 = hyperbolicity(h0, cap=config.precision_cap)
        if not isinstance(p0, HyperbolicProfile):
            continue
        cells_base = list(cells_old)
        if n0:
            # the root's attracting ball must make room for the conjugated data
            cells_base[0] = _shrink_root_plus(cells_base[0], p0)
            if cells_base[0] is None:
                continue
        cells_base = _make_room(cells_base, p0)
        if cells_base is None:
            continue
        n1_seen = 0
        for n1 in _exponents(pred, h0, 1, config.exponent_cap):
            n1_seen += 1
            if n1_seen > 6:
                break
            g_new = h0 ** n1
            for base, cell in _placements(p0, old, cells_base):
                ks = [k for k in range(1, config.power_cap + 1) if allowed(k)]
                outcome = None
                for k in ks[:12]:
                    tried += 1
                    gens = [root ** k] + list(state.elements) + [g_new]
                    res = make_state(gens, base + [cell], config)
                    if isinstance(res, SystemState):
                        ok = pred.test(g_new)
                        if ok is not True:
                            return ExtensionFail("verification", "final element fails the predicate")
                        entry = {"op": label, "n0": str(n0), "n1": str(n1), "k": str(k),
                                 "attempts": str(tried), "predicate": pred.describe()}
                        return replace(res, history=state.history + (entry,))
                    blamed = _blame(res)
                    if blamed == 0:
                        continue  # raise the root power
                    outcome = blamed
                    break
                if outcome is None or outcome == len(state.elements) + 1:
                    break  # new element too weak: move n1
                # an old element or disjointness failed: next placement
    return ExtensionFail("exponents", f"no (n0, n1, k) certified after {tried} attempts")


def _conjugation_exponents(pred: Predicate, root: GroupElement, h: GroupElement, cap: int) -> Iterator[int]:
    if isinstance(pred, CosetPredicate):
        m = pred.coset.modulus
        r, hr = reduce(root, m), reduce(h, m)
        cur = ModMatrix.identity(root.n, m)
        for k in range(0, cap + 1):
            if cur * hr * cur.inverse() == pred.coset.target:
                yield k
            cur = cur * r
        return
    for k in range(0, cap + 1):
        g = h.conjugate_by(root ** k) if k else h
        if pred.test(g) is True:
            yield k


def _shrink_root_plus(cell: Cell, p0: HyperbolicProfile) -> Cell | None:
    b = cell.plus
    c = _center(b)
    r = b.radius
    for a in (p0.a_plus, p0.a_minus):
        r = min(r, dist(a, c).lo / 3)
    for hp in (p0.b_plus, p0.b_minus):
        r = min(r, ball_hyperplane_margin(Ball(b.center, Fraction(0)), hp) / 2)
    if r <= 0:
        return None
    return Cell(Ball(b.center, round_down(r, 24)), cell.minus)


def extend_into_coset(state: SystemState, c: CosetConstraint, config: SearchConfig,
                      allowed: Callable[[int], bool] | None = None,
                      lift: GroupElement | None = None) -> SystemState | ExtensionFail:
    """Candidates in index order, first those already clear of the existing
    cells, then any; the first that extends with certification wins."""
    old = state.profiles(config)
    x = lift if lift is not None else lift_residue(c.target, config)
    last: ExtensionFail | None = None
    for cells in (state.certificate.cells, ()):
        start, tries = 0, 0
        while tries < 6:
            found = find_in_coset_transversal(old, c, config, cells=cells, lift=x, start=start)
            if isinstance(found, SearchExhausted):
                last = last or ExtensionFail("coset-search", found.reason)
                break
            tries += 1
            start = found.candidates
            res = extend_system(state, found.element, CosetPredicate(c), config, allowed, label="coset")
            if isinstance(res, SystemState):
                return res
            last = res
    return last


def extend_avoiding(state: SystemState, H: SchottkyCertificate, config: SearchConfig,
                    allowed: Callable[[int], bool] | None = None) -> SystemState | ExtensionFail:
    """Extend by an element certified outside the Schottky group H.

    If the root lies in H, candidates outside H are conjugated by words in
    H's generators until transversal (conjugating by H preserves non-
    membership); otherwise generic transversal candidates are used.  The
    final element is re-checked with the membership oracle.
    """
    pred = OutsideGroup(H)
    old = state.profiles(config)
    root_status = membership(H, state.root)
    if isinstance(root_status, MembershipUndecided):
        return ExtensionFail("membership", "root membership undecided")
    cells = state.certificate.cells
    h = None
    if isinstance(root_status, Member) and H.rank:
        hnames = list(H.names)
        hgens = {nm: g for nm, g in zip(H.names, H.generators)}
        amb = ambient_generators(config.n)
        # first candidates clear of the existing cells, then any (extend_system makes room)
        for fit in (cells, ()):
            for idx in range(config.max_candidates):
                rng = config.rng("avoid", idx)
                ht = evaluate_word(random_word(rng, _elementary_names(config.n), 2 + idx % config.max_word_len), amb)
                if pred.test(ht) is not True:
                    continue
                # conjugation length 0 keeps ht itself when it is already transversal
                wl = idx % 4
                w = evaluate_word(random_word(rng, hnames, wl), hgens) if wl else None
                cand = ht.conjugate_by(GroupElement(w.matrix)) if w is not None else ht
                cand = GroupElement(cand.matrix, _conj_word(ht.word, w, H))
                if _accept(cand, old, fit, config) is not None:
                    h = cand
                    break
            if h is not None:
                break
    else:
        found = find_transversal(old, config, cells=cells, purpose="avoid",
                                 accept=lambda g: pred.test(g) is True)
        if isinstance(found, SearchResult):
            h = found.element
    if h is None:
        return ExtensionFail("avoid-search", "no candidate outside H certified")
    res = extend_system(state, h, pred, config, allowed, label="avoid")
    if isinstance(res, SystemState):
        last = res.elements[-1]
        if not isinstance(membership(H, last), NotMember):
            return ExtensionFail("verification", "new element not certified outside H")
    return res


def _conj_word(hword, w, H):
    """Word of w h w^-1 where w is a word in H's generator names.

    H's generators carry words over the ambient generators when available,
    so the conjugate is expressed there; otherwise no word is attached.
    """
    if w is None or hword is None:
        return hword
    sub = []
    named = {nm: g for nm, g in zip(H.names, H.generators)}
    for nm, e in w.word:
        gw = named[nm].word
        if gw is None:
            return None
        part = gw if e > 0 else tuple((a, -x) for a, x in reversed(gw))
        sub.extend(part * abs(e))
    sub = tuple(sub)
    return reduce_word(sub + tuple(hword) + tuple((a, -x) for a, x in reversed(sub)))


# --------------------------------------------------------------------------
# pipelines


@dataclass(frozen=True)
class PipelineReport:
    n: int
    m_max: int
    state: SystemState | None
    density: DensityReport | None
    level: int | None
    failing_levels: tuple[int, ...]
    witnesses: tuple[dict, ...]
    telemetry: dict
    flags: tuple[str, ...]
    status: str  # "ok" | "failed" | "undecided"
    reason: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def generators(self) -> tuple[GroupElement, ...]:
        return () if self.state is None else self.state.generators()

    def to_json(self, timing: bool = True) -> dict:
        tel = dict(self.telemetry)
        if not timing:
            tel.pop("seconds", None)
        return {
            "kind": "pipeline", "n": str(self.n), "m_max": str(self.m_max), "status": self.status,
            "reason": self.reason,
            "generators": [g.to_json() for g in self.generators],
            "certificate": None if self.state is None else self.state.certificate.to_json(),
            "rooted_check": None if self.state is None else self.state.rooted.status,
            "history": [] if self.state is None else list(self.state.history),
            "density": None if self.density is None else self.density.to_json(),
            "level": None if self.level is None else str(self.level),
            "failing_levels": [str(m) for m in self.failing_levels],
            "witnesses": list(self.witnesses), "telemetry": tel, "flags": list(self.flags),
            "config": self.config,
        }


def _level(report: DensityReport) -> tuple[int, list[int]]:
    """lcm of the largest failing prime power per prime, times any composite
    m that fails (or is undecided) while all of its prime-power parts pass."""
    bad = {r.m for r in report.rows if r.surjective != "yes"}
    level = 1
    for m in sorted(bad):
        f = factorize(m)
        if len(f) == 1:
            level = lcm(level, m)
    for m in sorted(bad):
        f = factorize(m)
        if len(f) > 1 and all(p ** e not in bad for p, e in f.items()):
            level = lcm(level, m)
    return level, sorted(bad)


def initial_pair(config: SearchConfig, allowed: Callable[[int], bool] | None = None,
                 purpose: str = "transversal") -> tuple[SystemState, list[dict]] | ExtensionFail:
    """A Schottky pair (h1^k, h2^k): transversal search, balls, power search."""
    first = find_transversal([], config, purpose=purpose)
    if isinstance(first, SearchExhausted):
        return ExtensionFail("transversal", first.reason)
    second = find_transversal([first.profile], config, purpose=purpose + "-2")
    if isinstance(second, SearchExhausted):
        return ExtensionFail("transversal", second.reason)
    cells = synthesize_balls([first.profile, second.profile])
    if isinstance(cells, SynthesisFail):
        return ExtensionFail("balls", cells.reason)
    got = min_power([first.element, second.element], cells, config.power_cap, config.pingpong(), allowed)
    if isinstance(got, PowerFail):
        return ExtensionFail("power", got.reason)
    k, cert = got
    gens = list(cert.generators)
    state = make_state(gens, cells, config, ({"op": "pair", "k": str(k),
                                              "candidates": [str(first.candidates), str(second.candidates)]},))
    if not isinstance(state, SystemState):
        return ExtensionFail("power", "re-certification failed")
    wit = [{"pair": ["h1", "h2"], "epsilon": str(w.epsilon)} for w in second.witnesses]
    return state, wit


def theorem1_pipeline(n: int, m_max: int, config: SearchConfig | None = None,
                      level_strategy: str = "lcm") -> PipelineReport:
    """Free subgroup with at most four generators, surjective mod every m <= m_max."""
    if level_strategy != "lcm":
        raise ValueError(f"unknown level strategy {level_strategy!r}")
    config = replace(config or SearchConfig(), n=n)
    t0 = time.perf_counter()
    flags = ("csp-not-applicable-n2",) if n == 2 else ()
    allowed = admissible(n, m_max)
    got = initial_pair(config, allowed)
    tel = {"tool_version": __version__}
    if isinstance(got, ExtensionFail):
        return PipelineReport(n, m_max, None, None, None, (), (), tel, flags, "undecided",
                              f"{got.stage}: {got.reason}", config.to_json())
    state, wit = got
    witnesses = list(wit)
    if m_max < 2:
        tel["seconds"] = f"{time.perf_counter() - t0:.3f}"
        return PipelineReport(n, m_max, state, DensityReport(n, m_max, ()), 1, (), tuple(witnesses),
                              tel, flags, "ok", None, config.to_json())
    pair_density = density_battery(state.generators(), m_max, seed=config.seed)
    level, failing = _level(pair_density)
    if level > 1:
        for idx, x in enumerate(standard_generators(n), start=1):
            c = CosetConstraint.of(x, level)
            lift = ambient_generators(n)[f"x{idx}"]
            nxt = extend_into_coset(state, c, config, allowed, lift=lift)
            if isinstance(nxt, ExtensionFail):
                tel["seconds"] = f"{time.perf_counter() - t0:.3f}"
                return PipelineReport(n, m_max, state, pair_density, level, tuple(failing),
                                      tuple(witnesses), tel, flags, "undecided",
                                      f"coset extension x{idx}: {nxt.stage}: {nxt.reason}", config.to_json())
            state = nxt
            witnesses.append({"coset": c.to_json(), "element": str(len(state.elements)),
                              "contains": coset_contains(state.elements[-1], c)})
    density = density_battery(state.generators(), m_max, seed=config.seed)
    tel["seconds"] = f"{time.perf_counter() - t0:.3f}"
    tel["generators"] = str(len(state.generators()))
    status = "ok" if density.all_surjective else ("failed" if density.failing else "undecided")
    return PipelineReport(n, m_max, state, density, level, tuple(failing), tuple(witnesses), tel,
                          flags, status, None if status == "ok" else "density battery incomplete",
                          config.to_json())


def coset_enumeration(n: int) -> Iterator[CosetConstraint]:
    """Cosets of Gamma(m), m = 2, 3, ..., each level in lexicographic residue order."""
    from .congruence import closure

    m = 2
    while True:
        gens = [ModMatrix.from_rows(m, g.rows) for g in standard_generators(n)]
        img = closure(gens, 200_000)
        if img.elements is None:
            return
        for e in sorted(img.elements):
            yield CosetConstraint(m, ModMatrix(m, e, n))
        m += 1


@dataclass(frozen=True)
class EnumerationResult:
    systems: tuple[SystemState, ...]
    witnesses: tuple[dict, ...]
    status: str
    failure_index: int | None = None
    reason: str | None = None
    telemetry: dict = field(default_factory=dict)

    def to_json(self, timing: bool = True) -> dict:
        tel = dict(self.telemetry)
        if not timing:
            tel.pop("seconds", None)
        return {"kind": "enumerate", "status": self.status,
                "failure_index": None if self.failure_index is None else str(self.failure_index),
                "reason": self.reason, "systems": [s.to_json() for s in self.systems],
                "witnesses": list(self.witnesses), "telemetry": tel}


def theorem2_enumerate(n: int, K: int, config: SearchConfig | None = None) -> EnumerationResult:
    """K certified free systems with pairwise non-membership witnesses.

    System i starts from its own Schottky pair, is extended into the i-th
    coset of the enumeration, and then extended by an element outside each
    earlier system.  Witnesses for the reverse direction come from testing
    the generators of the earlier system against the later one.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    config = replace(config or SearchConfig(), n=n)
    t0 = time.perf_counter()
    cosets = coset_enumeration(n)
    systems: list[SystemState] = []
    witnesses: list[dict] = []
    for i in range(K):
        cfg = replace(config, seed=config.seed + 1000 * i)
        got = initial_pair(cfg)
        if isinstance(got, ExtensionFail):
            return EnumerationResult(tuple(systems), tuple(witnesses), "undecided", i,
                                     f"{got.stage}: {got.reason}")
        state = got[0]
        c = next(cosets)
        nxt = extend_into_coset(state, c, cfg)
        if isinstance(nxt, ExtensionFail):
            return EnumerationResult(tuple(systems), tuple(witnesses), "undecided", i,
                                     f"coset: {nxt.stage}: {nxt.reason}")
        state = nxt
        for j, other in enumerate(systems):
            nxt = extend_avoiding(state, other.certificate, cfg)
            if isinstance(nxt, ExtensionFail):
                return EnumerationResult(tuple(systems), tuple(witnesses), "undecided", i,
                                         f"avoid {j}: {nxt.stage}: {nxt.reason}")
            state = nxt
            witnesses.append({"element_of": str(i), "outside": str(j),
                              "generator": str(len(state.elements))})
        systems.append(state)
    # reverse directions: an element of system j outside a later system i
    for i in range(K):
        for j in range(i):
            hit = None
            for gi, g in enumerate(systems[j].generators()):
                if isinstance(membership(systems[i].certificate, g), NotMember):
                    hit = gi
                    break
            if hit is None:
                return EnumerationResult(tuple(systems), tuple(witnesses), "undecided", i,
                                         f"no generator of system {j} certified outside system {i}")
            witnesses.append({"element_of": str(j), "outside": str(i), "generator": str(hit)})
    tel = {"seconds": f"{time.perf_counter() - t0:.3f}", "tool_version": __version__}
    return EnumerationResult(tuple(systems), tuple(witnesses), "ok", None, None, tel)


def distinctness_witness(a: SystemState, b: SystemState) -> int | None:
    """Index of a generator of a certified outside b, if any."""
    for idx, g in enumerate(a.generators()):
        if isinstance(membership(b.certificate, g), NotMember):
            return idx
    return None
