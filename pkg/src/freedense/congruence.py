"""Finite congruence quotients SL_n(Z/m).

Elements are handled internally as flat row-major tuples of residues, which
keeps the breadth-first closures cheap and gives a canonical encoding.  Large
quotients use a randomized stabilizer chain: every orbit and stabilizer
element it finds is genuine, so the product of orbit sizes is a proven lower
bound on the image order and reaching |SL_n(Z/m)| proves surjectivity.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

from .exactalg import GroupElement, SqMatrix

DEFAULT_CAP = 20_000_000
BFS_LIMIT = 50_000

Flat = tuple[int, ...]


# --------------------------------------------------------------------------
# flat matrix helpers


def _fmul(a: Flat, b: Flat, n: int, m: int) -> Flat:
    return tuple(
        sum(a[i * n + k] * b[k * n + j] for k in range(n)) % m
        for i in range(n) for j in range(n))


def _fidentity(n: int) -> Flat:
    return tuple(1 if i == j else 0 for i in range(n) for j in range(n))


def _fdet(a: Flat, n: int, m: int) -> int:
    rows = [[a[i * n + j] for j in range(n)] for i in range(n)]
    return _det_int(rows) % m


def _det_int(rows: list[list[int]]) -> int:
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0
    for j in range(n):
        if rows[0][j]:
            minor = [r[:j] + r[j + 1:] for r in rows[1:]]
            total += (-1) ** j * rows[0][j] * _det_int(minor)
    return total


def _fadjugate(a: Flat, n: int, m: int) -> Flat:
    rows = [[a[i * n + j] for j in range(n)] for i in range(n)]
    if n == 1:
        return (1,)
    out = [0] * (n * n)
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(rows) if k != i]
            out[j * n + i] = ((-1) ** (i + j) * _det_int(minor)) % m
    return tuple(out)


def _finv(a: Flat, n: int, m: int) -> Flat:
    d = _fdet(a, n, m)
    dinv = pow(d, -1, m)
    return tuple((x * dinv) % m for x in _fadjugate(a, n, m))


def _fvec(a: Flat, v: Flat, n: int, m: int) -> Flat:
    return tuple(sum(a[i * n + k] * v[k] for k in range(n)) % m for i in range(n))


# --------------------------------------------------------------------------
# ModMatrix


@dataclass(frozen=True)
class ModMatrix:
    """n x n matrix over Z/m with canonical entries in [0, m)."""

    modulus: int
    entries: Flat
    n: int
    special: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError("modulus must be at least 2")
        if len(self.entries) != self.n * self.n:
            raise ValueError("entry count does not match dimension")
        ents = tuple(int(x) % self.modulus for x in self.entries)
        object.__setattr__(self, "entries", ents)
        object.__setattr__(self, "special", _fdet(ents, self.n, self.modulus) == 1 % self.modulus)

    @classmethod
    def from_rows(cls, modulus: int, rows: Sequence[Sequence[int]]) -> ModMatrix:
        n = len(rows)
        return cls(modulus, tuple(int(x) for r in rows for x in r), n)

    @classmethod
    def identity(cls, n: int, modulus: int) -> ModMatrix:
        return cls(modulus, _fidentity(n), n)

    @property
    def rows(self) -> tuple[tuple[int, ...], ...]:
        n = self.n
        return tuple(self.entries[i * n:(i + 1) * n] for i in range(n))

    def __mul__(self, other: ModMatrix) -> ModMatrix:
        if other.modulus != self.modulus or other.n != self.n:
            raise ValueError("modulus or dimension mismatch")
        return ModMatrix(self.modulus, _fmul(self.entries, other.entries, self.n, self.modulus), self.n)

    def inverse(self) -> ModMatrix:
        return ModMatrix(self.modulus, _finv(self.entries, self.n, self.modulus), self.n)

    def __pow__(self, k: int) -> ModMatrix:
        base = self if k >= 0 else self.inverse()
        result = ModMatrix.identity(self.n, self.modulus)
        k = abs(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def is_identity(self) -> bool:
        return self.entries == _fidentity(self.n)

    def det(self) -> int:
        return _fdet(self.entries, self.n, self.modulus)

    def order(self, cap: int = 10 ** 7) -> int:
        """Multiplicative order (the element must be invertible)."""
        cur, k = self, 1
        while not cur.is_identity():
            cur = cur * self
            k += 1
            if k > cap:
                raise ArithmeticError("order exceeds cap")
        return k

    def key(self) -> bytes:
        """Canonical byte encoding: row-major entries in minimal width."""
        width = max(1, (self.modulus - 1).bit_length() + 7 >> 3)
        return b"".join(x.to_bytes(width, "big") for x in self.entries)

    def to_json(self) -> dict:
        return {"modulus": str(self.modulus), "rows": [[str(x) for x in r] for r in self.rows]}

    @classmethod
    def from_json(cls, d) -> ModMatrix:
        return cls.from_rows(int(d["modulus"]), [[int(x) for x in r] for r in d["rows"]])


def reduce(g: GroupElement | SqMatrix, modulus: int) -> ModMatrix:
    m = g.matrix if isinstance(g, GroupElement) else g
    if not m.is_integer():
        raise ValueError("reduction requires integer entries")
    return ModMatrix.from_rows(modulus, m.rows)


# --------------------------------------------------------------------------
# orders


def factorize(m: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= m:
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
        p += 1
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def group_order(n: int, m: int) -> int:
    """|SL_n(Z/m)|."""
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    total = 1
    for p, e in factorize(m).items():
        base = p ** (n * (n - 1) // 2) * prod(p ** k - 1 for k in range(2, n + 1))
        total *= base * p ** ((e - 1) * (n * n - 1))
    return total


def exponent_primes(n: int, m_max: int) -> set[int]:
    """Primes dividing |SL_n(Z/m)| for some 2 <= m <= m_max."""
    primes: set[int] = set()
    for m in range(2, m_max + 1):
        primes.update(factorize(group_order(n, m)))
    return primes


# --------------------------------------------------------------------------
# closure


@dataclass(frozen=True)
class FiniteImage:
    modulus: int
    n: int
    generators: tuple[ModMatrix, ...]
    elements: frozenset | None
    order: int
    capped: bool = False

    def contains(self, x: ModMatrix) -> bool:
        if self.elements is None:
            raise ValueError("closure was capped; membership unknown")
        return x.entries in self.elements


def closure(gen_images: Sequence[ModMatrix], cap: int = DEFAULT_CAP, *,
            n: int | None = None, modulus: int | None = None) -> FiniteImage:
    """Breadth-first closure under generators and inverses.

    Frontier layers are processed in lexicographic order, so the traversal
    (and any cap cut-off) is deterministic.
    """
    gens = tuple(gen_images)
    if gens:
        modulus = gens[0].modulus
        n = gens[0].n
        if any(g.modulus != modulus or g.n != n for g in gens):
            raise ValueError("generators must share modulus and dimension")
    elif n is None or modulus is None:
        raise ValueError("empty generator list needs explicit n and modulus")
    steps = sorted({g.entries for g in gens} | {g.inverse().entries for g in gens})
    ident = _fidentity(n)
    seen = {ident}
    frontier = [ident]
    capped = False
    while frontier and not capped:
        nxt = []
        for x in frontier:
            for s in steps:
                y = _fmul(x, s, n, modulus)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
                    if len(seen) > cap:
                        capped = True
                        break
            if capped:
                break
        frontier = sorted(nxt)
    if capped:
        return FiniteImage(modulus, n, gens, None, len(seen), True)
    return FiniteImage(modulus, n, gens, frozenset(seen), len(seen))


# --------------------------------------------------------------------------
# stabilizer chain lower bound


class _ChainLevel:
    def __init__(self, base: Flat, n: int, m: int):
        self.base = base
        self.n, self.m = n, m
        self.gens: list[Flat] = []
        self.transversal: dict[Flat, Flat] = {base: _fidentity(n)}

    def add(self, g: Flat) -> None:
        self.gens.append(g)
        n, m = self.n, self.m
        queue = deque(self.transversal)
        while queue:
            x = queue.popleft()
            ux = self.transversal[x]
            for s in self.gens:
                y = _fvec(s, x, n, m)
                if y not in self.transversal:
                    self.transversal[y] = _fmul(s, ux, n, m)
                    queue.append(y)


def _sift(levels: list[_ChainLevel], g: Flat, n: int, m: int) -> tuple[int, Flat]:
    for i, lev in enumerate(levels):
        y = _fvec(g, lev.base, n, m)
        u = lev.transversal.get(y)
        if u is None:
            return i, g
        g = _fmul(_finv(u, n, m), g, n, m)
    return len(levels), g


def chain_order_bound(gen_images: Sequence[ModMatrix], target: int | None = None,
                      seed: int = 0, stall: int = 200, max_rounds: int = 20000) -> int:
    """Proven lower bound on |<gens>| from a randomized stabilizer chain.

    The base is e_1, ..., e_n for the action on column vectors (faithful, with
    trivial pointwise stabilizer).  Every level's orbit is computed from true
    group elements, so the product of orbit sizes never exceeds the order.
    Stops early when ``target`` is reached or after ``stall`` consecutive
    random elements sift to the identity.
    """
    gens = list(gen_images)
    if not gens:
        return 1
    n, m = gens[0].n, gens[0].modulus
    bases = [tuple(1 if i == j else 0 for i in range(n)) for j in range(n)]
    levels = [_ChainLevel(b, n, m) for b in bases]
    ident = _fidentity(n)
    rng = random.Random(seed)


    def absorb(g: Flat) -> bool:
        # a residue stuck at level i fixes the earlier base points, so it is
        # a legitimate generator for level i's stabilizer
        i, h = _sift(levels, g, n, m)
        if i == len(levels):
            return False
        levels[i].add(h)
        return True

    def bound() -> int:
        return prod(len(lev.transversal) for lev in levels)

    for g in gens:
        absorb(g.entries)
    pool = [g.entries for g in gens] + [g.inverse().entries for g in gens]
    while len(pool) < 10:
        pool.append(pool[len(pool) % (2 * len(gens))])
    acc = ident
    quiet = 0
    for _ in range(max_rounds):
        if target is not None and bound() >= target:
            break
        # product replacement
        i, j = rng.sample(range(len(pool)), 2)
        pool[i] = _fmul(pool[i], pool[j], n, m) if rng.random() < 0.5 else _fmul(pool[j], pool[i], n, m)
        acc = _fmul(acc, pool[i], n, m)
        if absorb(acc) or absorb(pool[i]):
            quiet = 0
        else:
            quiet += 1
            if quiet >= stall:
                break
    return bound()


# --------------------------------------------------------------------------
# density battery


@dataclass(frozen=True)
class DensityRow:
    m: int
    surjective: str  # "yes" | "no" | "cap-exceeded"
    order: int | None
    target_order: int
    method: str

    def to_json(self) -> dict:
        return {"m": str(self.m), "surjective": self.surjective,
                "order": None if self.order is None else str(self.order),
                "target_order": str(self.target_order), "method": self.method}

    @classmethod
    def from_json(cls, d) -> DensityRow:
        return cls(int(d["m"]), d["surjective"], None if d["order"] is None else int(d["order"]),
                   int(d["target_order"]), d["method"])


@dataclass(frozen=True)
class DensityReport:
    n: int
    m_max: int
    rows: tuple[DensityRow, ...]

    @property
    def all_surjective(self) -> bool:
        return all(r.surjective == "yes" for r in self.rows)

    @property
    def failing(self) -> list[int]:
        return [r.m for r in self.rows if r.surjective == "no"]

    @property
    def undecided(self) -> list[int]:
        return [r.m for r in self.rows if r.surjective == "cap-exceeded"]

    def row(self, m: int) -> DensityRow:
        return next(r for r in self.rows if r.m == m)

    def to_json(self) -> dict:
        return {"n": str(self.n), "m_max": str(self.m_max), "rows": [r.to_json() for r in self.rows]}

    @classmethod
    def from_json(cls, d) -> DensityReport:
        return cls(int(d["n"]), int(d["m_max"]), tuple(DensityRow.from_json(r) for r in d["rows"]))


def density_battery(gens: Sequence[GroupElement], m_max: int, cap: int = DEFAULT_CAP, *,
                    n: int | None = None, bfs_limit: int = BFS_LIMIT, seed: int = 0) -> DensityReport:
    """Surjectivity of <gens> onto SL_n(Z/m) for every 2 <= m <= m_max.

    Small targets are settled by exact closure.  If a proper divisor d of m
    already fails, m fails too (SL_n(Z/m) -> SL_n(Z/d) is onto).  Otherwise
    the stabilizer-chain lower bound proves surjectivity; if it falls short
    the row is reported as cap-exceeded, never as a failure.
    """
    gens = list(gens)
    if gens:
        n = gens[0].n
    elif n is None:
        raise ValueError("empty generator list needs explicit n")
    for g in gens:
        if not g.matrix.is_integer() or g.matrix.det() != 1:
            raise ValueError("generators must be integer matrices of determinant 1")
    rows: list[DensityRow] = []
    failed: set[int] = set()
    for m in range(2, m_max + 1):
        target = group_order(n, m)
        images = [reduce(g, m) for g in gens]
        bad = [d for d in failed if m % d == 0]
        if bad:
            rows.append(DensityRow(m, "no", None, target, f"quotient of failing m={min(bad)}"))
            failed.add(m)
            continue
        if target <= min(bfs_limit, cap):
            img = closure(images, cap, n=n, modulus=m)
            if img.capped:
                rows.append(DensityRow(m, "cap-exceeded", img.order, target, "bfs"))
                continue
            ok = img.order == target
            rows.append(DensityRow(m, "yes" if ok else "no", img.order, target, "bfs"))
            if not ok:
                failed.add(m)
            continue
        if not images:
            rows.append(DensityRow(m, "no", 1, target, "trivial"))
            failed.add(m)
            continue
        lower = chain_order_bound(images, target, seed=seed + m)
        if lower >= target:
            rows.append(DensityRow(m, "yes", target, target, "stabilizer-chain"))
        else:
            rows.append(DensityRow(m, "cap-exceeded", lower, target, "stabilizer-chain"))
    return DensityReport(n, m_max, tuple(rows))


# --------------------------------------------------------------------------
# cosets and the level-p^2 kernel


@dataclass(frozen=True)
class CosetConstraint:
    """The residue class x mod m (x special)."""

    modulus: int
    target: ModMatrix

    def __post_init__(self):
        if self.target.modulus != self.modulus:
            raise ValueError("target modulus mismatch")
        if not self.target.special:
            raise ValueError("coset target must have determinant 1 mod m")

    @classmethod
    def of(cls, x: GroupElement | SqMatrix, modulus: int) -> CosetConstraint:
        return cls(modulus, reduce(x, modulus))

    def to_json(self) -> dict:
        return self.target.to_json()

    @classmethod
    def from_json(cls, d) -> CosetConstraint:
        t = ModMatrix.from_json(d)
        return cls(t.modulus, t)


def coset_contains(g: GroupElement, c: CosetConstraint) -> bool:
    return reduce(g, c.modulus) == c.target


def standard_generators(n: int) -> list[SqMatrix]:
    """A two-element generating set of SL_n(Z)."""
    if n == 2:
        return [SqMatrix(((1, 1), (0, 1))), SqMatrix(((0, -1), (1, 0)))]
    t = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    t[0][1] = 1
    # n-cycle permutation matrix, with a sign fix so det = 1 for even n
    c = [[0] * n for _ in range(n)]
    for j in range(n):
        c[(j + 1) % n][j] = 1
    if n % 2 == 0:
        c[0][n - 1] = -1
    return [SqMatrix(tuple(map(tuple, t))), SqMatrix(tuple(map(tuple, c)))]


@dataclass(frozen=True)
class KernelStructure:
    n: int
    p: int
    order: int
    elementary_abelian: bool
    rank: int | None

    def to_json(self) -> dict:
        return {"n": str(self.n), "p": str(self.p), "order": str(self.order),
                "elementary_abelian": self.elementary_abelian,
                "rank": None if self.rank is None else str(self.rank)}


def kernel_structure(n: int, p: int, cap: int = DEFAULT_CAP) -> KernelStructure:
    """Kernel of SL_n(Z/p^2) -> SL_n(Z/p), found inside the full BFS closure."""
    if len(factorize(p)) != 1 or factorize(p).get(p) != 1:
        raise ValueError("p must be prime")
    m = p * p
    gens = [ModMatrix.from_rows(m, g.rows) for g in standard_generators(n)]
    img = closure(gens, cap)
    if img.capped:
        raise OverflowError(f"closure of SL_{n}(Z/{m}) exceeded cap {cap}")
    if img.order != group_order(n, m):
        raise ArithmeticError("standard generators did not produce the full group")
    ident = _fidentity(n)
    kernel = [x for x in img.elements if all((a - b) % p == 0 for a, b in zip(x, ident))]
    order = len(kernel)
    commutative = all(_fmul(a, b, n, m) == _fmul(b, a, n, m)
                      for a in kernel for b in kernel) if order <= 4096 else _commutes_on_basis(kernel, n, m)
    exponent_p = all(_fpow(x, p, n, m) == ident for x in kernel)
    elem_ab = commutative and exponent_p
    rank = None
    if elem_ab:
        r, q = 0, order
        while q % p == 0:
            q //= p
            r += 1
        rank = r if q == 1 else None
    return KernelStructure(n, p, order, elem_ab, rank)


def _fpow(x: Flat, k: int, n: int, m: int) -> Flat:
    r = _fidentity(n)
    while k:
        if k & 1:
            r = _fmul(r, x, n, m)
        x = _fmul(x, x, n, m)
        k >>= 1
    return r


def _commutes_on_basis(kernel: list[Flat], n: int, m: int) -> bool:
    """Commutativity via a generating subset: pairwise commuting generators
    of a group make it abelian.  The greedy generating set is built from the
    elements themselves, so it really generates the kernel."""
    gens: list[Flat] = []
    span = {_fidentity(n)}
    for x in sorted(kernel):
        if x in span:
            continue
        gens.append(x)
        frontier = list(span)
        while frontier:
            nxt = []
            for y in frontier:
                for g in gens:
                    z = _fmul(y, g, n, m)
                    if z not in span:
                        span.add(z)
                        nxt.append(z)
            frontier = nxt
    return all(_fmul(a, b, n, m) == _fmul(b, a, n, m) for a in gens for b in gens)
