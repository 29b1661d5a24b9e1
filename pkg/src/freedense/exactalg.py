"""Exact integer/rational matrices, words and polynomials.

Everything here is exact: entries are Python ints or ``fractions.Fraction``
and no operation ever rounds.  Values are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Sequence

Rational = int | Fraction
Word = tuple[tuple[str, int], ...]


class DimensionError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class UnknownGeneratorError(KeyError):
    pass


def _norm(x) -> Rational:
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        return _norm(Fraction(x))
    raise TypeError(f"unsupported entry type {type(x).__name__}")


@dataclass(frozen=True)
class SqMatrix:
    """Square matrix with exact entries, stored row-major as nested tuples."""

    rows: tuple[tuple[Rational, ...], ...]
    det_cache: Rational | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        rows = tuple(tuple(_norm(x) for x in r) for r in self.rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise DimensionError("matrix must be square and non-empty")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls, n: int) -> SqMatrix:
        return cls(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)), 1)

    @classmethod
    def diag(cls, entries: Sequence[Rational]) -> SqMatrix:
        n = len(entries)
        return cls(tuple(tuple(entries[i] if i == j else 0 for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij: tuple[int, int]) -> Rational:
        return self.rows[ij[0]][ij[1]]

    def is_integer(self) -> bool:
        return all(isinstance(x, int) for r in self.rows for x in r)

    def is_identity(self) -> bool:
        return all(x == (i == j) for i, r in enumerate(self.rows) for j, x in enumerate(r))

    def transpose(self) -> SqMatrix:
        return SqMatrix(tuple(zip(*self.rows)), self.det_cache)

    def trace(self) -> Rational:
        return _norm(sum(self.rows[i][i] for i in range(self.n)))

    def det(self) -> Rational:
        if self.det_cache is not None:
            return self.det_cache
        d = determinant(self)
        object.__setattr__(self, "det_cache", d)
        return d

    def __matmul__(self, other):
        if isinstance(other, SqMatrix):
            return mat_mul(self, other)
        return mat_vec(self, other)

    def __pow__(self, k: int) -> SqMatrix:
        return mat_pow(self, k)

    def max_entry_bits(self) -> int:
        bits = 0
        for r in self.rows:
            for x in r:
                if isinstance(x, Fraction):
                    bits = max(bits, x.numerator.bit_length(), x.denominator.bit_length())
                else:
                    bits = max(bits, x.bit_length())
        return bits

    def to_json(self) -> list[list[str]]:
        return [[str(x) for x in r] for r in self.rows]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[str]]) -> SqMatrix:
        return cls(tuple(tuple(_norm(str(x)) for x in r) for r in data))

    def __repr__(self) -> str:
        return f"SqMatrix({[list(map(str, r)) for r in self.rows]})"


def mat_mul(a: SqMatrix, b: SqMatrix) -> SqMatrix:
    if a.n != b.n:
        raise DimensionError(f"dimension mismatch {a.n} vs {b.n}")
    cols = tuple(zip(*b.rows))
    rows = tuple(tuple(sum(x * y for x, y in zip(r, c)) for c in cols) for r in a.rows)
    det = None
    if a.det_cache is not None and b.det_cache is not None:
        det = a.det_cache * b.det_cache
    return SqMatrix(rows, det)


def mat_vec(a: SqMatrix, v: Sequence) -> tuple:
    if len(v) != a.n:
        raise DimensionError("vector length mismatch")
    return tuple(sum(x * y for x, y in zip(r, v)) for r in a.rows)


def vec_mat(v: Sequence, a: SqMatrix) -> tuple:
    if len(v) != a.n:
        raise DimensionError("vector length mismatch")
    return tuple(sum(v[i] * a.rows[i][j] for i in range(a.n)) for j in range(a.n))


def determinant(m: SqMatrix) -> Rational:
    """Fraction-free (Bareiss) determinant."""
    n = m.n
    a = [list(r) for r in m.rows]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                a[i][j] = num // prev if isinstance(num, int) and isinstance(prev, int) else num / prev
        prev = a[k][k]
    return _norm(sign * a[n - 1][n - 1])


def mat_inv(m: SqMatrix) -> SqMatrix:
    """Exact inverse by Gauss-Jordan elimination over the rationals."""
    n = m.n
    aug = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)]
           for i, r in enumerate(m.rows)]
    for col in range(n):
        piv = next((i for i in range(col, n) if aug[i][col] != 0), None)
        if piv is None:
            raise SingularMatrixError("matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[col])]
    det = None if m.det_cache is None else Fraction(1) / m.det_cache
    return SqMatrix(tuple(tuple(r[n:]) for r in aug), None if det is None else _norm(det))


def mat_pow(m: SqMatrix, k: int) -> SqMatrix:
    if k < 0:
        return mat_pow(mat_inv(m), -k)
    result = SqMatrix.identity(m.n)
    base = m
    while k:
        if k & 1:
            result = mat_mul(result, base)
        k >>= 1
        if k:
            base = mat_mul(base, base)
    return result


# --------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial, coefficients from the constant term upwards."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        c = list(self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c or (len(c) == 1 and c[0] == 0):
            raise ValueError("zero polynomial")
        object.__setattr__(self, "coeffs", tuple(int(x) for x in c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[-1]

    def is_monic(self) -> bool:
        return self.leading == 1

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> IntPolynomial | None:
        if self.degree == 0:
            return None
        return IntPolynomial(tuple(i * c for i, c in enumerate(self.coeffs) if i > 0))

    def reflect(self) -> IntPolynomial:
        """p(-x)."""
        return IntPolynomial(tuple(c if i % 2 == 0 else -c for i, c in enumerate(self.coeffs)))

    def __str__(self) -> str:
        terms = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            coef = str(c) if (abs(c) != 1 or i == 0) else ("-" if c < 0 else "")
            terms.append(f"{coef}{mono}")
        return " + ".join(terms).replace("+ -", "- ")


def _poly_rem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    while len(a) >= len(b) and any(a):
        f = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[shift + i] -= f * c
        a.pop()
        while a and a[-1] == 0:
            a.pop()
    return a


def poly_gcd_degree(p: IntPolynomial, q: IntPolynomial) -> int:
    a = [Fraction(c) for c in p.coeffs]
    b = [Fraction(c) for c in q.coeffs]
    while b and any(b):
        a, b = b, _poly_rem(a, b)
    return len(a) - 1


def squarefree(p: IntPolynomial) -> bool:
    """True iff gcd(p, p') is a constant."""
    dp = p.derivative()
    if dp is None:
        return True
    return poly_gcd_degree(p, dp) == 0


def char_poly_adjugate(m: SqMatrix) -> tuple[list[Rational], list[SqMatrix]]:
    """Faddeev-LeVerrier over the rationals.

    Returns the coefficients of det(xI - m) (constant term first, monic)
    together with matrices B_1..B_n such that adj(xI - m) = sum_k B_k x^(n-k).
    Integer input gives integer output throughout.
    """
    n = m.n
    coeffs: list[Rational] = [0] * (n + 1)
    coeffs[n] = 1
    mk = SqMatrix(tuple(tuple(0 for _ in range(n)) for _ in range(n)))
    adj = []
    for k in range(1, n + 1):
        am = mat_mul(m, mk)
        mk = SqMatrix(tuple(tuple(am.rows[i][j] + (coeffs[n - k + 1] if i == j else 0)
                                  for j in range(n)) for i in range(n)))
        adj.append(mk)
        tr = mat_mul(m, mk).trace()
        coeffs[n - k] = _norm(-Fraction(tr) / k)
    return coeffs, adj


def integer_poly(coeffs: Sequence[Rational]) -> IntPolynomial:
    """Clear denominators of a rational polynomial (same roots)."""
    den = 1
    for c in coeffs:
        if isinstance(c, Fraction):
            den = den * c.denominator // gcd(den, c.denominator)
    return IntPolynomial(tuple(int(c * den) for c in coeffs))


def char_poly(m: SqMatrix) -> IntPolynomial:
    if not m.is_integer():
        raise ValueError("char_poly requires an integer matrix")
    return IntPolynomial(tuple(char_poly_adjugate(m)[0]))


def companion(p: IntPolynomial) -> SqMatrix:
    """Companion matrix of a monic polynomial."""
    if not p.is_monic():
        raise ValueError("companion matrix needs a monic polynomial")
    n = p.degree
    rows = []
    for i in range(n):
        row = [0] * n
        if i > 0:
            row[i - 1] = 1
        row[n - 1] = -p.coeffs[i]
        rows.append(row)
    return SqMatrix(tuple(tuple(r) for r in rows))


# --------------------------------------------------------------------------
# group elements and words


@dataclass(frozen=True)
class GroupElement:
    """An element of SL_n(Z), optionally with a word over named generators."""

    matrix: SqMatrix
    word: Word | None = None

    def __post_init__(self):
        if not self.matrix.is_integer():
            raise ValueError("group elements have integer entries")
        if self.matrix.det() != 1:
            raise ValueError("group elements have determinant 1")
        if self.word is not None:
            object.__setattr__(self, "word", tuple((str(a), int(e)) for a, e in self.word))

    @property
    def n(self) -> int:
        return self.matrix.n

    def __mul__(self, other: GroupElement) -> GroupElement:
        word = None
        if self.word is not None and other.word is not None:
            word = reduce_word(self.word + other.word)
        return GroupElement(mat_mul(self.matrix, other.matrix), word)

    def inverse(self) -> GroupElement:
        word = None if self.word is None else invert_word(self.word)
        return GroupElement(mat_inv(self.matrix), word)

    def __pow__(self, k: int) -> GroupElement:
        word = None
        if self.word is not None:
            base = self.word if k >= 0 else invert_word(self.word)
            word = reduce_word(base * abs(k))
        return GroupElement(mat_pow(self.matrix, k), word)

    def conjugate_by(self, c: GroupElement) -> GroupElement:
        """c * self * c^-1."""
        return c * self * c.inverse()

    def is_identity(self) -> bool:
        return self.matrix.is_identity()

    def to_json(self) -> dict:
        out = {"matrix": self.matrix.to_json()}
        if self.word is not None:
            out["word"] = word_to_json(self.word)
        return out

    @classmethod
    def from_json(cls, data) -> GroupElement:
        if isinstance(data, list):
            return cls(SqMatrix.from_json(data))
        word = data.get("word")
        return cls(SqMatrix.from_json(data["matrix"]), None if word is None else word_from_json(word))


def identity_element(n: int) -> GroupElement:
    return GroupElement(SqMatrix.identity(n), ())


def reduce_word(word: Iterable[tuple[str, int]]) -> Word:
    """Merge adjacent equal letters and drop zero exponents."""
    out: list[tuple[str, int]] = []
    for name, e in word:
        if e == 0:
            continue
        if out and out[-1][0] == name:
            e2 = out[-1][1] + e
            out.pop()
            if e2:
                out.append((name, e2))
        else:
            out.append((name, e))
    return tuple(out)


def invert_word(word: Word) -> Word:
    return tuple((a, -e) for a, e in reversed(word))


def word_to_json(word: Word) -> list:
    return [[a, e] for a, e in word]


def word_from_json(data) -> Word:
    return tuple((str(a), int(e)) for a, e in data)


def evaluate_word(word: Iterable[tuple[str, int]],
                  generators: Mapping[str, GroupElement],
                  n: int | None = None) -> GroupElement:
    """Exact product of generator powers, left to right; the word is attached."""
    word = tuple(word)
    if n is None:
        if generators:
            n = next(iter(generators.values())).n
        elif word:
            raise UnknownGeneratorError(word[0][0])
        else:
            raise ValueError("dimension needed to evaluate the empty word")
    acc = SqMatrix.identity(n)
    inverses: dict[str, SqMatrix] = {}
    for name, e in word:
        try:
            g = generators[name].matrix
        except KeyError:
            raise UnknownGeneratorError(name) from None
        if e < 0:
            if name not in inverses:
                inverses[name] = mat_inv(g)
            g = inverses[name]
        acc = mat_mul(acc, mat_pow(g, abs(e)))
    return GroupElement(acc, tuple(word))


def reduce_mod(m: SqMatrix, modulus: int):
    """Entrywise reduction into [0, modulus); returns a congruence.ModMatrix."""
    from .congruence import ModMatrix

    if not m.is_integer():
        raise ValueError("reduce_mod requires integer entries")
    if modulus < 2:
        raise ValueError("modulus must be at least 2")
    return ModMatrix.from_rows(modulus, m.rows)
