"""Exact noncommutative polynomial arithmetic.

Elements are finite sums of normal-ordered monomials with rational
coefficients.  A monomial is a tuple of ``(kind, index, power)`` triples in
the canonical order ``x < theta < p < pi < dp < dpi`` (ties broken by index).
Multiplication reduces the concatenated word to normal form using the
commutation table of a :class:`Presentation`.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

KINDS = ("x", "theta", "p", "pi", "dp", "dpi")
X, THETA, P, PI, DP, DPI = range(6)
KIND_INDEX = {name: k for k, name in enumerate(KINDS)}

# (first degree, resolution degree) of each generator kind
BIDEGREE = {X: (0, 0), THETA: (1, 0), P: (0, 0), PI: (-1, 0), DP: (0, 1), DPI: (-1, 1)}
NILPOTENT = frozenset({THETA, PI, DP})

Monomial = tuple  # tuple[tuple[int, int, int], ...]


class PresentationError(ValueError):
    pass


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


@dataclass(frozen=True)
class Presentation:
    """Generators and commutation rules.

    ``n`` commuting coordinates, ``m`` odd directions with eigenvalue data
    ``q[a][i]``.  With ``weyl=False`` the coordinates ``x`` and ``p`` commute
    as symbols (the endomorphism-algebra picture, where the interaction lives
    in the bullet product); with ``weyl=True`` the quantum Weyl relations
    ``x^i p_j - p_j x^i = delta`` and ``theta^a pi_a + pi_a theta^a = 1`` are on.

    ``odd_cross`` selects how generators attached to different odd
    directions commute: ``"literal"`` uses the relations exactly as written
    for a single presentation, ``"tensor"`` uses Koszul signs, which is the
    graded tensor product of one-direction algebras.
    """

    n: int
    m: int = 0
    q: tuple = ()
    weyl: bool = False
    odd_cross: str = "literal"
    truncation: int | None = None

    def __post_init__(self):
        q = tuple(tuple(_frac(v) for v in row) for row in self.q)
        object.__setattr__(self, "q", q)
        if len(q) != self.m or any(len(row) != self.n for row in q):
            raise PresentationError(f"q must be an {self.m}x{self.n} matrix")
        if any(v == 0 for row in q for v in row):
            raise PresentationError("q entries must be nonzero")
        if self.odd_cross not in ("literal", "tensor"):
            raise PresentationError(f"unknown odd_cross mode {self.odd_cross!r}")

    def dim(self, kind: int) -> int:
        return self.n if kind in (X, P, DP) else self.m

    def qa(self, a: int, i: int) -> Fraction:
        return self.q[a - 1][i - 1]

    def with_truncation(self, truncation: int | None) -> "Presentation":
        return Presentation(self.n, self.m, self.q, self.weyl, self.odd_cross, truncation)

    def generators(self) -> list[tuple[int, int]]:
        return [(k, i) for k in range(6) for i in range(1, self.dim(k) + 1)]


def polynomial_presentation(n: int, truncation: int | None = None) -> Presentation:
    """Symbols x, p commuting, dp anticommuting: the algebra behind B."""
    return Presentation(n=n, truncation=truncation)


def _swap(pres: Presentation, big: tuple[int, int], small: tuple[int, int]):
    """Return (c, e) with ``big * small = c * small * big + e``; small < big."""
    kb, b = big
    ks, s = small
    one = Fraction(1)
    literal = pres.odd_cross == "literal"
    if ks == kb:
        if kb in (X, P):
            return one, 0
        if kb == DP:
            return -one, 0
        # theta/theta, pi/pi, dpi/dpi with distinct indices
        if kb == DPI:
            return (-one if literal else one), 0
        return (one if literal else -one), 0
    pair = (ks, kb)
    if pair == (X, THETA):
        return pres.qa(b, s), 0
    if pair == (X, P):
        return one, (-1 if (pres.weyl and b == s) else 0)
    if pair == (X, PI):
        return 1 / pres.qa(b, s), 0
    if pair in ((X, DP), (P, DP)):
        return one, 0
    if pair == (X, DPI):
        return 1 / pres.qa(b, s), 0
    if pair == (THETA, P):
        return pres.qa(s, b), 0
    if pair == (THETA, PI):
        if b == s:
            return -one, (1 if pres.weyl else 0)
        return (one if literal else -one), 0
    if pair == (THETA, DP):
        return -pres.qa(s, b), 0
    if pair == (THETA, DPI):
        if b == s:
            return one, 0
        return (-one if literal else one), 0
    if pair == (P, PI):
        return pres.qa(b, s), 0
    if pair == (P, DPI):
        return pres.qa(b, s), 0
    if pair == (PI, DP):
        return -1 / pres.qa(s, b), 0
    if pair == (PI, DPI):
        if b == s:
            return one, 0
        return (-one if literal else one), 0
    if pair == (DP, DPI):
        return pres.qa(b, s), 0
    raise PresentationError(f"no commutation rule for {pair}")


def swap_rule(pres: Presentation, big, small):
    """Public view of the rewrite rule ``big*small -> c*small*big + e``."""
    return _swap(pres, tuple(big), tuple(small))


@lru_cache(maxsize=None)
def _times_gen(pres: Presentation, mono: Monomial, g: tuple[int, int]) -> tuple:
    if not mono:
        return ((((g[0], g[1], 1),), Fraction(1)),)
    *prefix, last = mono
    prefix = tuple(prefix)
    lk, li, lp = last
    top = (lk, li)
    if top == g:
        if g[0] in NILPOTENT:
            return ()
        return ((prefix + ((lk, li, lp + 1),), Fraction(1)),)
    if top < g:
        return ((mono + ((g[0], g[1], 1),), Fraction(1)),)
    c, e = _swap(pres, top, g)
    out: dict = defaultdict(Fraction)
    ck = c**lp
    for m2, coef in _times_gen(pres, prefix, g):
        out[m2 + (last,)] += ck * coef
    if e:
        s = sum(c**j for j in range(lp))
        rest = prefix + (((lk, li, lp - 1),) if lp > 1 else ())
        out[rest] += e * s
    return tuple((k, v) for k, v in out.items() if v)


@lru_cache(maxsize=None)
def _mul_mono(pres: Presentation, m1: Monomial, m2: Monomial) -> tuple:
    cur: dict = {m1: Fraction(1)}
    for kind, idx, power in m2:
        for _ in range(power):
            nxt: dict = defaultdict(Fraction)
            for mono, coef in cur.items():
                for m3, c3 in _times_gen(pres, mono, (kind, idx)):
                    nxt[m3] += coef * c3
            cur = {k: v for k, v in nxt.items() if v}
    return tuple(cur.items())


def mul_monomials(pres: Presentation, m1: Monomial, m2: Monomial) -> tuple:
    """Normal-ordered product of two monomials as ``((monomial, coef), ...)``."""
    return _mul_mono(pres, m1, m2)


def derive_monomial(mono: Monomial, kind: int, index: int):
    """``(coef, monomial)`` for the derivative in an even coordinate, or None."""
    for pos, (fk, fi, fp) in enumerate(mono):
        if fk == kind and fi == index:
            rest = ((fk, fi, fp - 1),) if fp > 1 else ()
            return fp, mono[:pos] + rest + mono[pos + 1:]
    return None


def p_degree(mono: Monomial) -> int:
    return sum(pw for k, _, pw in mono if k == P)


def form_degree(mono: Monomial) -> int:
    return sum(pw for k, _, pw in mono if k == DP)


def bidegree(mono: Monomial) -> tuple[int, int]:
    f = r = 0
    for k, _, pw in mono:
        bf, br = BIDEGREE[k]
        f += bf * pw
        r += br * pw
    return f, r


def total_degree(mono: Monomial) -> int:
    return sum(bidegree(mono))


def word_degree(mono: Monomial) -> int:
    """Number of generator factors, counted with multiplicity."""
    return sum(pw for _, _, pw in mono)


class Element:
    """Immutable element: mapping normal monomial -> nonzero Fraction."""

    __slots__ = ("pres", "terms", "_hash")

    def __init__(self, pres: Presentation, terms: Mapping | Iterable = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = {}
        trunc = pres.truncation
        for mono, c in items:
            if c and (trunc is None or p_degree(mono) <= trunc):
                clean[mono] = clean.get(mono, 0) + c
        self.pres = pres
        self.terms = {k: Fraction(v) for k, v in clean.items() if v}
        self._hash = None

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, pres):
        return cls(pres)

    @classmethod
    def const(cls, pres, c=1):
        return cls(pres, {(): Fraction(c)})

    @classmethod
    def gen(cls, pres, kind, index, power=1):
        return normal_form([(kind, index)] * power, pres)

    # basic protocol -----------------------------------------------------
    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Element.const(self.pres, other)
        if not isinstance(other, Element):
            return NotImplemented
        return self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        return f"Element({format_element(self)})"

    def _coerce(self, other):
        if isinstance(other, Element):
            if other.pres.n != self.pres.n or other.pres.m != self.pres.m or other.pres.q != self.pres.q:
                raise PresentationError("mixed presentations")
            return other
        return Element.const(self.pres, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Element(self.pres, out)

    __radd__ = __add__

    def __neg__(self):
        return Element(self.pres, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c) -> "Element":
        c = Fraction(c)
        if not c:
            return Element(self.pres)
        return Element(self.pres, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Element):
            return mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def items(self):
        return self.terms.items()

    def coefficient(self, mono) -> Fraction:
        return self.terms.get(tuple(mono), Fraction(0))

    def max_p_degree(self) -> int:
        return max((p_degree(m) for m in self.terms), default=0)

    def filter(self, pred) -> "Element":
        return Element(self.pres, {k: v for k, v in self.terms.items() if pred(k)})


def _check_gen(pres: Presentation, kind, index) -> tuple[int, int]:
    k = KIND_INDEX[kind] if isinstance(kind, str) else int(kind)
    if not 1 <= index <= pres.dim(k):
        raise PresentationError(f"index {index} out of range for {KINDS[k]}")
    return k, index


def normal_form(word: Sequence, pres: Presentation, coeff=1) -> Element:
    """Normal form of ``coeff * g1 g2 ... gk`` for a word of (kind, index)."""
    gens = [_check_gen(pres, k, i) for k, i in word]
    cur: dict = {(): Fraction(coeff)}
    for g in gens:
        nxt: dict = defaultdict(Fraction)
        for mono, c in cur.items():
            for m2, c2 in _times_gen(pres, mono, g):
                nxt[m2] += c * c2
        cur = {k: v for k, v in nxt.items() if v}
    return Element(pres, cur)


def mul(a: Element, b: Element) -> Element:
    if a.pres != b.pres:
        if (a.pres.n, a.pres.m, a.pres.q, a.pres.weyl, a.pres.odd_cross) != (
            b.pres.n, b.pres.m, b.pres.q, b.pres.weyl, b.pres.odd_cross
        ):
            raise PresentationError("mixed presentations")
    pres = a.pres
    out: dict = defaultdict(Fraction)
    for m1, c1 in a.terms.items():
        for m2, c2 in b.terms.items():
            for m3, c3 in _mul_mono(pres, m1, m2):
                out[m3] += c1 * c2 * c3
    return Element(pres, out)


def monomial(pres: Presentation, factors: Iterable, coeff=1) -> Element:
    """Element from ``(kind, index, power)`` factors given in any order."""
    word = []
    for kind, index, power in factors:
        word.extend([(kind, index)] * power)
    return normal_form(word, pres, coeff)


def partial_derivative(kind, index: int, a: Element) -> Element:
    """Formal derivative in an even coordinate ``x^index`` or ``p_index``."""
    k = KIND_INDEX[kind] if isinstance(kind, str) else kind
    if k not in (X, P):
        raise NotImplementedError("derivatives only in x or p")
    out: dict = defaultdict(Fraction)
    for mono, c in a.terms.items():
        for pos, (fk, fi, fp) in enumerate(mono):
            if fk == k and fi == index:
                new = mono[:pos] + (((fk, fi, fp - 1),) if fp > 1 else ()) + mono[pos + 1:]
                out[new] += c * fp
                break
    return Element(a.pres, out)


def apply_automorphism(eigs: Sequence, a: Element) -> Element:
    """Diagonal automorphism: p_i -> q_i p_i, dp_i -> q_i dp_i, x^i -> x^i / q_i."""
    eigs = [Fraction(e) for e in eigs]
    if len(eigs) != a.pres.n:
        raise PresentationError("eigenvalue list must have length n")
    if any(e == 0 for e in eigs):
        raise ValueError("automorphism eigenvalues must be nonzero")
    out = {}
    for mono, c in a.terms.items():
        s = Fraction(1)
        for k, i, pw in mono:
            if k in (P, DP):
                s *= eigs[i - 1] ** pw
            elif k == X:
                s /= eigs[i - 1] ** pw
        out[mono] = c * s
    return Element(a.pres, out)


def simplex_integrate(f: Mapping):
    """Integrate over 0 < u_1 < ... < u_r < 1.

    ``f`` maps exponent tuples ``(a_1, ..., a_r)`` to coefficients (Fractions
    or Elements).  Each monomial integrates to prod_j 1/(a_1+...+a_j + j).
    """
    total = None
    for exps, coef in f.items():
        exps = tuple(exps)
        if any(not isinstance(e, int) or e < 0 for e in exps):
            raise ValueError(f"non-polynomial integrand exponent {exps}")
        w = Fraction(1)
        acc = 0
        for j, e in enumerate(exps, start=1):
            acc += e
            w /= acc + j
        term = coef * w
        total = term if total is None else total + term
    return 0 if total is None else total


# ---------------------------------------------------------------------------
# s-expression text form


def _fmt_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_element(a: Element) -> str:
    terms = []
    for mono in sorted(a.terms):
        fs = "".join(f" ({KINDS[k]} {i} {pw})" for k, i, pw in mono)
        terms.append(f"(mon {_fmt_frac(a.terms[mono])}{fs})")
    return "(+" + "".join(" " + t for t in terms) + ")"


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens: list[str], pos: int):
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            items.append(item)
        return items, pos + 1
    if tok == ")":
        raise ValueError("unexpected ')'")
    return tok, pos + 1


def read_sexpr(text: str):
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty expression")
    tree, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ValueError("trailing tokens")
    return tree


def element_from_tree(tree, pres: Presentation) -> Element:
    if not isinstance(tree, list) or not tree or tree[0] != "+":
        raise ValueError("expected (+ term*)")
    out = Element.zero(pres)
    for term in tree[1:]:
        if not isinstance(term, list) or len(term) < 2 or term[0] != "mon":
            raise ValueError("expected (mon coeff factor*)")
        factors = []
        for fac in term[2:]:
            kind, index, power = fac
            factors.append((KIND_INDEX[kind], int(index), int(power)))
        word = []
        for k, i, pw in factors:
            _check_gen(pres, k, i)
            word.extend([(k, i)] * pw)
        out = out + normal_form(word, pres, Fraction(term[1]))
    return out


def parse_element(text: str, pres: Presentation) -> Element:
    return element_from_tree(read_sexpr(text), pres)
