"""Quantum polynomial superalgebras and their central d-cocycles.

A q-matrix is an ``m x n`` array ``q[a][i]`` of nonzero rationals.  Basis
central cocycles are described symbolically by :class:`CocycleDescriptor`
and expanded into exact elements only when verified.

Ordering convention for the exponential prefactor: the PBW basis puts ``x``
left of ``p``, and the algebra is completed in ``p``.  In that basis the
central representative of the prefactor with coefficients ``c_i = 1 - Q_i``
is ``sum_k prod c_i^k / k! (x^i)^k (p_i)^k``.  Its symbol in the opposite
(``p``-left) ordering is ``exp(-sum c_i x^i p_i)``, which is how
:meth:`CocycleDescriptor.text` prints it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial, prod
from typing import Sequence

from .exactalg import (
    DP, DPI, KINDS, P, PI, THETA, X, Element, Presentation, PresentationError,
    monomial, p_degree, total_degree, _frac,
)
from .gradedmaps import CheckReport


class UnsupportedError(ValueError):
    pass


Z2_QMATRIX = ((-1, -1),)
KLEIN_QMATRIX = ((-1, -1, 1, 1), (1, 1, -1, -1))


def _qmatrix(qmatrix: Sequence) -> tuple:
    return tuple(tuple(_frac(v) for v in row) for row in qmatrix)


def build_presentation(qmatrix: Sequence, n: int | None = None, truncation: int | None = None,
                       odd_cross: str = "literal") -> Presentation:
    """Quantum Weyl superalgebra with its WZ differential forms."""
    q = _qmatrix(qmatrix)
    if n is None:
        if not q:
            raise PresentationError("n is required when there are no odd directions")
        n = len(q[0])
    return Presentation(n=n, m=len(q), q=q, weyl=True, odd_cross=odd_cross,
                        truncation=truncation)


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class CocycleDescriptor:
    n_a: tuple
    forced_set: tuple
    alpha_set: tuple
    exponent: tuple  # c_i = 1 - prod_a q_{ai}^{n_a}

    @property
    def dp_indices(self) -> tuple:
        return tuple(sorted(self.forced_set + self.alpha_set))

    @property
    def total_degree(self) -> int:
        return len(self.dp_indices)

    def prefactor_text(self) -> str:
        parts = []
        for i, c in enumerate(self.exponent, start=1):
            if c:
                parts.append(f"-{c}*x{i}*p{i}" if c > 0 else f"+{-c}*x{i}*p{i}")
        if not parts:
            return "1"
        s = "".join(parts)
        return "exp(" + (s[1:] if s.startswith("+") else s) + ")"

    def text(self) -> str:
        dps = " ".join(f"dp{i}" for i in self.dp_indices) or "-"
        npi = " ".join(str(v) for v in self.n_a) or "-"
        return f"prefactor={self.prefactor_text()} dp=[{dps}] dpi=[{npi}]"

    def key(self) -> tuple:
        return (sum(self.n_a), self.n_a, len(self.dp_indices), self.dp_indices)

    def product(self, other: "CocycleDescriptor", qmatrix: Sequence) -> "CocycleDescriptor | None":
        """Descriptor of the product, or None when a dp factor repeats."""
        if set(self.dp_indices) & set(other.dp_indices):
            return None
        n_a = tuple(a + b for a, b in zip(self.n_a, other.n_a))
        return _descriptor(_qmatrix(qmatrix), n_a, self.dp_indices + other.dp_indices,
                           len(self.exponent))


def _Q(q: tuple, n_a: tuple, n: int) -> list:
    return [prod((q[a][i] ** n_a[a] for a in range(len(q))), start=Fraction(1)) for i in range(n)]


def _descriptor(q: tuple, n_a: tuple, dp: Sequence, n: int) -> CocycleDescriptor:
    Q = _Q(q, n_a, n)
    forced = tuple(i + 1 for i in range(n) if Q[i] != 1)
    alpha = tuple(sorted(i for i in dp if i not in forced))
    return CocycleDescriptor(tuple(n_a), forced, alpha, tuple(1 - v for v in Q))


def prod2_holds(q: tuple, n_a: tuple, indices: Sequence, mode: str = "literal") -> bool:
    for a in range(len(q)):
        v = prod((q[a][i - 1] for i in indices), start=Fraction(1))
        if mode == "literal" and sum(n_a[b] for b in range(len(q)) if b != a) % 2:
            v = -v
        if v != 1:
            return False
    return True


def classify_central_cocycles(qmatrix: Sequence, npi_bound: int, n: int | None = None,
                              mode: str = "literal") -> list:
    """All basis descriptors with sum(n_a) <= npi_bound.

    ``mode="tensor"`` drops the cross-direction sign, which is the right
    bookkeeping for graded tensor products of one-direction algebras.
    """
    if mode not in ("literal", "tensor"):
        raise ValueError(f"unknown mode {mode!r}")
    q = _qmatrix(qmatrix)
    if n is None:
        if not q:
            raise PresentationError("n is required when there are no odd directions")
        n = len(q[0])
    m = len(q)
    out = []
    for n_a in itertools.product(range(npi_bound + 1), repeat=m):
        if sum(n_a) > npi_bound:
            continue
        Q = _Q(q, n_a, n)
        forced = tuple(i + 1 for i in range(n) if Q[i] != 1)
        free = [i + 1 for i in range(n) if Q[i] == 1]
        for r in range(len(free) + 1):
            for alpha in itertools.combinations(free, r):
                if prod2_holds(q, n_a, forced + alpha, mode):
                    out.append(CocycleDescriptor(tuple(n_a), forced, alpha,
                                                 tuple(1 - v for v in Q)))
    return sorted(out, key=CocycleDescriptor.key)


def multiplicative_generators(descs: Sequence[CocycleDescriptor], qmatrix: Sequence) -> list:
    """Members that are not products of two non-unit members (the unit is kept)."""
    pool = set(descs)
    units = {d for d in descs if not d.dp_indices and not any(d.n_a)}
    nonunit = [d for d in descs if d not in units]
    products = set()
    for a, b in itertools.product(nonunit, repeat=2):
        c = a.product(b, qmatrix)
        if c is not None and c in pool:
            products.add(c)
    return sorted((d for d in descs if d not in products), key=CocycleDescriptor.key)


# ---------------------------------------------------------------------------
# explicit elements and checks


def cocycle_element(desc: CocycleDescriptor, pres: Presentation) -> Element:
    if pres.truncation is None:
        raise ValueError("expanding an exponential prefactor needs a p-truncation")
    T = pres.truncation
    one = Element.const(pres, 1)
    f = one
    for i, c in enumerate(desc.exponent, start=1):
        if not c:
            continue
        s = Element.zero(pres)
        for k in range(T + 1):
            term = monomial(pres, [(X, i, k), (P, i, k)]) if k else one
            s = s + term.scale(Fraction(c) ** k / factorial(k))
        f = f * s
    factors = [(DP, i, 1) for i in desc.dp_indices]
    factors += [(DPI, a, k) for a, k in enumerate(desc.n_a, start=1) if k]
    return f * monomial(pres, factors)


def wz_differential(a: Element) -> Element:
    """d p_i = dp_i, d pi_a = dpi_a, d x = d theta = 0, graded Leibniz in total degree."""
    pres = a.pres
    out = Element.zero(pres)
    for mono, c in a.terms.items():
        for pos, (k, i, pw) in enumerate(mono):
            if k not in (P, PI):
                continue
            prefix = mono[:pos]
            sign = -1 if total_degree(prefix) % 2 else 1
            rest = [(k, i, pw - 1)] if pw > 1 else []
            dk = DP if k == P else DPI
            piece = monomial(pres, list(prefix)) * monomial(pres, rest + [(dk, i, 1)]) \
                * monomial(pres, list(mono[pos + 1:]))
            out = out + piece.scale(c * pw * sign)
    return out


_PARITY = {X: 0, THETA: 1, P: 0, PI: 1, DP: 1, DPI: 0}


def graded_commutator(g: tuple, f: Element) -> Element:
    """g f - (-1)^{|g||f|} f g for a generator ``g = (kind, index)``."""
    pres = f.pres
    gen = Element.gen(pres, KINDS[g[0]], g[1])
    out = gen * f
    for mono, c in f.terms.items():
        sign = -1 if (_PARITY[g[0]] and total_degree(mono) % 2) else 1
        out = out - Element(pres, {mono: c}) * gen.scale(sign)
    return out


def p_window(pres: Presentation):
    T = pres.truncation
    if T is None:
        return lambda e: e
    return lambda e: e.filter(lambda m: p_degree(m) < T)


def verify_cocycle(c, pres: Presentation, window=None) -> CheckReport:
    """Centrality against every generator and d-closedness, inside the exact window."""
    f = cocycle_element(c, pres) if isinstance(c, CocycleDescriptor) else c
    win = p_window(pres) if window is None else window
    rep = CheckReport()
    for g in pres.generators():
        rep.record(f"[{KINDS[g[0]]}{g[1]}, f]", g, win(graded_commutator(g, f)))
    rep.record("df", None, win(wz_differential(f)))
    return rep


def first_witness(rep: CheckReport):
    return rep.rows[0] if rep.rows else None


# ---------------------------------------------------------------------------
# top-degree families for the Klein data


def degree4_cocycles(qmatrix: Sequence, bound: int) -> list:
    """Top-form cocycles dp1 dp2 dp3 dp4 (dpi_1)^{n1} (dpi_2)^{n2}, n1, n2 <= bound.

    Family is the parity pattern (n1 % 2, n2 % 2).
    """
    q = _qmatrix(qmatrix)
    if q != _qmatrix(KLEIN_QMATRIX):
        raise UnsupportedError("top-degree families are only tabulated for the Klein data")
    out = []
    for n_a in itertools.product(range(bound + 1), repeat=2):
        out.append(_descriptor(q, n_a, (1, 2, 3, 4), 4))
    return sorted(out, key=lambda d: (family_of(d), d.n_a))


def family_of(desc: CocycleDescriptor) -> int:
    """1..4 in the order even/even, odd/even, even/odd, odd/odd."""
    e1, e2 = desc.n_a[0] % 2, desc.n_a[1] % 2
    return 1 + e1 + 2 * e2


def kunneth_products(factor_q: Sequence, bound: int, copies: int = 2) -> list:
    """Products of one-factor descriptors placed on disjoint coordinate blocks."""
    fq = _qmatrix(factor_q)
    n = len(fq[0])
    per = classify_central_cocycles(fq, bound, mode="tensor")
    out = set()
    for combo in itertools.product(per, repeat=copies):
        n_a = tuple(d.n_a[0] for d in combo)
        if sum(n_a) > bound:
            continue
        dp = []
        for k, d in enumerate(combo):
            dp += [i + k * n for i in d.dp_indices]
        q = tuple(tuple(fq[0][j % n] if j // n == a else Fraction(1) for j in range(n * copies))
                  for a in range(copies))
        out.add(_descriptor(q, n_a, dp, n * copies))
    return sorted(out, key=CocycleDescriptor.key)
