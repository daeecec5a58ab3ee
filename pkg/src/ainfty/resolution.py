"""Resolutions of polynomial bimodules by differential forms in the p-variables.

Elements of the extended algebra are pairs ``(a, b)``; the second summand
carries an extra unit of degree and its right action is twisted by a diagonal
automorphism.  Underlying forms live in a supercommutative presentation with
generators ``x``, ``p`` (even) and ``dp`` (odd).

Gradings:
  * form degree ``l`` = number of ``dp`` factors (the resolution degree);
  * algebra degree of ``(a, 0)`` is ``l``, of ``(0, b)`` is ``l + 1``;
  * the desuspended degree used for Koszul signs is algebra degree minus one.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .exactalg import (
    DP, P, X, Element, Presentation, apply_automorphism, derive_monomial, form_degree,
    mul_monomials, p_degree, _frac,
)
from .gradedmaps import CheckReport, GradedMap, TruncationError, post_compose


class NoSolutionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


KINDS = ("polynomial", "vasiliev")


class Pair:
    """Element ``(a, b)`` of the extended algebra."""

    __slots__ = ("a", "b")

    def __init__(self, a: Element, b: Element):
        self.a = a
        self.b = b

    def __add__(self, other: "Pair") -> "Pair":
        return Pair(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "Pair") -> "Pair":
        return Pair(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "Pair":
        return Pair(-self.a, -self.b)

    def scale(self, c) -> "Pair":
        return Pair(self.a.scale(c), self.b.scale(c))

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero()

    def __eq__(self, other):
        return isinstance(other, Pair) and self.a == other.a and self.b == other.b

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        from .exactalg import format_element
        return f"(pair {format_element(self.a)} {format_element(self.b)})"

    def filter(self, pred) -> "Pair":
        return Pair(self.a.filter(pred), self.b.filter(pred))


class PairSpace:
    """Graded-space adapter for :mod:`gradedmaps`; basis vectors are ``(side, monomial)``."""

    def __init__(self, alg: "ResolutionAlgebra"):
        self.alg = alg

    def zero(self) -> Pair:
        z = Element.zero(self.alg.pres)
        return Pair(z, z)

    def decompose(self, v: Pair):
        out = [(c, (0, m)) for m, c in sorted(v.a.terms.items())]
        out += [(c, (1, m)) for m, c in sorted(v.b.terms.items())]
        return out

    def degree(self, basis) -> int:
        side, mono = basis
        return form_degree(mono) + side - 1

    def embed(self, basis) -> Pair:
        side, mono = basis
        e = Element(self.alg.pres, {mono: 1})
        z = Element.zero(self.alg.pres)
        return Pair(e, z) if side == 0 else Pair(z, e)


class ResolutionAlgebra:
    """The DG algebra of forms with the bullet product, possibly extended by a twisted copy."""

    def __init__(self, n: int, kind: str = "polynomial", twist: Sequence | None = None,
                 lam: Sequence | None = None, truncation: int | None = None,
                 extension: bool = True, strict: bool = False):
        if kind not in KINDS:
            raise ConfigError(f"unknown resolution kind {kind!r}")
        if n < 1:
            raise ConfigError("n must be positive")
        self.n = n
        self.kind = kind
        self.pres = Presentation(n=n, m=0, weyl=False, truncation=truncation)
        self.truncation = truncation
        self.twist = tuple(_frac(q) for q in (twist if twist is not None else [1] * n))
        if len(self.twist) != n or any(q == 0 for q in self.twist):
            raise ConfigError("twist needs n nonzero eigenvalues")
        if lam is None:
            lam = [[0] * n for _ in range(n)]
        self.lam = tuple(tuple(_frac(v) for v in row) for row in lam)
        if len(self.lam) != n or any(len(r) != n for r in self.lam):
            raise ConfigError("lambda must be an n x n matrix")
        if any(self.lam[i][j] != -self.lam[j][i] for i in range(n) for j in range(n)):
            raise ConfigError("lambda must be antisymmetric")
        self.extension = extension
        self.strict = strict
        self.space = PairSpace(self)
        self._bcache: dict = {}
        self._lam_items = [(i + 1, j + 1, v) for i, row in enumerate(self.lam)
                           for j, v in enumerate(row) if v]

    def __repr__(self):
        return (f"ResolutionAlgebra(n={self.n}, kind={self.kind}, twist={self.twist}, "
                f"truncation={self.truncation})")

    # element helpers
    def el(self, terms=()) -> Element:
        return Element(self.pres, terms)

    def gen(self, kind: int, index: int) -> Element:
        return Element.gen(self.pres, kind, index)

    def const(self, c=1) -> Element:
        return Element.const(self.pres, c)

    def pair(self, a=None, b=None) -> Pair:
        z = Element.zero(self.pres)
        a = z if a is None else (a if isinstance(a, Element) else Element.const(self.pres, a))
        b = z if b is None else (b if isinstance(b, Element) else Element.const(self.pres, b))
        return Pair(a, b)

    def twisted(self, a: Element) -> Element:
        return apply_automorphism(self.twist, a)

    def with_truncation(self, truncation: int | None) -> "ResolutionAlgebra":
        return ResolutionAlgebra(self.n, self.kind, self.twist, self.lam, truncation,
                                 self.extension, self.strict)


# ---------------------------------------------------------------------------
# products and differentials


def _bullet_mono(alg: ResolutionAlgebra, ma, mb) -> dict:
    key = (ma, mb)
    hit = alg._bcache.get(key)
    if hit is not None:
        return hit
    pres = alg.pres
    out: dict = defaultdict(Fraction)
    cur = {(ma, mb): Fraction(1)}
    fact = 1
    k = 0
    while cur:
        for (a, b), c in cur.items():
            for m3, c3 in mul_monomials(pres, a, b):
                out[m3] += c * c3 / fact
        nxt: dict = defaultdict(Fraction)
        for (a, b), c in cur.items():
            for i in range(1, alg.n + 1):
                da = derive_monomial(a, P, i)
                if da is None:
                    continue
                db = derive_monomial(b, X, i)
                if db is None:
                    continue
                nxt[(da[1], db[1])] += c * da[0] * db[0]
            if alg.kind == "vasiliev":
                for i, j, lv in alg._lam_items:
                    da = derive_monomial(a, X, i)
                    if da is None:
                        continue
                    db = derive_monomial(b, X, j)
                    if db is None:
                        continue
                    nxt[(da[1], db[1])] += c * lv * da[0] * db[0]
        cur = {key2: v for key2, v in nxt.items() if v}
        k += 1
        fact *= k
    res = {m: c for m, c in out.items() if c}
    alg._bcache[key] = res
    return res


def bullet(a: Element, b: Element, alg: ResolutionAlgebra) -> Element:
    """Product of forms: ``a exp(<- d/dp_i -> d/dx^i [+ lambda term]) b``."""
    out: dict = defaultdict(Fraction)
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            for m3, c3 in _bullet_mono(alg, ma, mb).items():
                out[m3] += ca * cb * c3
    if alg.strict and alg.truncation is not None:
        lost = max((p_degree(m) for m, c in out.items() if c), default=0)
        if lost > alg.truncation:
            raise TruncationError(f"product needs p-degree {lost} > truncation {alg.truncation}")
    return Element(alg.pres, out)


def _split_by_form_degree(a: Element) -> dict:
    parts: dict = defaultdict(dict)
    for m, c in a.terms.items():
        parts[form_degree(m)][m] = c
    return parts


def bullet_product(A: Pair, B: Pair, alg: ResolutionAlgebra) -> Pair:
    """``(a,b)(a',b') = (a a', (-1)^{|a|} a b' + b ta')``."""
    first = bullet(A.a, B.a, alg)
    second = Element.zero(alg.pres)
    if not B.b.is_zero():
        for l, terms in _split_by_form_degree(A.a).items():
            t = bullet(Element(alg.pres, terms), B.b, alg)
            second = second + (-t if l % 2 else t)
    if not A.b.is_zero():
        second = second + bullet(A.b, alg.twisted(B.a), alg)
    return Pair(first, second)


def d_form(a: Element) -> Element:
    """Exterior differential in the p-variables."""
    pres = a.pres
    out = Element.zero(pres)
    from .exactalg import mul, partial_derivative
    for j in range(1, pres.n + 1):
        da = partial_derivative(P, j, a)
        if not da.is_zero():
            out = out + mul(Element.gen(pres, DP, j), da)
    return out


def de_rham_d(A: Pair) -> Pair:
    return Pair(d_form(A.a), -d_form(A.b))


def h_form(a: Element) -> Element:
    """Contracting homotopy: Euler contraction divided by (p-degree + form degree)."""
    pres = a.pres
    out: dict = defaultdict(Fraction)
    for mono, c in a.terms.items():
        l = form_degree(mono)
        if l == 0:
            continue
        k = p_degree(mono)
        weight = c / (k + l)
        pos = 0
        for t, (kind, idx, pw) in enumerate(mono):
            if kind != DP:
                continue
            rest = mono[:t] + mono[t + 1:]
            sign = -1 if pos % 2 else 1
            for m3, c3 in mul_monomials(pres, ((P, idx, 1),), rest):
                out[m3] += sign * weight * c3
            pos += 1
    return Element(pres, out)


def homotopy_h(A: Pair) -> Pair:
    return Pair(h_form(A.a), -h_form(A.b))


def _is_w_mono(mono) -> bool:
    return all(k == X for k, _, _ in mono)


def project_p(A: Pair) -> Pair:
    """Set p and dp to zero, keeping the x-polynomial part of both components."""
    return A.filter(_is_w_mono)


def include_i(w: Pair) -> Pair:
    if not w.filter(lambda m: not _is_w_mono(m)).is_zero():
        raise ValueError("include_i expects an element of W")
    return w


# ---------------------------------------------------------------------------
# structure maps as graded maps on the desuspension


def _sgn(k: int) -> int:
    return -1 if k % 2 else 1


def m1_map(alg: ResolutionAlgebra) -> GradedMap:
    sp = alg.space
    return GradedMap(1, 1, lambda args: de_rham_d(sp.embed(args[0])), sp, label="d",
                     res_degree=1)


def m2_map(alg: ResolutionAlgebra) -> GradedMap:
    """Binary structure map ``m(u, v) = (-1)^{|u|} u . v`` in desuspended degrees."""
    sp = alg.space

    def rule(args):
        u, v = args
        prod = bullet_product(sp.embed(u), sp.embed(v), alg)
        return -prod if sp.degree(u) % 2 else prod

    return GradedMap(2, 1, rule, sp, label="m2", res_degree=0)


def h_map(alg: ResolutionAlgebra) -> GradedMap:
    sp = alg.space
    return GradedMap(1, -1, lambda args: homotopy_h(sp.embed(args[0])), sp, label="h",
                     res_degree=-1)


def ip_map(alg: ResolutionAlgebra) -> GradedMap:
    sp = alg.space
    return GradedMap(1, 0, lambda args: project_p(sp.embed(args[0])), sp, label="ip",
                     res_degree=0)


def identity_map(alg: ResolutionAlgebra) -> GradedMap:
    sp = alg.space
    return GradedMap(1, 0, lambda args: sp.embed(args[0]), sp, label="id", res_degree=0)


def constant_map(alg: ResolutionAlgebra, value: Pair, label: str = "lambda") -> GradedMap:
    sp = alg.space
    degs = {sp.degree(b) for _, b in sp.decompose(value)}
    if len(degs) > 1:
        raise ValueError("constant map must be homogeneous")
    deg = degs.pop() if degs else 1
    res = {form_degree(b[1]) for _, b in sp.decompose(value)}
    return GradedMap(0, deg, lambda args: value, sp, label=label,
                     res_degree=res.pop() if len(res) == 1 else None)


def central_form(alg: ResolutionAlgebra, matrix: Sequence | None = None) -> Pair:
    """Constant 2-form ``sum_{i<j} c_ij dp_i dp_j`` (default ``dp_1 dp_2``) as a pair."""
    pres = alg.pres
    form = Element.zero(pres)
    if matrix is None:
        form = Element(pres, {((DP, 1, 1), (DP, 2, 1)): 1})
    else:
        for i in range(alg.n):
            for j in range(i + 1, alg.n):
                c = _frac(matrix[i][j])
                if c:
                    form = form + Element(pres, {((DP, i + 1, 1), (DP, j + 1, 1)): c})
    return alg.pair(form, None)


def lifted_homotopy(f: GradedMap, alg: ResolutionAlgebra | None = None) -> GradedMap:
    """``(h~ f)(v...) = h(f(v...))``."""
    return post_compose(homotopy_h, f, -1, label=f"h~{f.label}")


# ---------------------------------------------------------------------------
# gamma and the twisted differential D


def _exp_series(alg: ResolutionAlgebra, L: Element, order: int) -> Element:
    from .exactalg import mul
    out = Element.const(alg.pres)
    term = Element.const(alg.pres)
    for k in range(1, order + 1):
        term = mul(term, L).scale(Fraction(1, k))
        if term.is_zero():
            break
        out = out + term
    return out


def gamma_exponent(alg: ResolutionAlgebra) -> Element:
    pres = alg.pres
    L = Element.zero(pres)
    for i, q in enumerate(alg.twist, start=1):
        c = 1 / q - 1
        if c:
            L = L + Element(pres, {((X, i, 1), (P, i, 1)): c})
    if alg.kind == "vasiliev":
        for i, j, lv in alg._lam_items:
            # sign fixed by the intertwining condition for this product
            c = -lv * alg.twist[j - 1]
            mono = ((P, i, 2),) if i == j else ((P, min(i, j), 1), (P, max(i, j), 1))
            L = L + Element(pres, {mono: c})
    return L


def gamma_form(alg: ResolutionAlgebra) -> Element:
    pres = alg.pres
    moved = [i for i, q in enumerate(alg.twist, start=1) if q != 1]
    if alg.kind == "polynomial":
        if not moved:
            return Element(pres, {((DP, 1, 1), (DP, 2, 1)): 1})
        if len(moved) != 2:
            raise NoSolutionError(f"twist moves {len(moved)} directions; exactly two required")
        i, j = moved
        if alg.twist[i - 1] * alg.twist[j - 1] != 1:
            raise NoSolutionError("twist block must have determinant one")
        return Element(pres, {((DP, i, 1), (DP, j, 1)): 1})
    # coefficients of 2-forms are read with the 1/2! convention, as for the homotopy
    out = Element.zero(pres)
    for i, j, lv in alg._lam_items:
        c = lv * (1 - alg.twist[i - 1]) * (1 - alg.twist[j - 1]) / 2
        if c:
            sign = 1 if i < j else -1
            out = out + Element(pres, {((DP, min(i, j), 1), (DP, max(i, j), 1)): sign * c})
    if out.is_zero():
        raise NoSolutionError("twisted lambda form vanishes")
    return out


def check_gamma(gamma: Element, alg: ResolutionAlgebra) -> CheckReport:
    """Twist invariance, intertwining with generators and closedness, inside the exact window."""
    window = (lambda m: True) if alg.truncation is None else (
        lambda m: p_degree(m) < alg.truncation)
    rep = CheckReport()
    rep.record("twist-invariance", "gamma", (alg.twisted(gamma) - gamma).filter(window))
    for kind in (X, P):
        for i in range(1, alg.n + 1):
            g = alg.gen(kind, i)
            res = bullet(gamma, g, alg) - bullet(alg.twisted(g), gamma, alg)
            rep.record("intertwining", ("x" if kind == X else "p", i), res.filter(window))
    rep.record("closedness", "d gamma", d_form(gamma).filter(window))
    return rep


def solve_gamma(alg: ResolutionAlgebra) -> Element:
    """``exp(<p, tx - x> [+ lambda(p, tp)])`` times the invariant 2-form, to the p-truncation."""
    if alg.truncation is None:
        raise ConfigError("gamma is a power series in p; set a truncation")
    form = gamma_form(alg)
    gamma = mul_el(_exp_series(alg, gamma_exponent(alg), alg.truncation), form)
    rep = check_gamma(gamma, alg)
    if not rep.passed:
        label, witness, _ = rep.rows[0]
        raise NoSolutionError(f"no gamma for this twist: {label} fails at {witness}")
    return gamma


def mul_el(a: Element, b: Element) -> Element:
    from .exactalg import mul
    return mul(a, b)


def apply_D(A: Pair, gamma: Element, alg: ResolutionAlgebra) -> Pair:
    return Pair(bullet(A.b, gamma, alg), Element.zero(alg.pres))


def build_D(gamma: Element, alg: ResolutionAlgebra) -> GradedMap:
    """Differential ``D(a, b) = (b . gamma, 0)`` as an arity-one map of degree one."""
    sp = alg.space
    return GradedMap(1, 1, lambda args: apply_D(sp.embed(args[0]), gamma, alg), sp,
                     label="D", res_degree=2)


def generator_pairs(alg: ResolutionAlgebra) -> list:
    """Generators of the extended algebra used for Leibniz-type checks."""
    gens = [alg.pair(1, None), alg.pair(None, 1)]
    for kind in (X, P, DP):
        for i in range(1, alg.n + 1):
            g = alg.gen(kind, i)
            gens.append(alg.pair(g, None))
            gens.append(alg.pair(None, g))
    return gens


def _pair_degree(alg, A: Pair) -> int:
    degs = {alg.space.degree(b) + 1 for _, b in alg.space.decompose(A)}
    if len(degs) != 1:
        raise ValueError("inhomogeneous pair")
    return degs.pop()


def check_D(gamma: Element, alg: ResolutionAlgebra) -> CheckReport:
    """D^2 = 0, Dd + dD = 0 and the Leibniz rule on generator pairs."""
    window = (lambda m: True) if alg.truncation is None else (
        lambda m: p_degree(m) < alg.truncation)
    rep = CheckReport()
    gens = generator_pairs(alg)
    D = lambda A: apply_D(A, gamma, alg)
    for g in gens:
        rep.record("D^2", g, D(D(g)).filter(window))
        rep.record("[D,d]", g, (D(de_rham_d(g)) + de_rham_d(D(g))).filter(window))
    for A in gens:
        sA = _sgn(_pair_degree(alg, A))
        for B in gens:
            lhs = D(bullet_product(A, B, alg))
            rhs = bullet_product(D(A), B, alg) + bullet_product(A, D(B), alg).scale(sA)
            rep.record("Leibniz", (A, B), (lhs - rhs).filter(window))
    return rep


# ---------------------------------------------------------------------------
# bases and SDR data


def x_monomials(n: int, degree: int) -> list:
    out = []
    for exps in itertools.product(range(degree + 1), repeat=n):
        if sum(exps) == degree:
            out.append(tuple((X, i + 1, e) for i, e in enumerate(exps) if e))
    return sorted(out)


def w_basis(alg: ResolutionAlgebra, max_degree: int) -> list:
    sides = (0, 1) if alg.extension else (0,)
    out = []
    for deg in range(max_degree + 1):
        for side in sides:
            for m in x_monomials(alg.n, deg):
                out.append((side, m))
    return out


def v_monomials(n: int, degree: int) -> list:
    """Monomials in x, p, dp of total word degree ``degree`` (dp exponents at most one)."""
    out = []
    for nd in range(min(degree, n) + 1):
        for dps in itertools.combinations(range(1, n + 1), nd):
            rest = degree - nd
            for xe in itertools.product(range(rest + 1), repeat=n):
                sx = sum(xe)
                if sx > rest:
                    continue
                for pe in itertools.product(range(rest - sx + 1), repeat=n):
                    if sx + sum(pe) != rest:
                        continue
                    mono = tuple((X, i + 1, e) for i, e in enumerate(xe) if e)
                    mono += tuple((P, i + 1, e) for i, e in enumerate(pe) if e)
                    mono += tuple((DP, i, 1) for i in dps)
                    out.append(mono)
    return sorted(out)


def v_basis(alg: ResolutionAlgebra, max_degree: int) -> list:
    sides = (0, 1) if alg.extension else (0,)
    return [(side, m) for deg in range(max_degree + 1) for side in sides
            for m in v_monomials(alg.n, deg)]


def _mono_degree(mono) -> int:
    return sum(pw for _, _, pw in mono)


def tuple_generator(basis_fn):
    """Tuples of basis vectors with total degree at most ``degree_max``, deterministic order."""

    def gen(arity: int, degree_max: int) -> Iterable:
        pool = basis_fn(degree_max)
        by_deg = defaultdict(list)
        for b in pool:
            by_deg[_mono_degree(b[1])].append(b)

        def rec(k, budget):
            if k == 0:
                yield ()
                return
            for dg in range(budget + 1):
                for b in by_deg.get(dg, ()):
                    for rest in rec(k - 1, budget - dg):
                        yield (b,) + rest

        yield from rec(arity, degree_max)

    return gen


def w_tuples(alg: ResolutionAlgebra):
    return tuple_generator(lambda dmax: w_basis(alg, dmax))


def v_tuples(alg: ResolutionAlgebra):
    return tuple_generator(lambda dmax: v_basis(alg, dmax))


@dataclass
class SDRData:
    d: GradedMap
    h: GradedMap
    i: GradedMap
    p: GradedMap
    alg: ResolutionAlgebra


def make_sdr(alg: ResolutionAlgebra) -> SDRData:
    sp = alg.space
    proj = GradedMap(1, 0, lambda args: project_p(sp.embed(args[0])), sp, label="p")
    inc = GradedMap(1, 0, lambda args: include_i(sp.embed(args[0])), sp, label="i")
    return SDRData(d=m1_map(alg), h=h_map(alg), i=inc, p=proj, alg=alg)


def check_sdr(s: SDRData, degree_max: int) -> CheckReport:
    """hd + dh = 1 - ip, h^2 = 0, pi = 1, ph = 0, hi = 0 on basis monomials."""
    alg = s.alg
    sp = alg.space
    rep = CheckReport()
    for b in v_basis(alg, degree_max):
        v = sp.embed(b)
        hv = s.h(v)
        lhs = s.h(s.d(v)) + s.d(hv)
        rep.record("hd+dh=1-ip", b, lhs - (v - s.i(s.p(v))))
        rep.record("h^2=0", b, s.h(hv))
        rep.record("ph=0", b, s.p(hv))
    for b in w_basis(alg, degree_max):
        w = sp.embed(b)
        rep.record("pi=1", b, s.p(s.i(w)) - w)
        rep.record("hi=0", b, s.h(s.i(w)))
    return rep


# ---------------------------------------------------------------------------
# configuration


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_vector(text: str) -> list:
    return [Fraction(t.strip()) for t in text.split(",") if t.strip()]


def _parse_matrix(text: str) -> list:
    return [_parse_vector(row) for row in text.split(";") if row.strip()]


def algebra_from_config(cfg: dict) -> ResolutionAlgebra:
    try:
        n = int(cfg.get("n", "2"))
        kind = cfg.get("kind", "polynomial")
        twist = _parse_vector(cfg["twist"]) if "twist" in cfg else None
        lam = _parse_matrix(cfg["lambda"]) if "lambda" in cfg else None
        trunc = cfg.get("truncation")
        trunc = int(trunc) if trunc not in (None, "", "none") else None
        ext = cfg.get("extension", "true").lower() in ("1", "true", "yes")
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc)) from exc
    return ResolutionAlgebra(n, kind, twist, lam, trunc, ext)


def parse_pair(text: str, alg: ResolutionAlgebra) -> Pair:
    """Inverse of ``repr(Pair)``: ``(pair (+ ...) (+ ...))``."""
    from .exactalg import element_from_tree, read_sexpr
    tree = read_sexpr(text)
    if not isinstance(tree, list) or len(tree) != 3 or tree[0] != "pair":
        raise ValueError("expected (pair A B)")
    return Pair(element_from_tree(tree[1], alg.pres), element_from_tree(tree[2], alg.pres))
