"""Order-by-order solution of the master equations and closed-form checks.

The t-dependence is handled as exact power-series recursion: with
``mu = sum mu_k t^k`` and ``Lambda_n = sum Lambda_{n,k} t^k`` the ODE system

    mu'       = sum_m (-D'_mu h~)^m Lambda_m
    Lambda_n' = sum_j sum_m [h~ (-D'_mu h~)^m Lambda_{j+m+1}, Lambda_{n-j}]

gives ``mu_{k+1}`` and ``Lambda_{n,k+1}`` from data of order <= k.  Here
``D'_mu = [m' + mu, -]`` and ``h~`` post-composes with the contracting
homotopy.  Coefficients follow the Taylor convention ``m^(k) = mu^(k)(0)/k!``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from typing import Sequence

from .exactalg import X, Element, form_degree, p_degree, simplex_integrate, Presentation
from .gradedmaps import (
    DeformationSeries, GradedMap, gerstenhaber_bracket, linear_combination, post_compose,
    scale_map, TruncationError,
)
from .resolution import (
    Pair, ResolutionAlgebra, apply_D, bullet, bullet_product, homotopy_h, m1_map, m2_map,
    project_p, _is_w_mono,
)


class CocycleError(ValueError):
    pass


class RestrictionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# families: lists of maps of one degree, at most one map per arity


def combine(maps: Sequence[GradedMap], label: str = "") -> list:
    by_arity: dict = defaultdict(list)
    for f in maps:
        by_arity[f.arity].append(f)
    out = []
    for arity in sorted(by_arity):
        group = by_arity[arity]
        out.append(group[0] if len(group) == 1 else
                   linear_combination([(1, f) for f in group], label=label or "sum"))
    return out


def htilde(family: list) -> list:
    return [post_compose(homotopy_h, f, -1, label=f"h~{f.label}") for f in family]


def bracket_families(A: list, B: list) -> list:
    return [gerstenhaber_bracket(f, g) for f in A for g in B]


def neg_family(family: list) -> list:
    return [scale_map(-1, f) for f in family]


def lambda_family(lam_maps: Sequence[GradedMap]) -> dict:
    """Group a generator by resolution degree."""
    out: dict = defaultdict(list)
    for f in lam_maps:
        if f.res_degree is None:
            raise ValueError(f"{f!r} lacks a resolution degree")
        out[f.res_degree].append(f)
    return dict(out)


def check_closed(lam_maps: Sequence[GradedMap], alg: ResolutionAlgebra, tuples, degree_max: int,
                 window=None) -> None:
    """Raise CocycleError unless [m' + d, lambda] vanishes on the given test tuples."""
    mtot = [m1_map(alg), m2_map(alg)]
    for f in lam_maps:
        for g in mtot:
            br = gerstenhaber_bracket(g, f)
            for args in tuples(br.arity, degree_max):
                res = br.on_basis(tuple(args))
                if window is not None:
                    res = window(res)
                if not res.is_zero():
                    raise CocycleError(f"[{g.label},{f.label}] nonzero on {args}: {res}")


# ---------------------------------------------------------------------------
# master-equation engine


class MasterSolution:
    """Lazy solver state; ``mu[k]`` and ``Lambda[n][k]`` are families of maps."""

    def __init__(self, lam_maps: Sequence[GradedMap], alg: ResolutionAlgebra):
        self.alg = alg
        self.mprime = m2_map(alg)
        self.lam = lambda_family(lam_maps)
        self.M = alg.n  # forms have at most n dp factors
        if any(r > self.M or r < 0 for r in self.lam):
            raise ValueError("generator resolution degree outside [0, n]")
        self.mu: dict = {0: []}
        self.Lambda = {n: {0: combine(self.lam.get(n, []))} for n in range(self.M + 1)}
        self.order = 0
        self._coef: dict = {}

    def _Lam(self, J: int, o: int) -> list:
        if J > self.M:
            return []
        return self.Lambda[J].get(o, [])

    def coef(self, m: int, J: int, o: int) -> list:
        """[t^o] of (-D'_mu h~)^m Lambda_J."""
        key = (m, J, o)
        hit = self._coef.get(key)
        if hit is not None:
            return hit
        if m == 0:
            res = self._Lam(J, o)
        else:
            terms = []
            prev = htilde(self.coef(m - 1, J, o))
            terms += bracket_families([self.mprime], prev)
            for i in range(1, o + 1):
                mu_i = self.mu.get(i, [])
                if mu_i:
                    terms += bracket_families(mu_i, htilde(self.coef(m - 1, J, o - i)))
            res = combine(neg_family(terms)) if terms else []
        self._coef[key] = res
        return res

    def step(self) -> None:
        k = self.order
        scale = Fraction(1, k + 1)
        mu_terms = []
        for m in range(self.M + 1):
            mu_terms += self.coef(m, m, k)
        new_mu = [scale_map(scale, f) for f in combine(mu_terms)]
        new_lam = {}
        for n in range(self.M + 1):
            terms = []
            for j in range(n + 1):
                for m in range(self.M + 1):
                    J = j + m + 1
                    if J > self.M:
                        break
                    for a in range(k + 1):
                        left = htilde(self.coef(m, J, a))
                        right = self._Lam(n - j, k - a)
                        if left and right:
                            terms += bracket_families(left, right)
            new_lam[n] = [scale_map(scale, f) for f in combine(terms)]
        self.mu[k + 1] = new_mu
        for n in range(self.M + 1):
            self.Lambda[n][k + 1] = new_lam[n]
        self.order = k + 1

    def solve(self, t_order: int) -> "MasterSolution":
        while self.order < t_order:
            self.step()
        return self

    def gamma(self, n: int, o: int) -> list:
        """[t^o] Gamma_n = [t^(o-1)] sum_k (-h~ D'_mu)^k h~ Lambda_{n+k+1}."""
        if o == 0:
            return []
        terms = []
        for k in range(self.M + 1):
            J = n + k + 1
            if J > self.M:
                break
            terms += htilde(self.coef(k, J, o - 1))
        return combine(terms)

    def series(self, t_order: int | None = None, include_base: bool = True) -> DeformationSeries:
        t_order = self.order if t_order is None else t_order
        self.solve(t_order)
        base = [m1_map(self.alg), self.mprime] if include_base else []
        comps = [base] + [self.mu[k] for k in range(1, t_order + 1)]
        return DeformationSeries(comps)


def solve_master(lam_maps: Sequence[GradedMap], alg: ResolutionAlgebra, t_order: int,
                 arity_max: int | None = None) -> DeformationSeries:
    """Series ``m' + d + sum_k mu_k t^k`` on the resolution (arity_max only filters output)."""
    sol = MasterSolution(lam_maps, alg).solve(t_order)
    series = sol.series(t_order)
    if arity_max is not None:
        series = DeformationSeries([[f for f in comp if f.arity <= arity_max]
                                    for comp in series.components])
    series.solution = sol
    return series


def first_order(lam_maps: Sequence[GradedMap], alg: ResolutionAlgebra) -> list:
    """mu'(0) = sum_m (-D' h~)^m lambda_m."""
    mprime = m2_map(alg)
    out = []
    for m, fam in lambda_family(lam_maps).items():
        cur = combine(fam)
        for _ in range(m):
            cur = combine(neg_family(bracket_families([mprime], htilde(cur))))
        out += cur
    return combine(out)


def _power(family: list, mprime: GradedMap, m: int) -> list:
    cur = family
    for _ in range(m):
        if not cur:
            return []
        cur = combine(neg_family(bracket_families([mprime], htilde(cur))))
    return cur


def second_order(lam_maps: Sequence[GradedMap], alg: ResolutionAlgebra, k_start: int = 1) -> list:
    """mu''(0) from the closed second-order display.

    ``k_start`` is the lower limit of the inner sum over insertion positions of
    mu'(0); the display uses 1, direct differentiation of the ODE gives 0.
    """
    mprime = m2_map(alg)
    lam = lambda_family(lam_maps)
    M = alg.n
    lam_m = {m: combine(lam.get(m, [])) for m in range(M + 1)}
    mu1 = first_order(lam_maps, alg)

    lam_dot = {}
    for n in range(M + 1):
        terms = []
        for k in range(n + 1):
            for m in range(0, M - k):
                left = htilde(_power(lam_m.get(k + m + 1, []), mprime, m))
                right = lam_m.get(n - k, [])
                if left and right:
                    terms += bracket_families(left, right)
        lam_dot[n] = combine(terms)

    terms = []
    for m in range(M + 1):
        if not lam_m.get(m):
            continue
        for k in range(k_start, m):
            inner = htilde(_power(lam_m[m], mprime, m - k - 1))
            br = bracket_families(mu1, inner)
            terms += neg_family(_power(combine(br), mprime, k))
    for m in range(M + 1):
        terms += _power(lam_dot[m], mprime, m)
    return combine(terms)


# ---------------------------------------------------------------------------
# restriction to W


def restrict_to_W(series: DeformationSeries, alg: ResolutionAlgebra, window=None) -> DeformationSeries:
    """Evaluate on W-inputs and project; the non-W part (inside ``window``) must vanish."""
    sp = alg.space

    def restricted(f: GradedMap) -> GradedMap:
        def rule(args):
            for b in args:
                if not _is_w_mono(b[1]):
                    raise RestrictionError(f"input {b} is not in W")
            val = f.on_basis(args)
            rest = val.filter(lambda m: not _is_w_mono(m))
            if window is not None:
                rest = window(rest)
            if not rest.is_zero():
                raise RestrictionError(f"{f.label} leaves W on {args}: {rest}")
            return project_p(val)

        return GradedMap(f.arity, f.degree, rule, sp, label=f"{f.label}|W",
                         res_degree=f.res_degree)

    comps = []
    for comp in series.components:
        comps.append([restricted(f) for f in comp if f.label != "d"])
    return DeformationSeries(comps)


# ---------------------------------------------------------------------------
# closed forms


def block_indices(alg: ResolutionAlgebra) -> tuple[int, int]:
    moved = [i for i, q in enumerate(alg.twist, start=1) if q != 1]
    if len(moved) == 2:
        return moved[0], moved[1]
    if not moved:
        return 1, 2
    raise ValueError("twist must move exactly two coordinates")


def _substitute(a: Element, alg: ResolutionAlgebra, nvars: int = 1, offset: int = 0) -> dict:
    """x^i -> (1 + s c_i) x^i with c_i = 1/q_i - 1; returns {power of s: Element}."""
    out: dict = defaultdict(lambda: Element.zero(alg.pres))
    for mono, c in a.terms.items():
        poly = {0: Fraction(c)}
        target = []
        for kind, idx, pw in mono:
            if kind != X:
                raise ValueError("closed forms take polynomials in x")
            i = idx - offset
            target.append((X, i, pw))
            ci = 1 / alg.twist[i - 1] - 1
            nxt: dict = defaultdict(Fraction)
            for r, v in poly.items():
                for s in range(pw + 1):
                    nxt[r + s] += v * math.comb(pw, s) * ci**s
            poly = nxt
        tm = tuple(sorted(target))
        for r, v in poly.items():
            if v:
                out[r] = out[r] + Element(alg.pres, {tm: v})
    return dict(out)


def closed_phi(a: Element, b: Element, alg: ResolutionAlgebra) -> Element:
    """phi(a,b) = -eps^{ab} int_{0<u<w<1} d_a a((1-w)x + w tx) d_b b((1-u)x + u tx)."""
    from .exactalg import mul, partial_derivative
    i, j = block_indices(alg)
    integrand: dict = defaultdict(lambda: Element.zero(alg.pres))
    for (al, be, sign) in ((i, j, 1), (j, i, -1)):
        da = _substitute(partial_derivative(X, al, a), alg)
        db = _substitute(partial_derivative(X, be, b), alg)
        for rw, ea in da.items():
            for ru, eb in db.items():
                integrand[(ru, rw)] = integrand[(ru, rw)] + mul(ea, eb).scale(-sign)
    res = simplex_integrate(dict(integrand))
    return Element.zero(alg.pres) if isinstance(res, int) else res


class _TwoPoint:
    """Polynomials in x1 (indices 1..n) and x2 (n+1..2n) with (u, w)-polynomial coefficients."""

    def __init__(self, alg: ResolutionAlgebra):
        self.alg = alg
        self.n = alg.n
        self.pres = Presentation(n=2 * alg.n, m=0, weyl=False)

    def lift(self, a: Element, slot: int) -> Element:
        off = 0 if slot == 1 else self.n
        terms = {}
        for mono, c in a.terms.items():
            terms[tuple((k, i + off, pw) for k, i, pw in mono)] = c
        return Element(self.pres, terms)


def _deriv(el: Element, var: int) -> Element:
    from .exactalg import partial_derivative
    return partial_derivative(X, var, el)


def closed_Phi(a: Element, b: Element, alg: ResolutionAlgebra, moyal: bool = True,
               quadratic_sign: int = -1) -> Element:
    """Weyl-twisted 2-cocycle: exponential operators in d/dx1, d/dx2, then shifts and integration.

    The exponent is lambda(p1,p2) + w lambda(p1, tp1+tp2-p2) + u lambda(p2, tp2+tp1-p1)
    + s lambda(P, tP) with P = w p1 + u p2 and s = ``quadratic_sign``.  The default
    s = -1 matches gamma = exp(<p, tx - x> - lambda(p, tp)) for this product.
    ``moyal=False`` sets lambda to zero inside the exponentials only.
    """
    tp = _TwoPoint(alg)
    n = alg.n
    q = alg.twist
    lam = alg.lam
    # quadratic operator: list of (coef, eu, ew, var1, var2)
    ops = []
    if moyal:
        for i in range(n):
            for j in range(n):
                if not lam[i][j]:
                    continue
                l = lam[i][j]
                sq = l * q[j] * quadratic_sign
                v1i, v1j, v2i, v2j = i + 1, j + 1, n + i + 1, n + j + 1
                # lambda(p1, p2)
                ops.append((l, 0, 0, v1i, v2j))
                # w lambda(p1, tp1 + tp2 - p2)
                ops.append((l * q[j], 0, 1, v1i, v1j))
                ops.append((l * q[j], 0, 1, v1i, v2j))
                ops.append((-l, 0, 1, v1i, v2j))
                # u lambda(p2, tp2 + tp1 - p1)
                ops.append((l * q[j], 1, 0, v2i, v2j))
                ops.append((l * q[j], 1, 0, v2i, v1j))
                ops.append((-l, 1, 0, v2i, v1j))
                # s lambda(P, tP), expanded in u and w
                ops.append((sq, 0, 2, v1i, v1j))
                ops.append((sq, 1, 1, v1i, v2j))
                ops.append((sq, 1, 1, v2i, v1j))
                ops.append((sq, 2, 0, v2i, v2j))
    f = {(0, 0): tp.lift(a, 1) * tp.lift(b, 2)}
    # lambda_theta(p1, p2)
    g: dict = defaultdict(lambda: Element.zero(tp.pres))
    for i in range(n):
        for j in range(n):
            c = lam[i][j] * (1 - q[i]) * (1 - q[j])
            if c:
                for key, el in f.items():
                    g[key] = g[key] + _deriv(_deriv(el, i + 1), n + j + 1).scale(c)
    total: dict = defaultdict(lambda: Element.zero(tp.pres))
    term = {k: v for k, v in g.items() if not v.is_zero()}
    k = 0
    while term:
        for key, el in term.items():
            total[key] = total[key] + el
        k += 1
        nxt: dict = defaultdict(lambda: Element.zero(tp.pres))
        for (eu, ew), el in term.items():
            for c, du, dw, v1, v2 in ops:
                d = _deriv(_deriv(el, v1), v2)
                if not d.is_zero():
                    nxt[(eu + du, ew + dw)] = nxt[(eu + du, ew + dw)] + d.scale(Fraction(c, k))
        term = {kk: v for kk, v in nxt.items() if not v.is_zero()}
    # shifts x1 -> (1-w)x + w tx, x2 -> (1-u)x + u tx
    integrand: dict = defaultdict(lambda: Element.zero(alg.pres))
    for (eu, ew), el in total.items():
        for mono, c in el.terms.items():
            m1 = tuple((X, i, pw) for kind, i, pw in mono if i <= n)
            m2 = tuple((X, i - n, pw) for kind, i, pw in mono if i > n)
            s1 = _substitute(Element(alg.pres, {m1: 1}), alg)
            s2 = _substitute(Element(alg.pres, {m2: 1}), alg)
            for rw, e1 in s1.items():
                for ru, e2 in s2.items():
                    key = (eu + ru, ew + rw)
                    integrand[key] = integrand[key] + (e1 * e2).scale(-c)
    res = simplex_integrate(dict(integrand))
    return Element.zero(alg.pres) if isinstance(res, int) else res


def star(a: Element, b: Element, alg: ResolutionAlgebra) -> Element:
    """Product induced on W: ordinary product, or exp(lambda^{ij} <-d_i ->d_j) for Vasiliev."""
    return bullet(a, b, alg)


def m3_closed_form(alpha1: Pair, alpha2: Pair, alpha3: Pair, alg: ResolutionAlgebra,
                   quadratic_sign: int = -1) -> Pair:
    """(b1 phi(a2,a3), b1 phi(a2,b3) - b1 phi(b2, t a3)); Phi and * for the Vasiliev kind."""
    if alg.kind == "polynomial":
        F = lambda u, v: closed_phi(u, v, alg)
    else:
        F = lambda u, v: closed_Phi(u, v, alg, quadratic_sign=quadratic_sign)
    b1 = alpha1.b
    a2, b2 = alpha2.a, alpha2.b
    a3, b3 = alpha3.a, alpha3.b
    first = star(b1, F(a2, a3), alg)
    second = star(b1, F(a2, b3), alg) - star(b1, F(b2, alg.twisted(a3)), alg)
    return Pair(first, second)


def _vdeg(alg: ResolutionAlgebra, A: Pair) -> int:
    degs = {alg.space.degree(b) for _, b in alg.space.decompose(A)}
    if len(degs) > 1:
        raise ValueError("inhomogeneous argument")
    return degs.pop() if degs else 0


def m3_composite(alpha1: Pair, alpha2: Pair, alpha3: Pair, gamma: Element,
                 alg: ResolutionAlgebra) -> Pair:
    """(-1)^{|alpha2|} h(hD(alpha1) . alpha2) . alpha3, projected to W."""
    inner = homotopy_h(apply_D(alpha1, gamma, alg))
    val = bullet_product(homotopy_h(bullet_product(inner, alpha2, alg)), alpha3, alg)
    if _vdeg(alg, alpha2) % 2:
        val = -val
    return project_p(val)


def moyal_product(a: Element, b: Element, lam, order: int | None = None, t=1) -> Element:
    """a exp((t/2) lambda^{ij} <-d_i ->d_j) b, optionally only the t^order coefficient."""
    from .exactalg import derive_monomial, mul_monomials
    pres = a.pres
    n = pres.n
    lam = [[Fraction(v) for v in row] for row in lam]
    items = [(i + 1, j + 1, lam[i][j]) for i in range(n) for j in range(n) if lam[i][j]]
    cur = {(ma, mb): ca * cb for ma, ca in a.terms.items() for mb, cb in b.terms.items()}
    out: dict = defaultdict(Fraction)
    k = 0
    fact = 1
    t = Fraction(t)
    while cur:
        if order is None or order == k:
            for (ma, mb), c in cur.items():
                for m3, c3 in mul_monomials(pres, ma, mb):
                    out[m3] += c * c3 * (t / 2) ** k / fact
        if order is not None and k >= order:
            break
        nxt: dict = defaultdict(Fraction)
        for (ma, mb), c in cur.items():
            for i, j, lv in items:
                da = derive_monomial(ma, X, i)
                db = derive_monomial(mb, X, j)
                if da and db:
                    nxt[(da[1], db[1])] += c * lv * da[0] * db[0]
        cur = {kk: v for kk, v in nxt.items() if v}
        k += 1
        fact *= k
    return Element(pres, out)
